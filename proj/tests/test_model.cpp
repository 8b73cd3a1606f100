#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <utility>

#include "ris_sense/checkpoint.hpp"
#include "ris_sense/errors.hpp"
#include "ris_sense/gradcheck.hpp"
#include "ris_sense/model.hpp"

using namespace ris;
using namespace ris::nn;
namespace fs = std::filesystem;

namespace {

// Sum of every weight, bias and BN affine parameter for the full network,
// written out term by term.
constexpr std::size_t kStandardParameterCount =
    (32 * 3 * 9 + 32) + (64 * 32 * 9 + 64) + (128 * 64 * 9 + 128) + 2 * (32 + 64 + 128) +
    (256 * 100352 + 256) + (3 * 256 + 3);

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("ris_sense_test_" + name); }

bool bitwise_equal(const CcnnModel& a, const CcnnModel& b) {
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!(*pa[i] == *pb[i])) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("parameter count matches the architecture arithmetic") {
    static_assert(kStandardParameterCount == 25784835);
    CcnnModel model;
    CHECK(model.parameter_count() == kStandardParameterCount);
    CHECK(count_parameters(Architecture::standard()) == kStandardParameterCount);
    CHECK(model.buffer_count() == 2 * (32 + 64 + 128));
    CHECK(model.fc1.weight.shape() == Shape{256, 100352});
    CHECK(model.fc2.weight.shape() == Shape{3, 256});
    CHECK(model.conv[0].weight.shape() == Shape{32, 3, 3, 3});
    CHECK(model.conv[1].weight.shape() == Shape{64, 32, 3, 3});
    CHECK(model.conv[2].weight.shape() == Shape{128, 64, 3, 3});
}

TEST_CASE("model_init is deterministic and Glorot-bounded") {
    Rng a(7), b(7);
    const auto m1 = model_init(a);
    const auto m2 = model_init(b);
    CHECK(bitwise_equal(m1, m2));

    const double bound = glorot_bound(27, 32 * 9);
    CHECK(bound == doctest::Approx(std::sqrt(6.0 / 315.0)));
    CHECK(bound == doctest::Approx(0.138013).epsilon(1e-5));
    CHECK(m1.conv[0].weight.max_abs() <= bound);
    CHECK(m1.conv[0].weight.max_abs() > 0.9 * bound);
    CHECK(m1.fc1.weight.max_abs() <= glorot_bound(100352, 256));
    for (const auto& layer : m1.bn) {
        for (double g : layer.gamma.data()) CHECK(g == 1.0);
        CHECK(layer.beta.max_abs() == 0.0);
        CHECK(layer.running_mean.max_abs() == 0.0);
        for (double v : layer.running_var.data()) CHECK(v == 1.0);
    }
    CHECK(m1.conv[1].bias.max_abs() == 0.0);
    CHECK(m1.fc2.bias.max_abs() == 0.0);
}

TEST_CASE("full-size forward follows the documented shape chain") {
    Rng rng(11);
    const auto model = model_init(rng);
    std::vector<Shape> stages;
    const auto probs = model.predict_traced(rng_uniform(rng, {1, 3, 224, 224}, 0, 1), stages);
    REQUIRE(stages.size() == 6);
    CHECK(stages[0] == Shape{1, 32, 112, 112});
    CHECK(stages[1] == Shape{1, 64, 56, 56});
    CHECK(stages[2] == Shape{1, 128, 28, 28});
    CHECK(stages[3] == Shape{1, 100352});
    CHECK(stages[4] == Shape{1, 256});
    CHECK(stages[5] == Shape{1, 3});
    CHECK(probs.shape() == Shape{1, 3});
    CHECK(std::abs(probs.sum() - 1.0) <= 1e-9);
}

TEST_CASE("wrong input shape is rejected") {
    const CcnnModel model(Architecture::reduced());
    CHECK_THROWS_AS(model.predict(Tensor({1, 3, 16, 16}, 0.0)), ShapeError);
    CHECK_THROWS_AS(model.predict(Tensor({1, 1, 8, 8}, 0.0)), ShapeError);
}

TEST_CASE("outputs lie on the simplex for random inputs") {
    Rng rng(12);
    auto model = model_init(rng, Architecture::reduced());
    model.set_mode(Mode::Eval);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto p = model.predict(rng_uniform(rng, {1, 3, 8, 8}, -5, 5));
        double s = 0.0;
        for (double v : p.data()) {
            REQUIRE(v >= 0.0);
            s += v;
        }
        REQUIRE(std::abs(s - 1.0) <= 1e-9);
    }
}

TEST_CASE("eval mode is deterministic and zero weights give a uniform output") {
    Rng rng(13);
    auto model = model_init(rng, Architecture::reduced());
    model.set_mode(Mode::Eval);
    const Tensor x = rng_uniform(rng, {2, 3, 8, 8}, 0, 1);
    Rng unused(0);
    CHECK(model.forward(x, unused) == model.forward(x, unused));

    const CcnnModel zero(Architecture::reduced());
    const auto p = zero.predict(Tensor({1, 3, 8, 8}, 0.0));
    for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("dropout toggling with p = 0 leaves the forward unchanged") {
    Rng rng(14);
    auto model = model_init(rng, Architecture::reduced());
    model.dropout.p = 0.0;
    const Tensor x = rng_uniform(rng, {4, 3, 8, 8}, 0, 1);
    auto copy = model;
    Rng r1(1), r2(2);
    const auto a = model.forward_train(x, r1).probs;
    const auto b = copy.forward_train(x, r2).probs;
    CHECK(a == b);
}

TEST_CASE("model backward") {
    Rng rng(15);
    auto model = model_init(rng, Architecture::reduced());
    const Tensor x = rng_uniform(rng, {4, 3, 8, 8}, 0, 1);
    Rng drop(3);
    const auto cache = model.forward_train(x, drop);

    const auto zero = model.backward(cache, Tensor(cache.logits.shape(), 0.0));
    REQUIRE(zero.tensors.size() == model.parameters().size());
    for (std::size_t i = 0; i < zero.tensors.size(); ++i) {
        CHECK(zero.tensors[i].shape() == model.parameters()[i]->shape());
        CHECK(zero.tensors[i].max_abs() == 0.0);
    }

    const std::vector<int> labels{2, 0, 1, 1};
    const auto loss = softmax_cross_entropy(cache.logits, labels);
    const auto grads = model.backward(cache, loss.grad_logits);
    for (std::size_t k = 0; k < 3; ++k) {
        double expected = 0.0;
        for (std::size_t s = 0; s < 4; ++s) expected += cache.probs[s * 3 + k] - (labels[s] == int(k) ? 1.0 : 0.0);
        CHECK(grads.tensors[15][k] == doctest::Approx(expected / 4.0).epsilon(1e-12));
    }

    ForwardCache eval_cache;
    CHECK_THROWS_AS(model.backward(eval_cache, Tensor({4, 3}, 0.0)), ModeError);
}

TEST_CASE("reduced model gradients match finite differences") {
    for (const auto& e : run_gradcheck("model")) {
        INFO(e.name << " rel err " << e.max_rel_error);
        CHECK(e.max_rel_error <= kModelGradTolerance);
    }
}

TEST_CASE("checkpoint round trip") {
    Rng rng(21);
    auto model = model_init(rng);
    // Perturb BN statistics so the buffers are part of the comparison.
    model.bn[1].running_mean = rng_uniform(rng, {64}, -1, 1);
    model.bn[1].running_var = rng_uniform(rng, {64}, 0.5, 2);
    model.set_mode(Mode::Eval);
    const auto path = temp_path("roundtrip.ccnn");
    save_checkpoint(model, path, 21, {{"epochs", 3}});

    const auto info = read_checkpoint_info(path);
    CHECK(info.version == kCheckpointVersion);
    CHECK(info.header.at("parameter_count").get<std::size_t>() == kStandardParameterCount);
    CHECK(info.header.at("seed").get<std::uint64_t>() == 21);
    CHECK(info.header.at("training").at("epochs") == 3);
    const std::size_t stored = kStandardParameterCount + 448;
    CHECK(info.header.at("stored_value_count").get<std::size_t>() == stored);
    const auto header_len = info.header.dump().size();
    CHECK(fs::file_size(path) == 12 + header_len + 4 * stored);

    const auto loaded = load_checkpoint(path);
    const auto pa = std::as_const(model).parameters();
    const auto pb = loaded.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t k = 0; k < pa[i]->size(); ++k) {
            REQUIRE((*pb[i])[k] == static_cast<double>(static_cast<float>((*pa[i])[k])));
        }
    }
    CHECK(*loaded.buffers()[2] == Tensor::from_data({64}, [&] {
        std::vector<double> v;
        for (double x : model.bn[1].running_mean.data()) v.push_back(static_cast<float>(x));
        return v;
    }()));

    const Tensor probe = rng_uniform(rng, {2, 3, 224, 224}, 0, 1);
    const auto a = model.predict(probe), b = loaded.predict(probe);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    CHECK(diff <= 1e-6);
    fs::remove(path);
}

TEST_CASE("checkpoint format errors are typed") {
    Rng rng(22);
    const auto model = model_init(rng, Architecture::reduced());
    const auto path = temp_path("format.ccnn");
    save_checkpoint(model, path, 22);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& content) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    };
    auto kind_of = [&] {
        try {
            load_checkpoint(path);
        } catch (const FormatError& e) {
            return e.kind();
        }
        FAIL("expected a FormatError");
        return FormatError::Kind::Io;
    };

    write(bytes.substr(0, bytes.size() - 10));
    CHECK(kind_of() == FormatError::Kind::TruncatedPayload);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    write(bad_magic);
    CHECK(kind_of() == FormatError::Kind::BadMagic);

    std::string bad_version = bytes;
    bad_version[4] = 9;
    write(bad_version);
    CHECK(kind_of() == FormatError::Kind::UnsupportedVersion);

    write(bytes.substr(0, 20));
    CHECK(kind_of() == FormatError::Kind::TruncatedPayload);

    fs::remove(path);
    CHECK(kind_of() == FormatError::Kind::Io);
}
