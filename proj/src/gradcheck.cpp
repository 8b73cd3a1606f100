#include "ris_sense/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ris_sense/errors.hpp"
#include "ris_sense/finite_diff.hpp"
#include "ris_sense/layers.hpp"
#include "ris_sense/model.hpp"

namespace ris::nn {

namespace {

double weighted_sum(const Tensor& y, const Tensor& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * weights[i];
    return s;
}

GradCheckEntry compare(std::string name, const Tensor& analytic, const ScalarFn& f, const Tensor& at,
                       double tolerance) {
    return {std::move(name), max_relative_error(analytic, finite_diff_grad(f, at, kGradCheckStep)), tolerance};
}

void check_conv(Rng& rng, std::vector<GradCheckEntry>& out) {
    Conv2D layer{rng_uniform(rng, {3, 2, 3, 3}, -1, 1), rng_uniform(rng, {3}, -1, 1)};
    const Tensor x = rng_uniform(rng, {1, 2, 5, 5}, -1, 1);
    const Tensor r = rng_uniform(rng, {1, 3, 5, 5}, -1, 1);
    const auto grads = conv2d_backward(layer, x, r);
    const double tol = kLayerGradTolerance;
    out.push_back(compare("conv.grad_x", grads.grad_x,
                          [&](const Tensor& v) { return weighted_sum(conv2d_forward(layer, v), r); }, x, tol));
    out.push_back(compare("conv.grad_w", grads.grad_w, [&](const Tensor& w) {
        Conv2D probe{w, layer.bias};
        return weighted_sum(conv2d_forward(probe, x), r);
    }, layer.weight, tol));
    out.push_back(compare("conv.grad_b", grads.grad_b, [&](const Tensor& b) {
        Conv2D probe{layer.weight, b};
        return weighted_sum(conv2d_forward(probe, x), r);
    }, layer.bias, tol));
}

void check_bn(Rng& rng, std::vector<GradCheckEntry>& out) {
    BatchNorm2D layer = BatchNorm2D::identity(3);
    layer.gamma = rng_uniform(rng, {3}, 0.5, 1.5);
    layer.beta = rng_uniform(rng, {3}, -0.5, 0.5);
    const Tensor x = rng_uniform(rng, {2, 3, 4, 4}, -2, 2);
    const Tensor r = rng_uniform(rng, {2, 3, 4, 4}, -1, 1);
    auto eval = [&](BatchNorm2D probe, const Tensor& input) {
        return weighted_sum(batchnorm2d_forward(probe, input, Mode::Train).y, r);
    };
    BatchNorm2D working = layer;
    const auto fwd = batchnorm2d_forward(working, x, Mode::Train);
    const auto grads = batchnorm2d_backward(layer, fwd.cache, r);
    const double tol = kLayerGradTolerance;
    out.push_back(compare("bn.grad_x", grads.grad_x, [&](const Tensor& v) { return eval(layer, v); }, x, tol));
    out.push_back(compare("bn.grad_gamma", grads.grad_gamma, [&](const Tensor& g) {
        BatchNorm2D probe = layer;
        probe.gamma = g;
        return eval(probe, x);
    }, layer.gamma, tol));
    out.push_back(compare("bn.grad_beta", grads.grad_beta, [&](const Tensor& b) {
        BatchNorm2D probe = layer;
        probe.beta = b;
        return eval(probe, x);
    }, layer.beta, tol));
}

void check_relu(Rng& rng, std::vector<GradCheckEntry>& out) {
    Tensor x = rng_uniform(rng, {2, 3, 8, 8}, -1, 1);
    for (auto& v : x.data()) {
        if (std::abs(v) < 1e-3) v = v < 0 ? -0.5 : 0.5;
    }
    const Tensor r = rng_uniform(rng, x.shape(), -1, 1);
    out.push_back(compare("relu.grad_x", relu_backward(x, r),
                          [&](const Tensor& v) { return weighted_sum(relu(v), r); }, x, kLayerGradTolerance));
}

void check_pool(Rng& rng, std::vector<GradCheckEntry>& out) {
    // Distinct values on a 0.01 grid keep every window free of near-ties.
    Tensor x({2, 3, 8, 8}, 0.0);
    const auto order = shuffled_indices(rng, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[order[i]] = 0.01 * static_cast<double>(i) - 1.0;
    const Tensor r = rng_uniform(rng, {2, 3, 4, 4}, -1, 1);
    const auto pooled = maxpool2d_forward(x);
    out.push_back(compare("pool.grad_x", maxpool2d_backward(pooled.indices, r),
                          [&](const Tensor& v) { return weighted_sum(maxpool2d_forward(v).y, r); }, x,
                          kLayerGradTolerance));
}

void check_linear(Rng& rng, std::vector<GradCheckEntry>& out) {
    Linear layer{rng_uniform(rng, {2, 5}, -1, 1), rng_uniform(rng, {2}, -1, 1)};
    const Tensor x = rng_uniform(rng, {3, 5}, -1, 1);
    const Tensor r = rng_uniform(rng, {3, 2}, -1, 1);
    const auto grads = linear_backward(layer, x, r);
    const double tol = kLayerGradTolerance;
    out.push_back(compare("linear.grad_x", grads.grad_x,
                          [&](const Tensor& v) { return weighted_sum(linear_forward(layer, v), r); }, x, tol));
    out.push_back(compare("linear.grad_w", grads.grad_w, [&](const Tensor& w) {
        return weighted_sum(linear_forward(Linear{w, layer.bias}, x), r);
    }, layer.weight, tol));
    out.push_back(compare("linear.grad_b", grads.grad_b, [&](const Tensor& b) {
        return weighted_sum(linear_forward(Linear{layer.weight, b}, x), r);
    }, layer.bias, tol));
}

void check_dropout(Rng& rng, std::vector<GradCheckEntry>& out) {
    const Dropout layer{0.5, Mode::Train};
    const Tensor x = rng_uniform(rng, {4, 6}, -1, 1);
    const Tensor r = rng_uniform(rng, x.shape(), -1, 1);
    const std::uint64_t mask_seed = rng.next_u64();
    Rng mask_rng(mask_seed);
    const auto fwd = dropout_forward(layer, x, mask_rng);
    out.push_back(compare("dropout.grad_x", dropout_backward(fwd.mask, r), [&](const Tensor& v) {
        Rng same(mask_seed);
        return weighted_sum(dropout_forward(layer, v, same).y, r);
    }, x, kLayerGradTolerance));
}

void check_softmax(Rng& rng, std::vector<GradCheckEntry>& out) {
    const Tensor logits = rng_uniform(rng, {4, 3}, -3, 3);
    std::vector<int> labels(4);
    for (auto& l : labels) l = static_cast<int>(rng.below(3));
    const auto loss = softmax_cross_entropy(logits, labels);
    out.push_back(compare("softmax_ce.grad_logits", loss.grad_logits,
                          [&](const Tensor& z) { return softmax_cross_entropy(z, labels).loss; }, logits,
                          kLayerGradTolerance));
}

void check_model(Rng& rng, std::vector<GradCheckEntry>& out) {
    const Architecture arch = Architecture::reduced();
    const CcnnModel base = model_init(rng, arch);
    CcnnModel model = base;
    // Non-trivial BN affine parameters so their gradients are exercised.
    for (auto& layer : model.bn) {
        layer.gamma = rng_uniform(rng, layer.gamma.shape(), 0.5, 1.5);
        layer.beta = rng_uniform(rng, layer.beta.shape(), -0.3, 0.3);
    }
    const Tensor x = rng_uniform(rng, {4, 3, 8, 8}, 0, 1);
    const std::vector<int> labels{0, 1, 2, 1};
    const std::uint64_t dropout_seed = rng.next_u64();

    auto loss_of = [&](const CcnnModel& m) {
        CcnnModel probe = m;
        Rng drop(dropout_seed);
        auto cache = probe.forward_train(x, drop);
        return softmax_cross_entropy(cache.logits, labels).loss;
    };

    CcnnModel working = model;
    Rng drop(dropout_seed);
    const auto cache = working.forward_train(x, drop);
    const auto loss = softmax_cross_entropy(cache.logits, labels);
    const auto grads = model.backward(cache, loss.grad_logits);

    const auto names = model.parameter_names();
    for (std::size_t p = 0; p < names.size(); ++p) {
        const Tensor& at = *model.parameters()[p];
        out.push_back(compare("model." + names[p], grads.tensors[p], [&](const Tensor& v) {
            CcnnModel probe = model;
            *probe.parameters()[p] = v;
            return loss_of(probe);
        }, at, kModelGradTolerance));
    }
}

}  // namespace

const std::vector<std::string>& gradcheck_modules() {
    static const std::vector<std::string> modules{"conv", "bn", "relu", "pool", "linear", "dropout", "softmax", "model"};
    return modules;
}

std::vector<GradCheckEntry> run_gradcheck(const std::string& module, std::uint64_t seed) {
    std::vector<GradCheckEntry> out;
    if (module == "all") {
        for (const auto& m : gradcheck_modules()) {
            auto part = run_gradcheck(m, seed);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }
    const auto& modules = gradcheck_modules();
    const auto slot = static_cast<std::uint64_t>(std::find(modules.begin(), modules.end(), module) - modules.begin());
    Rng rng(derive_seed(seed, {slot}));
    if (module == "conv") check_conv(rng, out);
    else if (module == "bn") check_bn(rng, out);
    else if (module == "relu") check_relu(rng, out);
    else if (module == "pool") check_pool(rng, out);
    else if (module == "linear") check_linear(rng, out);
    else if (module == "dropout") check_dropout(rng, out);
    else if (module == "softmax") check_softmax(rng, out);
    else if (module == "model") check_model(rng, out);
    else throw ParameterError("unknown gradcheck module '" + module + "'");
    return out;
}

}  // namespace ris::nn
