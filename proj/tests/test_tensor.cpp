#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ris_sense/errors.hpp"
#include "ris_sense/finite_diff.hpp"
#include "ris_sense/rng.hpp"
#include "ris_sense/tensor.hpp"

using namespace ris;

TEST_CASE("tensor_new fills every element") {
    auto z = tensor_new({2, 2}, 0.0);
    CHECK(z.shape() == Shape{2, 2});
    CHECK(z.data().size() == 4);
    for (double v : z.data()) CHECK(v == 0.0);

    auto big = tensor_new({3, 224, 224}, 1.0);
    CHECK(big.size() == 150528);
    CHECK(big.sum() == 150528.0);

    auto one = tensor_new({1}, 5.0);
    CHECK(one.size() == 1);
    CHECK(one[0] == 5.0);
}

TEST_CASE("invalid shapes are rejected") {
    CHECK_THROWS_AS(tensor_new({}, 0.0), ShapeError);
    CHECK_THROWS_AS(tensor_new({3, 0}, 0.0), ShapeError);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(tensor_new({2, 3}, 0.0).reshaped({4}), ShapeError);
}

TEST_CASE("row-major index round trip") {
    const Shape shape{2, 3, 4, 5};
    for (std::size_t off = 0; off < shape_size(shape); ++off) {
        auto idx = unflatten_index(shape, off);
        REQUIRE(flatten_index(shape, idx) == off);
    }
    Tensor t({2, 3}, 0.0);
    t.at({1, 2}) = 7.0;
    CHECK(t[5] == 7.0);
}

TEST_CASE("rng golden vectors") {
    // Reference values from an independent implementation of the documented
    // splitmix64 + xoshiro256** recurrence.
    Rng rng(42);
    CHECK(rng.next_u64() == 0x15780b2e0c2ec716ULL);
    CHECK(rng.next_u64() == 0x6104d9866d113a7eULL);
    CHECK(rng.next_u64() == 0xae17533239e499a1ULL);
    CHECK(rng.next_u64() == 0xecb8ad4703b360a1ULL);

    Rng zero(0);
    CHECK(zero.next_u64() == 0x99ec5f36cb75f2b4ULL);
    CHECK(zero.next_u64() == 0xbf6e1f784956452aULL);
    CHECK(zero.next_u64() == 0x1a5f849d4933e6e0ULL);

    Rng u(42);
    auto t = rng_uniform(u, {4}, 0.0, 1.0);
    CHECK(t[0] == 0.08386297105988216);
    CHECK(t[1] == 0.3789802506626686);
    CHECK(t[2] == 0.6800434110281394);
    CHECK(t[3] == 0.9246929453253876);
}

TEST_CASE("rng_uniform range and reproducibility") {
    Rng rng(9);
    const double eps = 1e-12;
    auto t = rng_uniform(rng, {2}, 3.0, 3.0 + eps);
    for (double v : t.data()) {
        CHECK(v >= 3.0);
        CHECK(v < 3.0 + eps);
    }
    CHECK_THROWS_AS(rng_uniform(rng, {2}, 1.0, 1.0), RangeError);
    CHECK_THROWS_AS(rng_uniform(rng, {2}, 2.0, 1.0), RangeError);

    Rng a(123), b(123);
    CHECK(rng_uniform(a, {16}, -1.0, 1.0) == rng_uniform(b, {16}, -1.0, 1.0));

    Rng c(77), d(77);
    for (int i = 0; i < 1000; ++i) REQUIRE(c.next_u64() == d.next_u64());
}

TEST_CASE("derived seeds separate streams") {
    CHECK(derive_seed(1, {0, 0}) != derive_seed(1, {0, 1}));
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(2, {2, 3}));
}

TEST_CASE("shuffled indices are a permutation") {
    Rng rng(5);
    auto idx = shuffled_indices(rng, 50);
    std::vector<bool> seen(50, false);
    for (auto i : idx) seen.at(i) = true;
    for (bool s : seen) CHECK(s);
}

TEST_CASE("finite_diff_grad on analytic functions") {
    auto sq = [](const Tensor& x) {
        double s = 0.0;
        for (double v : x.data()) s += v * v;
        return s;
    };
    auto g = finite_diff_grad(sq, Tensor::from_data({2}, {1.0, 2.0}), 1e-5);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));

    auto linear = [](const Tensor& x) { return x.sum(); };
    Rng rng(3);
    auto x = rng_uniform(rng, {3, 4}, -2.0, 2.0);
    auto ones = finite_diff_grad(linear, x, 1e-4);
    for (double v : ones.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    auto constant = [](const Tensor&) { return 3.25; };
    auto zero = finite_diff_grad(constant, x, 1e-3);
    for (double v : zero.data()) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("finite_diff_grad reports non-finite evaluations") {
    auto bad = [](const Tensor& x) { return std::log(x[0]); };
    CHECK_THROWS_AS(finite_diff_grad(bad, Tensor::from_data({1}, {0.0}), 1e-3), NumericError);
    CHECK_THROWS_AS(finite_diff_grad(bad, Tensor::from_data({1}, {1.0}), 0.0), RangeError);
}

TEST_CASE("max_relative_error") {
    auto a = Tensor::from_data({2}, {1.0, 2.0});
    auto b = Tensor::from_data({2}, {1.0, 2.002});
    CHECK(max_relative_error(a, b) == doctest::Approx(0.002 / 2.002));
    CHECK(max_relative_error(Tensor({3}, 0.0), Tensor({3}, 0.0)) == 0.0);
    // Tiny gradients fall back to an absolute comparison.
    CHECK(max_relative_error(Tensor({1}, 1e-12), Tensor({1}, 3e-12)) == doctest::Approx(2e-9));
}
