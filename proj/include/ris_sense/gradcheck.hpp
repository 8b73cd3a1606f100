#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ris::nn {

/// One analytic-vs-finite-difference comparison.
struct GradCheckEntry {
    std::string name;        // e.g. "conv.grad_w"
    double max_rel_error = 0.0;
    double tolerance = 0.0;

    bool passed() const { return max_rel_error <= tolerance; }
};

inline constexpr double kLayerGradTolerance = 1e-6;
inline constexpr double kModelGradTolerance = 1e-5;
inline constexpr double kGradCheckStep = 1e-5;

/// Module names accepted by run_gradcheck.
const std::vector<std::string>& gradcheck_modules();

/// Checks one module ("conv", "bn", "relu", "pool", "linear", "dropout",
/// "softmax", "model") or "all". Inputs are random with the given seed;
/// ReLU inputs keep |x| >= 1e-3 and pool windows keep their entries at
/// least 1e-3 apart so the step never crosses a kink or tie.
std::vector<GradCheckEntry> run_gradcheck(const std::string& module, std::uint64_t seed = 2024);

}  // namespace ris::nn
