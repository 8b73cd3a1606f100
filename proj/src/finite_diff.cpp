#include "ris_sense/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "ris_sense/errors.hpp"

namespace ris {

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double step) {
    if (!(step > 0.0)) throw RangeError("finite difference step must be positive");
    Tensor probe = x;
    Tensor grad(x.shape(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double original = probe[k];
        probe[k] = original + step;
        const double plus = f(probe);
        probe[k] = original - step;
        const double minus = f(probe);
        probe[k] = original;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw NumericError("non-finite function value at element " + std::to_string(k));
        }
        grad[k] = (plus - minus) / (2.0 * step);
    }
    return grad;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
    require_same_shape(analytic, numeric, "max_relative_error");
    double diff = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
    const double scale = std::max({analytic.max_abs(), numeric.max_abs(), kRelativeErrorFloor});
    return diff / scale;
}

}  // namespace ris
