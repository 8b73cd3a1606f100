#include "ris_sense/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ris_sense/errors.hpp"
#include "ris_sense/parallel.hpp"

namespace ris::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

constexpr std::size_t kKernel = 3;
constexpr std::size_t kTaps = kKernel * kKernel;

void require_rank4(const Tensor& x, const char* context) {
    if (x.rank() != 4) throw ShapeError(std::string(context) + ": expected [N,C,H,W], got " + shape_string(x.shape()));
}

// Unrolls every 3x3 zero-padded window of one image into a [C*9, H*W] matrix.
void im2col(const double* image, std::size_t channels, std::size_t height, std::size_t width, double* col) {
    const std::size_t plane = height * width;
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = image + c * plane;
        for (std::size_t ky = 0; ky < kKernel; ++ky) {
            for (std::size_t kx = 0; kx < kKernel; ++kx) {
                double* row = col + ((c * kKernel + ky) * kKernel + kx) * plane;
                const long dy = static_cast<long>(ky) - 1;
                const long dx = static_cast<long>(kx) - 1;
                for (std::size_t y = 0; y < height; ++y) {
                    double* dst = row + y * width;
                    const long iy = static_cast<long>(y) + dy;
                    if (iy < 0 || iy >= static_cast<long>(height)) {
                        std::fill(dst, dst + width, 0.0);
                        continue;
                    }
                    const double* line = src + static_cast<std::size_t>(iy) * width;
                    for (std::size_t x = 0; x < width; ++x) {
                        const long ix = static_cast<long>(x) + dx;
                        dst[x] = (ix < 0 || ix >= static_cast<long>(width)) ? 0.0 : line[ix];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters-and-adds the column matrix back into an image.
void col2im(const double* col, std::size_t channels, std::size_t height, std::size_t width, double* image) {
    const std::size_t plane = height * width;
    std::fill(image, image + channels * plane, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double* dst = image + c * plane;
        for (std::size_t ky = 0; ky < kKernel; ++ky) {
            for (std::size_t kx = 0; kx < kKernel; ++kx) {
                const double* row = col + ((c * kKernel + ky) * kKernel + kx) * plane;
                const long dy = static_cast<long>(ky) - 1;
                const long dx = static_cast<long>(kx) - 1;
                for (std::size_t y = 0; y < height; ++y) {
                    const long iy = static_cast<long>(y) + dy;
                    if (iy < 0 || iy >= static_cast<long>(height)) continue;
                    double* line = dst + static_cast<std::size_t>(iy) * width;
                    const double* src = row + y * width;
                    for (std::size_t x = 0; x < width; ++x) {
                        const long ix = static_cast<long>(x) + dx;
                        if (ix >= 0 && ix < static_cast<long>(width)) line[ix] += src[x];
                    }
                }
            }
        }
    }
}

void check_conv_input(const Conv2D& layer, const Tensor& x) {
    require_rank4(x, "conv2d");
    if (layer.weight.rank() != 4 || layer.weight.dim(2) != kKernel || layer.weight.dim(3) != kKernel) {
        throw ShapeError("conv2d: kernel must be [out,in,3,3], got " + shape_string(layer.weight.shape()));
    }
    if (x.dim(1) != layer.in_channels()) {
        throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, layer expects " +
                         std::to_string(layer.in_channels()));
    }
}

}  // namespace

Conv2D Conv2D::zeros(std::size_t in_channels, std::size_t out_channels) {
    return {Tensor({out_channels, in_channels, kKernel, kKernel}, 0.0), Tensor({out_channels}, 0.0)};
}

Tensor conv2d_forward(const Conv2D& layer, const Tensor& x) {
    check_conv_input(layer, x);
    const std::size_t n = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
    const std::size_t out_ch = layer.out_channels(), plane = height * width;
    Tensor y({n, out_ch, height, width}, 0.0);
    ConstMatrixView w(layer.weight.raw(), out_ch, channels * kTaps);
    parallel_for(n, [&](std::size_t s) {
        RowMatrix col(channels * kTaps, plane);
        im2col(x.raw() + s * channels * plane, channels, height, width, col.data());
        MatrixView out(y.raw() + s * out_ch * plane, out_ch, plane);
        out.noalias() = w * col;
        for (std::size_t o = 0; o < out_ch; ++o) out.row(o).array() += layer.bias[o];
    });
    return y;
}

ConvGrads conv2d_backward(const Conv2D& layer, const Tensor& x, const Tensor& grad_out, bool need_grad_x) {
    check_conv_input(layer, x);
    const std::size_t n = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
    const std::size_t out_ch = layer.out_channels(), plane = height * width;
    if (grad_out.shape() != Shape{n, out_ch, height, width}) {
        throw ShapeError("conv2d_backward: grad_out " + shape_string(grad_out.shape()) + " does not match output");
    }
    ConvGrads grads;
    if (need_grad_x) grads.grad_x = Tensor(x.shape(), 0.0);
    ConstMatrixView w(layer.weight.raw(), out_ch, channels * kTaps);

    // Per-sample weight gradients are summed in sample order afterwards so
    // the result does not depend on the worker count.
    std::vector<RowMatrix> sample_grad_w(n);
    parallel_for(n, [&](std::size_t s) {
        RowMatrix col(channels * kTaps, plane);
        im2col(x.raw() + s * channels * plane, channels, height, width, col.data());
        ConstMatrixView g(grad_out.raw() + s * out_ch * plane, out_ch, plane);
        sample_grad_w[s].noalias() = g * col.transpose();
        if (need_grad_x) {
            col.noalias() = w.transpose() * g;
            col2im(col.data(), channels, height, width, grads.grad_x.raw() + s * channels * plane);
        }
    });

    grads.grad_w = Tensor(layer.weight.shape(), 0.0);
    MatrixView gw(grads.grad_w.raw(), out_ch, channels * kTaps);
    for (const auto& part : sample_grad_w) gw += part;

    grads.grad_b = Tensor({out_ch}, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < out_ch; ++o) {
            const double* g = grad_out.raw() + (s * out_ch + o) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += g[i];
            grads.grad_b[o] += acc;
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------

BatchNorm2D BatchNorm2D::identity(std::size_t channels) {
    return {Tensor({channels}, 1.0), Tensor({channels}, 0.0), Tensor({channels}, 0.0), Tensor({channels}, 1.0)};
}

namespace {

void check_bn_input(const BatchNorm2D& layer, const Tensor& x) {
    require_rank4(x, "batchnorm2d");
    if (x.dim(1) != layer.channels()) {
        throw ShapeError("batchnorm2d: input has " + std::to_string(x.dim(1)) + " channels, layer has " +
                         std::to_string(layer.channels()));
    }
}

}  // namespace

BatchNormOutput batchnorm2d_forward(BatchNorm2D& layer, const Tensor& x, Mode mode) {
    if (mode == Mode::Eval) return {batchnorm2d_infer(layer, x), BatchNormCache{}};
    check_bn_input(layer, x);
    const std::size_t n = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
    const std::size_t count = n * plane;
    if (count < 2) throw DegenerateBatchError("batchnorm2d: train mode needs more than one element per channel");

    BatchNormOutput out{Tensor(x.shape(), 0.0), BatchNormCache{Mode::Train, Tensor(x.shape(), 0.0), {}}};
    out.cache.inv_std.resize(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double* p = x.raw() + (s * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) mean += p[i];
        }
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double* p = x.raw() + (s * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
        }
        var /= static_cast<double>(count);
        const double inv_std = 1.0 / std::sqrt(var + layer.eps);
        out.cache.inv_std[c] = inv_std;
        const double gamma = layer.gamma[c], beta = layer.beta[c];
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xh = (x[base + i] - mean) * inv_std;
                out.cache.x_hat[base + i] = xh;
                out.y[base + i] = gamma * xh + beta;
            }
        }
        const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
        layer.running_mean[c] = (1.0 - layer.momentum) * layer.running_mean[c] + layer.momentum * mean;
        layer.running_var[c] = (1.0 - layer.momentum) * layer.running_var[c] + layer.momentum * unbiased;
    }
    return out;
}

Tensor batchnorm2d_infer(const BatchNorm2D& layer, const Tensor& x) {
    check_bn_input(layer, x);
    const std::size_t n = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor y(x.shape(), 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const double scale = layer.gamma[c] / std::sqrt(layer.running_var[c] + layer.eps);
        const double shift = layer.beta[c] - layer.running_mean[c] * scale;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) y[base + i] = x[base + i] * scale + shift;
        }
    }
    return y;
}

BatchNormGrads batchnorm2d_backward(const BatchNorm2D& layer, const BatchNormCache& cache, const Tensor& grad_out) {
    if (cache.mode != Mode::Train) throw ModeError("batchnorm2d_backward: cache was not produced in train mode");
    require_same_shape(cache.x_hat, grad_out, "batchnorm2d_backward");
    const std::size_t n = grad_out.dim(0), channels = grad_out.dim(1), plane = grad_out.dim(2) * grad_out.dim(3);
    if (channels != layer.channels() || cache.inv_std.size() != channels) {
        throw ShapeError("batchnorm2d_backward: channel count mismatch");
    }
    const double count = static_cast<double>(n * plane);
    BatchNormGrads grads{Tensor(grad_out.shape(), 0.0), Tensor({channels}, 0.0), Tensor({channels}, 0.0)};
    for (std::size_t c = 0; c < channels; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_g += grad_out[base + i];
                sum_gx += grad_out[base + i] * cache.x_hat[base + i];
            }
        }
        grads.grad_beta[c] = sum_g;
        grads.grad_gamma[c] = sum_gx;
        const double k = layer.gamma[c] * cache.inv_std[c] / count;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                grads.grad_x[base + i] =
                    k * (count * grad_out[base + i] - sum_g - cache.x_hat[base + i] * sum_gx);
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    require_same_shape(x, grad_out, "relu_backward");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(x[i] > 0.0)) g[i] = 0.0;
    }
    return g;
}

// ---------------------------------------------------------------------------

PoolOutput maxpool2d_forward(const Tensor& x) {
    require_rank4(x, "maxpool2d");
    const std::size_t n = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
    if (height % 2 != 0 || width % 2 != 0) {
        throw ShapeError("maxpool2d: spatial dims must be even, got " + shape_string(x.shape()));
    }
    if (x.size() > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("maxpool2d: input too large");
    const std::size_t oh = height / 2, ow = width / 2;
    PoolOutput out{Tensor({n, channels, oh, ow}, 0.0), PoolIndices{x.shape(), {}}};
    out.indices.argmax.resize(out.y.size());
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < n * channels; ++plane) {
        const std::size_t base = plane * height * width;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xo = 0; xo < ow; ++xo, ++o) {
                const std::size_t top_left = base + 2 * y * width + 2 * xo;
                const std::size_t window[4] = {top_left, top_left + 1, top_left + width, top_left + width + 1};
                std::size_t best = window[0];
                for (std::size_t k = 1; k < 4; ++k) {
                    if (x[window[k]] > x[best]) best = window[k];
                }
                out.y[o] = x[best];
                out.indices.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return out;
}

Tensor maxpool2d_backward(const PoolIndices& indices, const Tensor& grad_out) {
    if (grad_out.size() != indices.argmax.size()) {
        throw CorruptCacheError("maxpool2d_backward: grad_out size does not match cached indices");
    }
    Tensor grad_x(indices.input_shape, 0.0);
    for (std::size_t o = 0; o < grad_out.size(); ++o) {
        const std::size_t target = indices.argmax[o];
        if (target >= grad_x.size()) throw CorruptCacheError("maxpool2d_backward: argmax index out of range");
        grad_x[target] += grad_out[o];
    }
    return grad_x;
}

// ---------------------------------------------------------------------------

Tensor flatten(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("flatten: expected a batch dimension");
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor unflatten(const Tensor& x, const Shape& shape) { return x.reshaped(shape); }

// ---------------------------------------------------------------------------

Linear Linear::zeros(std::size_t in_features, std::size_t out_features) {
    return {Tensor({out_features, in_features}, 0.0), Tensor({out_features}, 0.0)};
}

Tensor linear_forward(const Linear& layer, const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != layer.in_features()) {
        throw ShapeError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(layer.weight.shape()));
    }
    const std::size_t n = x.dim(0), in = layer.in_features(), out = layer.out_features();
    Tensor y({n, out}, 0.0);
    ConstMatrixView xm(x.raw(), n, in);
    ConstMatrixView w(layer.weight.raw(), out, in);
    MatrixView ym(y.raw(), n, out);
    ym.noalias() = xm * w.transpose();
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < out; ++o) ym(s, o) += layer.bias[o];
    }
    return y;
}

LinearGrads linear_backward(const Linear& layer, const Tensor& x, const Tensor& grad_out) {
    const std::size_t in = layer.in_features(), out = layer.out_features();
    if (x.rank() != 2 || x.dim(1) != in) throw ShapeError("linear_backward: input does not match layer");
    const std::size_t n = x.dim(0);
    if (grad_out.shape() != Shape{n, out}) throw ShapeError("linear_backward: grad_out does not match output");
    LinearGrads grads{Tensor(x.shape(), 0.0), Tensor(layer.weight.shape(), 0.0), Tensor({out}, 0.0)};
    ConstMatrixView xm(x.raw(), n, in);
    ConstMatrixView w(layer.weight.raw(), out, in);
    ConstMatrixView g(grad_out.raw(), n, out);
    MatrixView(grads.grad_x.raw(), n, in).noalias() = g * w;
    MatrixView(grads.grad_w.raw(), out, in).noalias() = g.transpose() * xm;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < out; ++o) grads.grad_b[o] += g(s, o);
    }
    return grads;
}

// ---------------------------------------------------------------------------

DropoutOutput dropout_forward(const Dropout& layer, const Tensor& x, Rng& rng) {
    if (!(layer.p >= 0.0 && layer.p < 1.0)) {
        throw ParameterError("dropout: probability must lie in [0, 1), got " + std::to_string(layer.p));
    }
    if (layer.mode == Mode::Eval) return {x, Tensor(x.shape(), 1.0)};
    const double keep_scale = 1.0 / (1.0 - layer.p);
    DropoutOutput out{Tensor(x.shape(), 0.0), Tensor(x.shape(), 0.0)};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = (layer.p > 0.0 && rng.uniform() < layer.p) ? 0.0 : keep_scale;
        out.mask[i] = m;
        out.y[i] = x[i] * m;
    }
    return out;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out) {
    require_same_shape(mask, grad_out, "dropout_backward");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
    return g;
}

// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("softmax: expected [N,K] logits");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    Tensor probs(logits.shape(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        const double* row = logits.raw() + s * k;
        double* out = probs.raw() + s * k;
        const double peak = *std::max_element(row, row + k);
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += out[j] = std::exp(row[j] - peak);
        for (std::size_t j = 0; j < k; ++j) out[j] /= total;
    }
    return probs;
}

namespace {

void check_labels(std::span<const int> labels, std::size_t n, std::size_t k) {
    if (labels.size() != n) throw LabelError("expected " + std::to_string(n) + " labels, got " + std::to_string(labels.size()));
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw LabelError("label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
        }
    }
}

Tensor onehot_gradient(const Tensor& probs, std::span<const int> labels) {
    const std::size_t n = probs.dim(0), k = probs.dim(1);
    Tensor grad = probs;
    for (std::size_t s = 0; s < n; ++s) grad[s * k + static_cast<std::size_t>(labels[s])] -= 1.0;
    for (auto& v : grad.data()) v /= static_cast<double>(n);
    return grad;
}

}  // namespace

LossOutput softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: expected [N,K] logits");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    check_labels(labels, n, k);
    LossOutput out;
    out.probs = softmax(logits);
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double* row = logits.raw() + s * k;
        const double peak = *std::max_element(row, row + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - peak);
        total += peak + std::log(sum) - row[labels[s]];
    }
    out.loss = total / static_cast<double>(n);
    out.grad_logits = onehot_gradient(out.probs, labels);
    return out;
}

LossOutput cross_entropy_loss(const Tensor& probs, std::span<const int> labels) {
    if (probs.rank() != 2) throw ShapeError("cross_entropy_loss: expected [N,K] probabilities");
    const std::size_t n = probs.dim(0), k = probs.dim(1);
    check_labels(labels, n, k);
    LossOutput out;
    out.probs = probs;
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double p = probs[s * k + static_cast<std::size_t>(labels[s])];
        total -= std::log(std::max(p, std::numeric_limits<double>::min()));
    }
    out.loss = total / static_cast<double>(n);
    out.grad_logits = onehot_gradient(probs, labels);
    return out;
}

}  // namespace ris::nn
