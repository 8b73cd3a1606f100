#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ris_sense/rng.hpp"
#include "ris_sense/tensor.hpp"

namespace ris::nn {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Convolution: 3x3 kernel, stride 1, zero padding 1 (spatial size preserved).
// Implemented as cross-correlation, i.e. without flipping the kernel.

struct Conv2D {
    Tensor weight;  // [out, in, 3, 3]
    Tensor bias;    // [out]

    static Conv2D zeros(std::size_t in_channels, std::size_t out_channels);
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t out_channels() const { return weight.dim(0); }
};

struct ConvGrads {
    Tensor grad_x;  // empty when not requested
    Tensor grad_w;
    Tensor grad_b;
};

Tensor conv2d_forward(const Conv2D& layer, const Tensor& x);
ConvGrads conv2d_backward(const Conv2D& layer, const Tensor& x, const Tensor& grad_out, bool need_grad_x = true);

// ---------------------------------------------------------------------------
// Batch normalization over (N, H, W) per channel.
//
// Train mode normalizes with the biased batch variance and folds the
// unbiased variance into the running estimate:
//   running = (1 - momentum) * running + momentum * batch

struct BatchNorm2D {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    static BatchNorm2D identity(std::size_t channels);
    std::size_t channels() const { return gamma.size(); }
};

struct BatchNormCache {
    Mode mode = Mode::Eval;
    Tensor x_hat;
    std::vector<double> inv_std;
};

struct BatchNormOutput {
    Tensor y;
    BatchNormCache cache;
};

struct BatchNormGrads {
    Tensor grad_x;
    Tensor grad_gamma;
    Tensor grad_beta;
};

/// Train mode mutates the layer's running statistics.
BatchNormOutput batchnorm2d_forward(BatchNorm2D& layer, const Tensor& x, Mode mode);
/// Eval-mode normalization; never touches the running statistics.
Tensor batchnorm2d_infer(const BatchNorm2D& layer, const Tensor& x);
BatchNormGrads batchnorm2d_backward(const BatchNorm2D& layer, const BatchNormCache& cache, const Tensor& grad_out);

// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x);
/// Gradient is zero where x <= 0.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// 2x2 max pooling with stride 2. Ties resolve to the first element of the
// window in row-major order.

struct PoolIndices {
    Shape input_shape;
    std::vector<std::uint32_t> argmax;  // flat input offset per output element
};

struct PoolOutput {
    Tensor y;
    PoolIndices indices;
};

PoolOutput maxpool2d_forward(const Tensor& x);
Tensor maxpool2d_backward(const PoolIndices& indices, const Tensor& grad_out);

// ---------------------------------------------------------------------------

/// [N, C, H, W] -> [N, C*H*W], row-major.
Tensor flatten(const Tensor& x);
Tensor unflatten(const Tensor& x, const Shape& shape);

// ---------------------------------------------------------------------------

struct Linear {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]

    static Linear zeros(std::size_t in_features, std::size_t out_features);
    std::size_t in_features() const { return weight.dim(1); }
    std::size_t out_features() const { return weight.dim(0); }
};

struct LinearGrads {
    Tensor grad_x;
    Tensor grad_w;
    Tensor grad_b;
};

Tensor linear_forward(const Linear& layer, const Tensor& x);
LinearGrads linear_backward(const Linear& layer, const Tensor& x, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1 / (1 - p) so eval mode is the
// identity.

struct Dropout {
    double p = 0.5;
    Mode mode = Mode::Train;
};

struct DropoutOutput {
    Tensor y;
    Tensor mask;  // 0 or 1 / (1 - p) per element
};

DropoutOutput dropout_forward(const Dropout& layer, const Tensor& x, Rng& rng);
Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out);

// ---------------------------------------------------------------------------

/// Row-wise softmax of [N, K] logits with max subtraction.
Tensor softmax(const Tensor& logits);

struct LossOutput {
    double loss = 0.0;
    Tensor probs;
    Tensor grad_logits;  // (probs - onehot) / N
};

/// Mean negative log-likelihood of softmax(logits), computed via log-sum-exp.
LossOutput softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Cross-entropy from probabilities; grad_logits assumes probs = softmax(logits).
LossOutput cross_entropy_loss(const Tensor& probs, std::span<const int> labels);

}  // namespace ris::nn
