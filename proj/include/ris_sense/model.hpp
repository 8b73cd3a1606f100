#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ris_sense/layers.hpp"

namespace ris::nn {

/// Class indices used everywhere: manifests, confusion matrices, checkpoints.
enum class NlosClass : int { Los = 0, Nlos100 = 1, Nlos75 = 2 };
inline constexpr int kNumClasses = 3;
const char* class_name(int label);

/// Three conv blocks (conv3x3 -> BN -> ReLU -> maxpool2) followed by
/// fc -> ReLU -> dropout -> fc -> softmax.
struct Architecture {
    std::size_t input_channels = 3;
    std::size_t input_size = 224;
    std::array<std::size_t, 3> filters{32, 64, 128};
    std::size_t hidden = 256;
    std::size_t classes = 3;
    double dropout_p = 0.5;

    /// The full-size network: 3x224x224 in, 100352 flattened features.
    static Architecture standard() { return {}; }
    /// Scaled-down clone (8x8 input, 2/2/2 filters) for gradient checks.
    static Architecture reduced() { return {3, 8, {2, 2, 2}, 4, 3, 0.5}; }

    std::size_t pooled_size() const { return input_size / 8; }
    std::size_t flatten_features() const { return filters[2] * pooled_size() * pooled_size(); }
    void validate() const;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Intermediate state of one conv block kept for the backward pass.
struct BlockCache {
    Tensor input;
    BatchNormCache bn;
    Tensor pre_activation;  // BN output, the ReLU input
    PoolIndices pool;
};

struct ForwardCache {
    Mode mode = Mode::Eval;
    std::array<BlockCache, 3> blocks;
    Tensor features;        // flattened block-3 output
    Tensor hidden_pre;      // fc1 output before ReLU
    Tensor dropout_mask;
    Tensor dropout_out;     // fc2 input
    Tensor logits;
    Tensor probs;
    std::vector<Shape> block_output_shapes;
};

/// Gradients in the same order as CcnnModel::parameters().
struct Gradients {
    std::vector<Tensor> tensors;
};

class CcnnModel {
public:
    explicit CcnnModel(Architecture arch = Architecture::standard());

    const Architecture& architecture() const { return arch_; }

    Mode mode() const { return mode_; }
    void set_mode(Mode mode);

    /// Forward pass honouring the current mode. Train mode draws dropout
    /// masks from rng and updates BatchNorm running statistics.
    Tensor forward(const Tensor& x, Rng& rng);

    /// Eval-mode forward: running statistics, no dropout, no mutation.
    Tensor predict(const Tensor& x) const;
    /// Eval-mode forward that also reports the output shape of each stage:
    /// three pooled blocks, flatten, fc1, fc2.
    Tensor predict_traced(const Tensor& x, std::vector<Shape>& stage_shapes) const;

    ForwardCache forward_train(const Tensor& x, Rng& rng);
    Gradients backward(const ForwardCache& cache, const Tensor& grad_logits) const;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;
    /// BatchNorm running statistics, mean then variance per block.
    std::vector<Tensor*> buffers();
    std::vector<const Tensor*> buffers() const;
    std::vector<std::string> buffer_names() const;

    std::size_t parameter_count() const;
    std::size_t buffer_count() const;

    Conv2D conv[3];
    BatchNorm2D bn[3];
    Linear fc1;
    Linear fc2;
    Dropout dropout;

private:
    void check_input(const Tensor& x) const;

    Architecture arch_;
    Mode mode_ = Mode::Train;
};

/// Glorot-uniform weights, zero biases, BN gamma 1 / beta 0, running mean 0
/// and running variance 1.
CcnnModel model_init(Rng& rng, Architecture arch = Architecture::standard());

/// sqrt(6 / (fan_in + fan_out))
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

/// Parameter count of an architecture computed from its dimensions alone.
std::size_t count_parameters(const Architecture& arch);

}  // namespace ris::nn
