#include "ris_sense/model.hpp"

#include <cmath>

#include "ris_sense/errors.hpp"

namespace ris::nn {

const char* class_name(int label) {
    switch (label) {
        case 0: return "LOS";
        case 1: return "NLOS-1.00m";
        case 2: return "NLOS-0.75m";
        default: return "unknown";
    }
}

void Architecture::validate() const {
    if (input_size == 0 || input_size % 8 != 0) throw ShapeError("architecture: input size must be a multiple of 8");
    if (input_channels == 0 || hidden == 0 || classes == 0) throw ShapeError("architecture: zero-sized layer");
    for (auto f : filters) {
        if (f == 0) throw ShapeError("architecture: zero filter count");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParameterError("architecture: dropout p must lie in [0, 1)");
}

CcnnModel::CcnnModel(Architecture arch) : arch_(arch) {
    arch_.validate();
    std::size_t in = arch_.input_channels;
    for (std::size_t b = 0; b < 3; ++b) {
        conv[b] = Conv2D::zeros(in, arch_.filters[b]);
        bn[b] = BatchNorm2D::identity(arch_.filters[b]);
        in = arch_.filters[b];
    }
    fc1 = Linear::zeros(arch_.flatten_features(), arch_.hidden);
    fc2 = Linear::zeros(arch_.hidden, arch_.classes);
    dropout = Dropout{arch_.dropout_p, Mode::Train};
}

void CcnnModel::set_mode(Mode mode) {
    mode_ = mode;
    dropout.mode = mode;
}

void CcnnModel::check_input(const Tensor& x) const {
    const Shape expected_tail{arch_.input_channels, arch_.input_size, arch_.input_size};
    if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != expected_tail) {
        throw ShapeError("model input must be [N," + std::to_string(arch_.input_channels) + "," +
                         std::to_string(arch_.input_size) + "," + std::to_string(arch_.input_size) + "], got " +
                         shape_string(x.shape()));
    }
}

Tensor CcnnModel::forward(const Tensor& x, Rng& rng) {
    if (mode_ == Mode::Eval) return predict(x);
    return forward_train(x, rng).probs;
}

Tensor CcnnModel::predict(const Tensor& x) const {
    std::vector<Shape> ignored;
    return predict_traced(x, ignored);
}

Tensor CcnnModel::predict_traced(const Tensor& x, std::vector<Shape>& stage_shapes) const {
    check_input(x);
    stage_shapes.clear();
    Tensor h = x;
    for (std::size_t b = 0; b < 3; ++b) {
        h = maxpool2d_forward(relu(batchnorm2d_infer(bn[b], conv2d_forward(conv[b], h)))).y;
        stage_shapes.push_back(h.shape());
    }
    h = flatten(h);
    stage_shapes.push_back(h.shape());
    h = relu(linear_forward(fc1, h));
    stage_shapes.push_back(h.shape());
    h = linear_forward(fc2, h);
    stage_shapes.push_back(h.shape());
    return softmax(h);
}

ForwardCache CcnnModel::forward_train(const Tensor& x, Rng& rng) {
    check_input(x);
    ForwardCache cache;
    cache.mode = Mode::Train;
    Tensor h = x;
    for (std::size_t b = 0; b < 3; ++b) {
        BlockCache& block = cache.blocks[b];
        block.input = std::move(h);
        auto bn_out = batchnorm2d_forward(bn[b], conv2d_forward(conv[b], block.input), Mode::Train);
        block.bn = std::move(bn_out.cache);
        block.pre_activation = std::move(bn_out.y);
        auto pooled = maxpool2d_forward(relu(block.pre_activation));
        block.pool = std::move(pooled.indices);
        h = std::move(pooled.y);
        cache.block_output_shapes.push_back(h.shape());
    }
    cache.features = flatten(h);
    cache.hidden_pre = linear_forward(fc1, cache.features);
    Dropout train_dropout{dropout.p, Mode::Train};
    auto dropped = dropout_forward(train_dropout, relu(cache.hidden_pre), rng);
    cache.dropout_mask = std::move(dropped.mask);
    cache.dropout_out = std::move(dropped.y);
    cache.logits = linear_forward(fc2, cache.dropout_out);
    cache.probs = softmax(cache.logits);
    return cache;
}

Gradients CcnnModel::backward(const ForwardCache& cache, const Tensor& grad_logits) const {
    if (cache.mode != Mode::Train) throw ModeError("backward requires a train-mode forward cache");
    require_same_shape(cache.logits, grad_logits, "model backward");
    Gradients out;
    out.tensors.resize(16);

    auto fc2_grads = linear_backward(fc2, cache.dropout_out, grad_logits);
    out.tensors[14] = std::move(fc2_grads.grad_w);
    out.tensors[15] = std::move(fc2_grads.grad_b);
    Tensor g = relu_backward(cache.hidden_pre, dropout_backward(cache.dropout_mask, fc2_grads.grad_x));
    auto fc1_grads = linear_backward(fc1, cache.features, g);
    out.tensors[12] = std::move(fc1_grads.grad_w);
    out.tensors[13] = std::move(fc1_grads.grad_b);
    g = std::move(fc1_grads.grad_x).reshaped(cache.block_output_shapes[2]);

    for (std::size_t b = 3; b-- > 0;) {
        const BlockCache& block = cache.blocks[b];
        g = relu_backward(block.pre_activation, maxpool2d_backward(block.pool, g));
        auto bn_grads = batchnorm2d_backward(bn[b], block.bn, g);
        out.tensors[4 * b + 2] = std::move(bn_grads.grad_gamma);
        out.tensors[4 * b + 3] = std::move(bn_grads.grad_beta);
        auto conv_grads = conv2d_backward(conv[b], block.input, bn_grads.grad_x, b > 0);
        out.tensors[4 * b] = std::move(conv_grads.grad_w);
        out.tensors[4 * b + 1] = std::move(conv_grads.grad_b);
        g = std::move(conv_grads.grad_x);
    }
    return out;
}

std::vector<Tensor*> CcnnModel::parameters() {
    std::vector<Tensor*> p;
    for (std::size_t b = 0; b < 3; ++b) {
        p.insert(p.end(), {&conv[b].weight, &conv[b].bias, &bn[b].gamma, &bn[b].beta});
    }
    p.insert(p.end(), {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias});
    return p;
}

std::vector<const Tensor*> CcnnModel::parameters() const {
    auto mutable_params = const_cast<CcnnModel*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

std::vector<std::string> CcnnModel::parameter_names() const {
    std::vector<std::string> names;
    for (int b = 1; b <= 3; ++b) {
        const auto i = std::to_string(b);
        names.insert(names.end(), {"conv" + i + ".weight", "conv" + i + ".bias", "bn" + i + ".gamma", "bn" + i + ".beta"});
    }
    names.insert(names.end(), {"fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"});
    return names;
}

std::vector<Tensor*> CcnnModel::buffers() {
    std::vector<Tensor*> p;
    for (auto& layer : bn) p.insert(p.end(), {&layer.running_mean, &layer.running_var});
    return p;
}

std::vector<const Tensor*> CcnnModel::buffers() const {
    auto mutable_buffers = const_cast<CcnnModel*>(this)->buffers();
    return {mutable_buffers.begin(), mutable_buffers.end()};
}

std::vector<std::string> CcnnModel::buffer_names() const {
    std::vector<std::string> names;
    for (int b = 1; b <= 3; ++b) {
        const auto i = std::to_string(b);
        names.insert(names.end(), {"bn" + i + ".running_mean", "bn" + i + ".running_var"});
    }
    return names;
}

std::size_t CcnnModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : parameters()) n += t->size();
    return n;
}

std::size_t CcnnModel::buffer_count() const {
    std::size_t n = 0;
    for (const auto* t : buffers()) n += t->size();
    return n;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::size_t count_parameters(const Architecture& arch) {
    std::size_t total = 0, in = arch.input_channels;
    for (auto f : arch.filters) {
        total += f * in * 9 + f + 2 * f;
        in = f;
    }
    total += arch.hidden * arch.flatten_features() + arch.hidden;
    total += arch.classes * arch.hidden + arch.classes;
    return total;
}

CcnnModel model_init(Rng& rng, Architecture arch) {
    CcnnModel model(arch);
    auto fill_uniform = [&rng](Tensor& t, double bound) {
        for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    };
    for (auto& conv : model.conv) {
        const std::size_t out = conv.out_channels(), in = conv.in_channels();
        fill_uniform(conv.weight, glorot_bound(in * 9, out * 9));
    }
    fill_uniform(model.fc1.weight, glorot_bound(model.fc1.in_features(), model.fc1.out_features()));
    fill_uniform(model.fc2.weight, glorot_bound(model.fc2.in_features(), model.fc2.out_features()));
    return model;
}

}  // namespace ris::nn
