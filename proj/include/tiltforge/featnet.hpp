#ifndef TILTFORGE_FEATNET_HPP
#define TILTFORGE_FEATNET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tiltforge/core.hpp"

namespace tiltforge::featnet {

enum class LayerKind { conv3x3, relu, pool2 };

/// conv3x3: stride 1, zero padding 1, fixed 3x3 kernels.
/// pool2: 2x2 average pooling, floor halving.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int in_channels = 0;  // conv only
    int out_channels = 0; // conv only
    std::string name;
};

/// Scaled-down VGG-style topology:
/// conv(1-32)-relu-conv(32-32)-relu-pool-conv(32-64)-relu-conv(64-64)-relu-
/// pool-conv(64-128)-relu. Content layer relu3_1, style on every relu.
std::vector<LayerSpec> default_layer_spec();

/// C x H x W feature tensor; images and pixel gradients use channels == 1.
template <typename T>
struct FeatureMap {
    int channels = 0, height = 0, width = 0;
    std::vector<T> v;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w, T fill = T(0))
        : channels(c), height(h), width(w),
          v(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t size() const { return v.size(); }
    T* plane(int c) { return v.data() + static_cast<std::size_t>(c) * height * width; }
    const T* plane(int c) const { return v.data() + static_cast<std::size_t>(c) * height * width; }
    T& at(int c, int y, int x) { return v[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    T at(int c, int y, int x) const {
        return v[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

template <typename T>
struct ConvWeights {
    std::vector<T> kernel; // [out][in][ky][kx], 3x3
    std::vector<T> bias;   // [out]
};

template <typename T>
struct BasicFeatureNet {
    std::vector<LayerSpec> layers;
    std::vector<ConvWeights<T>> weights; // parallel to layers; empty unless conv
    std::string content_layer;
    std::vector<std::pair<std::string, double>> style_layers; // (name, weight)

    int layer_index(const std::string& name) const;
};

using FeatureNet = BasicFeatureNet<float>;

/// Forward pass with cached activations. `outputs[i]` holds layer i's output;
/// tensors that the backward pass and losses never touch keep their shape but
/// drop their payload.
template <typename T>
struct ForwardResult {
    FeatureMap<T> input; // as fed to the first layer (replicated if needed)
    std::vector<FeatureMap<T>> outputs;

    const FeatureMap<T>& last() const { return outputs.empty() ? input : outputs.back(); }
};

template <typename T>
ForwardResult<T> forward(const BasicFeatureNet<T>& net, const FeatureMap<T>& image);

/// Gram matrix G[i][j] = sum_p F_i[p] * F_j[p] / (C * h * w), flattened C x C.
template <typename T>
std::vector<T> gram(const FeatureMap<T>& features);

template <typename T>
struct Targets {
    FeatureMap<T> content;             // content-layer feature map
    std::vector<std::vector<T>> style; // one gram per style layer
};

template <typename T>
Targets<T> make_targets(const BasicFeatureNet<T>& net, const FeatureMap<T>& content_image,
                        const FeatureMap<T>& style_image);

template <typename T>
struct LossResult {
    double loss = 0.0;
    double content_loss = 0.0;
    double style_loss = 0.0;
    FeatureMap<T> image_grad; // 1 x H x W
};

/// loss = alpha * mean-squared content difference
///      + beta * sum_l w_l * mean-squared gram difference;
/// the gradient is the analytic d(loss)/d(pixel) via backpropagation.
template <typename T>
LossResult<T> style_content_loss(const BasicFeatureNet<T>& net, const FeatureMap<T>& image,
                                 const FeatureMap<T>& content_target,
                                 const std::vector<std::vector<T>>& style_gram_targets,
                                 double alpha, double beta);

/// Same losses without the backward pass.
template <typename T>
LossResult<T> evaluate_loss(const BasicFeatureNet<T>& net, const FeatureMap<T>& image,
                            const FeatureMap<T>& content_target,
                            const std::vector<std::vector<T>>& style_gram_targets, double alpha,
                            double beta);

/// He-style fan-in init: kernels ~ N(0, 2/(9*in)), zero biases.
template <typename T>
BasicFeatureNet<T> init_random(const std::vector<LayerSpec>& spec, std::uint64_t seed);

/// Little-endian "FNW1" weight file with trailing CRC32.
FeatureNet load_weights(const std::string& path);
void save_weights(const std::string& path, const FeatureNet& net);

template <typename To, typename From>
BasicFeatureNet<To> convert_net(const BasicFeatureNet<From>& net) {
    BasicFeatureNet<To> out;
    out.layers = net.layers;
    out.content_layer = net.content_layer;
    out.style_layers = net.style_layers;
    out.weights.resize(net.weights.size());
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        out.weights[i].kernel.assign(net.weights[i].kernel.begin(), net.weights[i].kernel.end());
        out.weights[i].bias.assign(net.weights[i].bias.begin(), net.weights[i].bias.end());
    }
    return out;
}

} // namespace tiltforge::featnet

#endif
