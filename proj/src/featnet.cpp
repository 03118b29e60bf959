#include "tiltforge/featnet.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tiltforge/rng.hpp"

namespace tiltforge::featnet {

std::vector<LayerSpec> default_layer_spec() {
    std::vector<LayerSpec> spec;
    auto conv = [&](int in, int out, const char* name) {
        spec.push_back({LayerKind::conv3x3, in, out, name});
    };
    auto relu = [&](const char* name) { spec.push_back({LayerKind::relu, 0, 0, name}); };
    auto pool = [&](const char* name) { spec.push_back({LayerKind::pool2, 0, 0, name}); };
    conv(1, 32, "conv1_1");
    relu("relu1_1");
    conv(32, 32, "conv1_2");
    relu("relu1_2");
    pool("pool1");
    conv(32, 64, "conv2_1");
    relu("relu2_1");
    conv(64, 64, "conv2_2");
    relu("relu2_2");
    pool("pool2");
    conv(64, 128, "conv3_1");
    relu("relu3_1");
    return spec;
}

template <typename T>
int BasicFeatureNet<T>::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].name == name) return static_cast<int>(i);
    return -1;
}

namespace {

void check_layer_chain(const std::vector<LayerSpec>& layers) {
    int prev_out = -1; // -1: no conv seen yet
    for (const auto& l : layers) {
        if (l.kind != LayerKind::conv3x3) continue;
        if (l.in_channels < 1 || l.out_channels < 1)
            throw_validation(Errc::inconsistent_channels, "conv channel counts must be positive");
        if (prev_out >= 0 && l.in_channels != prev_out) {
            std::ostringstream os;
            os << "conv layer '" << l.name << "' expects " << l.in_channels
               << " input channels but the chain provides " << prev_out;
            throw_validation(Errc::inconsistent_channels, os.str());
        }
        prev_out = l.out_channels;
    }
}

template <typename T>
void conv3x3_forward(const LayerSpec& spec, const ConvWeights<T>& w, const FeatureMap<T>& in,
                     FeatureMap<T>& out) {
    const int ic_n = spec.in_channels;
    const int oc_n = spec.out_channels;
    const int h = in.height;
    const int wd = in.width;
    out = FeatureMap<T>(oc_n, h, wd);

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < oc_n; ++oc) {
        T* op = out.plane(oc);
        const T* kbase = w.kernel.data() + static_cast<std::size_t>(oc) * ic_n * 9;
        const double bias = static_cast<double>(w.bias[oc]);
        for (int y = 0; y < h; ++y) {
            const bool y_in = y > 0 && y < h - 1;
            for (int x = 0; x < wd; ++x) {
                double acc = bias;
                const T* k = kbase;
                if (y_in && x > 0 && x < wd - 1) {
                    for (int ic = 0; ic < ic_n; ++ic, k += 9) {
                        const T* p = in.plane(ic) + static_cast<std::size_t>(y) * wd + x;
                        acc += static_cast<double>(k[0]) * p[-wd - 1] +
                               static_cast<double>(k[1]) * p[-wd] +
                               static_cast<double>(k[2]) * p[-wd + 1] +
                               static_cast<double>(k[3]) * p[-1] +
                               static_cast<double>(k[4]) * p[0] +
                               static_cast<double>(k[5]) * p[1] +
                               static_cast<double>(k[6]) * p[wd - 1] +
                               static_cast<double>(k[7]) * p[wd] +
                               static_cast<double>(k[8]) * p[wd + 1];
                    }
                } else {
                    for (int ic = 0; ic < ic_n; ++ic, k += 9) {
                        const T* plane = in.plane(ic);
                        for (int ky = 0; ky < 3; ++ky) {
                            const int yy = y + ky - 1;
                            if (yy < 0 || yy >= h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int xx = x + kx - 1;
                                if (xx < 0 || xx >= wd) continue;
                                acc += static_cast<double>(k[ky * 3 + kx]) *
                                       plane[static_cast<std::size_t>(yy) * wd + xx];
                            }
                        }
                    }
                }
                op[static_cast<std::size_t>(y) * wd + x] = static_cast<T>(acc);
            }
        }
    }
}

// Gradient w.r.t. the conv input: correlation of the upstream gradient with
// the 180-degree-rotated kernels.
template <typename T>
void conv3x3_backward(const LayerSpec& spec, const ConvWeights<T>& w, const FeatureMap<T>& g_out,
                      FeatureMap<T>& g_in) {
    const int ic_n = spec.in_channels;
    const int oc_n = spec.out_channels;
    const int h = g_out.height;
    const int wd = g_out.width;
    g_in = FeatureMap<T>(ic_n, h, wd);

#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < ic_n; ++ic) {
        T* gp = g_in.plane(ic);
        for (int y = 0; y < h; ++y) {
            const bool y_in = y > 0 && y < h - 1;
            for (int x = 0; x < wd; ++x) {
                double acc = 0.0;
                if (y_in && x > 0 && x < wd - 1) {
                    for (int oc = 0; oc < oc_n; ++oc) {
                        const T* k =
                            w.kernel.data() + (static_cast<std::size_t>(oc) * ic_n + ic) * 9;
                        const T* g = g_out.plane(oc) + static_cast<std::size_t>(y) * wd + x;
                        acc += static_cast<double>(k[0]) * g[wd + 1] +
                               static_cast<double>(k[1]) * g[wd] +
                               static_cast<double>(k[2]) * g[wd - 1] +
                               static_cast<double>(k[3]) * g[1] +
                               static_cast<double>(k[4]) * g[0] +
                               static_cast<double>(k[5]) * g[-1] +
                               static_cast<double>(k[6]) * g[-wd + 1] +
                               static_cast<double>(k[7]) * g[-wd] +
                               static_cast<double>(k[8]) * g[-wd - 1];
                    }
                } else {
                    for (int oc = 0; oc < oc_n; ++oc) {
                        const T* k =
                            w.kernel.data() + (static_cast<std::size_t>(oc) * ic_n + ic) * 9;
                        const T* plane = g_out.plane(oc);
                        for (int ky = 0; ky < 3; ++ky) {
                            const int yy = y + 1 - ky;
                            if (yy < 0 || yy >= h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int xx = x + 1 - kx;
                                if (xx < 0 || xx >= wd) continue;
                                acc += static_cast<double>(k[ky * 3 + kx]) *
                                       plane[static_cast<std::size_t>(yy) * wd + xx];
                            }
                        }
                    }
                }
                gp[static_cast<std::size_t>(y) * wd + x] = static_cast<T>(acc);
            }
        }
    }
}

template <typename T>
void relu_forward(const FeatureMap<T>& in, FeatureMap<T>& out) {
    out = FeatureMap<T>(in.channels, in.height, in.width);
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) out.v[i] = in.v[i] > T(0) ? in.v[i] : T(0);
}

template <typename T>
void relu_backward(const FeatureMap<T>& cached_out, const FeatureMap<T>& g_out,
                   FeatureMap<T>& g_in) {
    g_in = FeatureMap<T>(g_out.channels, g_out.height, g_out.width);
    const std::size_t n = g_out.size();
    for (std::size_t i = 0; i < n; ++i)
        g_in.v[i] = cached_out.v[i] > T(0) ? g_out.v[i] : T(0);
}

template <typename T>
void pool2_forward(const FeatureMap<T>& in, FeatureMap<T>& out) {
    const int oh = in.height / 2;
    const int ow = in.width / 2;
    out = FeatureMap<T>(in.channels, oh, ow);
    for (int c = 0; c < in.channels; ++c) {
        const T* p = in.plane(c);
        T* q = out.plane(c);
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const std::size_t base = static_cast<std::size_t>(2 * y) * in.width + 2 * x;
                const double sum = static_cast<double>(p[base]) + p[base + 1] +
                                   p[base + in.width] + p[base + in.width + 1];
                q[static_cast<std::size_t>(y) * ow + x] = static_cast<T>(sum * 0.25);
            }
        }
    }
}

template <typename T>
void pool2_backward(int in_h, int in_w, const FeatureMap<T>& g_out, FeatureMap<T>& g_in) {
    g_in = FeatureMap<T>(g_out.channels, in_h, in_w);
    for (int c = 0; c < g_out.channels; ++c) {
        const T* g = g_out.plane(c);
        T* q = g_in.plane(c);
        for (int y = 0; y < g_out.height; ++y) {
            for (int x = 0; x < g_out.width; ++x) {
                const T quarter = static_cast<T>(g[static_cast<std::size_t>(y) * g_out.width + x] *
                                                 T(0.25));
                const std::size_t base = static_cast<std::size_t>(2 * y) * in_w + 2 * x;
                q[base] = quarter;
                q[base + 1] = quarter;
                q[base + in_w] = quarter;
                q[base + in_w + 1] = quarter;
            }
        }
    }
}

} // namespace

template <typename T>
ForwardResult<T> forward(const BasicFeatureNet<T>& net, const FeatureMap<T>& image) {
    if (image.channels != 1)
        throw_validation(Errc::invalid_argument, "feature net input must be 1-channel");
    check_layer_chain(net.layers);

    bool has_spatial_layers = false;
    for (const auto& l : net.layers)
        if (l.kind != LayerKind::relu) has_spatial_layers = true;
    if (has_spatial_layers && (image.height < 8 || image.width < 8))
        throw_validation(Errc::shape_too_small, "feature net input must be at least 8x8");

    ForwardResult<T> result;
    // Replicate to the first conv's fan-in when it expects more than 1 channel.
    int want = 1;
    for (const auto& l : net.layers)
        if (l.kind == LayerKind::conv3x3) {
            want = l.in_channels;
            break;
        }
    if (want == 1) {
        result.input = image;
    } else {
        result.input = FeatureMap<T>(want, image.height, image.width);
        for (int c = 0; c < want; ++c)
            std::copy(image.v.begin(), image.v.end(), result.input.plane(c));
    }

    // Only relu outputs (backward masks) and named target layers are read
    // after the forward pass; other payloads are freed as the pass advances.
    std::vector<bool> keep(net.layers.size(), false);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind == LayerKind::relu || l.name == net.content_layer) keep[i] = true;
        for (const auto& [name, w] : net.style_layers) {
            (void)w;
            if (l.name == name) keep[i] = true;
        }
    }

    result.outputs.resize(net.layers.size());
    const FeatureMap<T>* cur = &result.input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        switch (l.kind) {
            case LayerKind::conv3x3:
                if (cur->channels != l.in_channels)
                    throw_validation(Errc::inconsistent_channels,
                                     "conv input channels do not match layer spec");
                conv3x3_forward(l, net.weights[i], *cur, result.outputs[i]);
                break;
            case LayerKind::relu:
                relu_forward(*cur, result.outputs[i]);
                break;
            case LayerKind::pool2:
                if (cur->height < 2 || cur->width < 2)
                    throw_validation(Errc::shape_too_small, "pool2 input smaller than 2x2");
                pool2_forward(*cur, result.outputs[i]);
                break;
        }
        if (i >= 1 && !keep[i - 1]) std::vector<T>().swap(result.outputs[i - 1].v);
        cur = &result.outputs[i];
    }
    return result;
}

template <typename T>
std::vector<T> gram(const FeatureMap<T>& features) {
    const int c_n = features.channels;
    const std::size_t hw = static_cast<std::size_t>(features.height) * features.width;
    std::vector<T> g(static_cast<std::size_t>(c_n) * c_n, T(0));
    const double norm = 1.0 / (static_cast<double>(c_n) * static_cast<double>(hw));

#pragma omp parallel for schedule(static)
    for (int i = 0; i < c_n; ++i) {
        const T* fi = features.plane(i);
        for (int j = i; j < c_n; ++j) {
            const T* fj = features.plane(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < hw; ++p)
                acc += static_cast<double>(fi[p]) * static_cast<double>(fj[p]);
            const T value = static_cast<T>(acc * norm);
            g[static_cast<std::size_t>(i) * c_n + j] = value;
            g[static_cast<std::size_t>(j) * c_n + i] = value;
        }
    }
    return g;
}

template <typename T>
Targets<T> make_targets(const BasicFeatureNet<T>& net, const FeatureMap<T>& content_image,
                        const FeatureMap<T>& style_image) {
    Targets<T> targets;
    {
        const int idx = net.layer_index(net.content_layer);
        if (idx < 0)
            throw_validation(Errc::missing_target,
                             "content layer '" + net.content_layer + "' not in net");
        ForwardResult<T> run = forward(net, content_image);
        targets.content = run.outputs[static_cast<std::size_t>(idx)];
    }
    {
        ForwardResult<T> run = forward(net, style_image);
        targets.style.reserve(net.style_layers.size());
        for (const auto& [name, weight] : net.style_layers) {
            (void)weight;
            const int idx = net.layer_index(name);
            if (idx < 0)
                throw_validation(Errc::missing_target, "style layer '" + name + "' not in net");
            targets.style.push_back(gram(run.outputs[static_cast<std::size_t>(idx)]));
        }
    }
    return targets;
}

namespace {

// Shared loss bookkeeping for evaluate_loss and style_content_loss.
template <typename T>
struct LossWork {
    double content_loss = 0.0; // unweighted
    double style_loss = 0.0;   // weighted sum over layers
    int content_idx = -1;
    std::vector<int> style_idx;
    std::vector<std::vector<double>> style_delta; // G - G_target per style layer
};

template <typename T>
LossWork<T> compute_losses(const BasicFeatureNet<T>& net, const ForwardResult<T>& run,
                           const FeatureMap<T>& content_target,
                           const std::vector<std::vector<T>>& style_gram_targets, double alpha,
                           double beta, bool keep_deltas) {
    LossWork<T> work;
    if (alpha != 0.0) {
        work.content_idx = net.layer_index(net.content_layer);
        if (work.content_idx < 0)
            throw_validation(Errc::missing_target,
                             "content layer '" + net.content_layer + "' not in net");
        const FeatureMap<T>& f = run.outputs[static_cast<std::size_t>(work.content_idx)];
        if (content_target.channels != f.channels || content_target.height != f.height ||
            content_target.width != f.width)
            throw_validation(Errc::missing_target, "content target shape does not match net");
        double acc = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double d = static_cast<double>(f.v[i]) - content_target.v[i];
            acc += d * d;
        }
        work.content_loss = acc / static_cast<double>(f.size());
    }
    if (beta != 0.0) {
        if (style_gram_targets.size() != net.style_layers.size())
            throw_validation(Errc::missing_target,
                             "style gram target count does not match net style layers");
        for (std::size_t l = 0; l < net.style_layers.size(); ++l) {
            const auto& [name, weight] = net.style_layers[l];
            const int idx = net.layer_index(name);
            if (idx < 0)
                throw_validation(Errc::missing_target, "style layer '" + name + "' not in net");
            const FeatureMap<T>& f = run.outputs[static_cast<std::size_t>(idx)];
            const std::vector<T> g = gram(f);
            if (style_gram_targets[l].size() != g.size())
                throw_validation(Errc::missing_target, "style gram target size does not match");
            std::vector<double> delta(g.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                delta[i] = static_cast<double>(g[i]) - style_gram_targets[l][i];
                acc += delta[i] * delta[i];
            }
            const double c2 = static_cast<double>(f.channels) * f.channels;
            work.style_loss += weight * acc / c2;
            work.style_idx.push_back(idx);
            if (keep_deltas) work.style_delta.push_back(std::move(delta));
        }
    }
    return work;
}

} // namespace

template <typename T>
LossResult<T> evaluate_loss(const BasicFeatureNet<T>& net, const FeatureMap<T>& image,
                            const FeatureMap<T>& content_target,
                            const std::vector<std::vector<T>>& style_gram_targets, double alpha,
                            double beta) {
    LossResult<T> out;
    out.image_grad = FeatureMap<T>(1, image.height, image.width);
    if (alpha == 0.0 && beta == 0.0) return out;

    const ForwardResult<T> run = forward(net, image);
    const LossWork<T> work =
        compute_losses(net, run, content_target, style_gram_targets, alpha, beta, false);
    out.content_loss = work.content_loss;
    out.style_loss = work.style_loss;
    out.loss = alpha * work.content_loss + beta * work.style_loss;
    return out;
}

template <typename T>
LossResult<T> style_content_loss(const BasicFeatureNet<T>& net, const FeatureMap<T>& image,
                                 const FeatureMap<T>& content_target,
                                 const std::vector<std::vector<T>>& style_gram_targets,
                                 double alpha, double beta) {
    LossResult<T> out;
    out.image_grad = FeatureMap<T>(1, image.height, image.width);
    if (alpha == 0.0 && beta == 0.0) return out;

    const ForwardResult<T> run = forward(net, image);
    const LossWork<T> work =
        compute_losses(net, run, content_target, style_gram_targets, alpha, beta, true);
    out.content_loss = work.content_loss;
    out.style_loss = work.style_loss;
    out.loss = alpha * work.content_loss + beta * work.style_loss;

    // Backward pass: walk layers in reverse, adding loss injections at the
    // content/style layers before propagating through each layer.
    const FeatureMap<T>& last = run.last();
    FeatureMap<T> g(last.channels, last.height, last.width);

    auto inject = [&](int layer_idx, FeatureMap<T>& grad) {
        if (work.content_idx == layer_idx && alpha != 0.0) {
            const FeatureMap<T>& f = run.outputs[static_cast<std::size_t>(layer_idx)];
            const double scale = alpha * 2.0 / static_cast<double>(f.size());
            for (std::size_t i = 0; i < f.size(); ++i)
                grad.v[i] += static_cast<T>(scale *
                                            (static_cast<double>(f.v[i]) - content_target.v[i]));
        }
        if (beta != 0.0) {
            for (std::size_t l = 0; l < work.style_idx.size(); ++l) {
                if (work.style_idx[l] != layer_idx) continue;
                const FeatureMap<T>& f = run.outputs[static_cast<std::size_t>(layer_idx)];
                const double weight = net.style_layers[l].second;
                const int c_n = f.channels;
                const std::size_t hw = static_cast<std::size_t>(f.height) * f.width;
                const double c2 = static_cast<double>(c_n) * c_n;
                const double chw = static_cast<double>(c_n) * static_cast<double>(hw);
                const double scale = beta * weight * 4.0 / (c2 * chw);
                const std::vector<double>& delta = work.style_delta[l];
#pragma omp parallel for schedule(static)
                for (int i = 0; i < c_n; ++i) {
                    T* gp = grad.plane(i);
                    for (int j = 0; j < c_n; ++j) {
                        const double dij = delta[static_cast<std::size_t>(i) * c_n + j];
                        if (dij == 0.0) continue;
                        const T* fj = f.plane(j);
                        const double s = scale * dij;
                        for (std::size_t p = 0; p < hw; ++p)
                            gp[p] += static_cast<T>(s * fj[p]);
                    }
                }
            }
        }
    };

    for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
        inject(i, g);
        const LayerSpec& l = net.layers[static_cast<std::size_t>(i)];
        const FeatureMap<T>& in_map =
            i == 0 ? run.input : run.outputs[static_cast<std::size_t>(i - 1)];
        FeatureMap<T> g_prev;
        switch (l.kind) {
            case LayerKind::conv3x3:
                conv3x3_backward(l, net.weights[static_cast<std::size_t>(i)], g, g_prev);
                break;
            case LayerKind::relu:
                relu_backward(run.outputs[static_cast<std::size_t>(i)], g, g_prev);
                break;
            case LayerKind::pool2:
                pool2_backward(in_map.height, in_map.width, g, g_prev);
                break;
        }
        g = std::move(g_prev);
    }

    // Collapse replicated input channels back to the single image channel.
    if (g.channels == 1) {
        out.image_grad.v = std::move(g.v);
    } else {
        const std::size_t hw = static_cast<std::size_t>(g.height) * g.width;
        for (int c = 0; c < g.channels; ++c) {
            const T* p = g.plane(c);
            for (std::size_t i = 0; i < hw; ++i) out.image_grad.v[i] += p[i];
        }
    }
    return out;
}

template <typename T>
BasicFeatureNet<T> init_random(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
    check_layer_chain(spec);
    BasicFeatureNet<T> net;
    net.layers = spec;
    net.weights.resize(spec.size());

    std::size_t conv_counter = 0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const LayerSpec& l = spec[i];
        if (l.kind != LayerKind::conv3x3) continue;
        auto& w = net.weights[i];
        const std::size_t n = static_cast<std::size_t>(l.out_channels) * l.in_channels * 9;
        w.kernel.resize(n);
        w.bias.assign(static_cast<std::size_t>(l.out_channels), T(0));
        const double stdev = std::sqrt(2.0 / (9.0 * static_cast<double>(l.in_channels)));
        rng::Stream stream(seed, conv_counter++);
        for (std::size_t k = 0; k < n; ++k)
            w.kernel[k] = static_cast<T>(stdev * stream.next_normal());
    }

    std::string last_relu;
    std::vector<std::string> relus;
    for (const auto& l : spec) {
        if (l.kind == LayerKind::relu) {
            last_relu = l.name;
            relus.push_back(l.name);
        }
    }
    if (!relus.empty()) {
        net.content_layer = last_relu;
        const double w = 1.0 / static_cast<double>(relus.size());
        for (const auto& name : relus) net.style_layers.emplace_back(name, w);
    } else if (!spec.empty()) {
        net.content_layer = spec.back().name;
        net.style_layers.emplace_back(spec.back().name, 1.0);
    }
    return net;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const unsigned char* p;
    std::size_t n;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (pos + 4 > n) throw_io(Errc::format_error, "truncated weight file");
        std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                          static_cast<std::uint32_t>(p[pos + 1]) << 8 |
                          static_cast<std::uint32_t>(p[pos + 2]) << 16 |
                          static_cast<std::uint32_t>(p[pos + 3]) << 24;
        pos += 4;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(std::size_t len) {
        if (pos + len > n) throw_io(Errc::format_error, "truncated weight file");
        std::string s(reinterpret_cast<const char*>(p + pos), len);
        pos += len;
        return s;
    }
};

// VGG-style conv names "conv<block>_<index>"; returns block or -1.
int parse_block(const std::string& name) {
    if (name.rfind("conv", 0) != 0) return -1;
    const std::size_t us = name.find('_', 4);
    if (us == std::string::npos || us == 4) return -1;
    int block = 0;
    for (std::size_t i = 4; i < us; ++i) {
        if (name[i] < '0' || name[i] > '9') return -1;
        block = block * 10 + (name[i] - '0');
    }
    return block;
}

} // namespace

void save_weights(const std::string& path, const FeatureNet& net) {
    std::string payload;
    std::uint32_t n_conv = 0;
    for (const auto& l : net.layers)
        if (l.kind == LayerKind::conv3x3) ++n_conv;
    put_u32(payload, n_conv);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind != LayerKind::conv3x3) continue;
        put_u32(payload, static_cast<std::uint32_t>(l.name.size()));
        payload += l.name;
        put_u32(payload, static_cast<std::uint32_t>(l.in_channels));
        put_u32(payload, static_cast<std::uint32_t>(l.out_channels));
        for (float v : net.weights[i].kernel) put_f32(payload, v);
        for (float v : net.weights[i].bias) put_f32(payload, v);
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size())));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io(Errc::io_error, "cannot open weight file for writing: " + path);
    out.write("FNW1", 4);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    std::string tail;
    put_u32(tail, crc);
    out.write(tail.data(), 4);
    if (!out) throw_io(Errc::io_error, "failed writing weight file: " + path);
}

FeatureNet load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io(Errc::io_error, "cannot open weight file: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 12 || blob.compare(0, 4, "FNW1") != 0)
        throw_io(Errc::format_error, "not a FNW1 weight file: " + path);

    const std::size_t payload_len = blob.size() - 8;
    const auto want_crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(blob.data() + 4),
              static_cast<uInt>(payload_len)));
    Reader tail{reinterpret_cast<const unsigned char*>(blob.data()) + 4 + payload_len, 4};
    if (tail.u32() != want_crc)
        throw_io(Errc::checksum_mismatch, "weight file CRC32 mismatch: " + path);

    Reader r{reinterpret_cast<const unsigned char*>(blob.data()) + 4, payload_len};
    const std::uint32_t n_conv = r.u32();
    if (n_conv > 1024) throw_io(Errc::format_error, "implausible conv layer count");

    struct ConvEntry {
        std::string name;
        int in, out;
        std::vector<float> kernel, bias;
    };
    std::vector<ConvEntry> convs;
    convs.reserve(n_conv);
    for (std::uint32_t i = 0; i < n_conv; ++i) {
        ConvEntry e;
        const std::uint32_t name_len = r.u32();
        if (name_len > 4096) throw_io(Errc::format_error, "implausible layer name length");
        e.name = r.bytes(name_len);
        e.in = static_cast<int>(r.u32());
        e.out = static_cast<int>(r.u32());
        if (e.in < 1 || e.out < 1 || e.in > 65536 || e.out > 65536)
            throw_io(Errc::format_error, "implausible channel counts in weight file");
        const std::size_t kn = static_cast<std::size_t>(e.in) * e.out * 9;
        e.kernel.resize(kn);
        for (std::size_t k = 0; k < kn; ++k) e.kernel[k] = r.f32();
        e.bias.resize(static_cast<std::size_t>(e.out));
        for (int k = 0; k < e.out; ++k) e.bias[static_cast<std::size_t>(k)] = r.f32();
        convs.push_back(std::move(e));
    }
    if (r.pos != r.n) throw_io(Errc::format_error, "trailing bytes in weight file payload");

    // Rebuild the topology: relu after every conv; a pool2 between VGG-style
    // blocks when all conv names carry block numbers.
    bool blocks_ok = !convs.empty();
    for (const auto& e : convs)
        if (parse_block(e.name) < 0) blocks_ok = false;

    FeatureNet net;
    int prev_block = blocks_ok ? parse_block(convs.front().name) : -1;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const auto& e = convs[i];
        if (blocks_ok) {
            const int block = parse_block(e.name);
            if (block != prev_block) {
                net.layers.push_back({LayerKind::pool2, 0, 0, "pool" + std::to_string(prev_block)});
                net.weights.emplace_back();
                prev_block = block;
            }
        }
        net.layers.push_back({LayerKind::conv3x3, e.in, e.out, e.name});
        ConvWeights<float> w;
        w.kernel = e.kernel;
        w.bias = e.bias;
        net.weights.push_back(std::move(w));
        std::string relu_name = e.name;
        if (relu_name.rfind("conv", 0) == 0)
            relu_name = "relu" + relu_name.substr(4);
        else
            relu_name = "relu_" + relu_name;
        net.layers.push_back({LayerKind::relu, 0, 0, relu_name});
        net.weights.emplace_back();
    }
    try {
        check_layer_chain(net.layers);
    } catch (const ValidationError&) {
        throw; // InconsistentChannels
    }

    std::vector<std::string> relus;
    for (const auto& l : net.layers)
        if (l.kind == LayerKind::relu) relus.push_back(l.name);
    if (!relus.empty()) {
        net.content_layer = relus.back();
        const double w = 1.0 / static_cast<double>(relus.size());
        for (const auto& name : relus) net.style_layers.emplace_back(name, w);
    }
    return net;
}

template struct BasicFeatureNet<float>;
template struct BasicFeatureNet<double>;

template ForwardResult<float> forward(const BasicFeatureNet<float>&, const FeatureMap<float>&);
template ForwardResult<double> forward(const BasicFeatureNet<double>&, const FeatureMap<double>&);
template std::vector<float> gram(const FeatureMap<float>&);
template std::vector<double> gram(const FeatureMap<double>&);
template Targets<float> make_targets(const BasicFeatureNet<float>&, const FeatureMap<float>&,
                                     const FeatureMap<float>&);
template Targets<double> make_targets(const BasicFeatureNet<double>&, const FeatureMap<double>&,
                                      const FeatureMap<double>&);
template LossResult<float> style_content_loss(const BasicFeatureNet<float>&,
                                              const FeatureMap<float>&, const FeatureMap<float>&,
                                              const std::vector<std::vector<float>>&, double,
                                              double);
template LossResult<double> style_content_loss(const BasicFeatureNet<double>&,
                                               const FeatureMap<double>&,
                                               const FeatureMap<double>&,
                                               const std::vector<std::vector<double>>&, double,
                                               double);
template LossResult<float> evaluate_loss(const BasicFeatureNet<float>&, const FeatureMap<float>&,
                                         const FeatureMap<float>&,
                                         const std::vector<std::vector<float>>&, double, double);
template LossResult<double> evaluate_loss(const BasicFeatureNet<double>&,
                                          const FeatureMap<double>&, const FeatureMap<double>&,
                                          const std::vector<std::vector<double>>&, double, double);
template BasicFeatureNet<float> init_random(const std::vector<LayerSpec>&, std::uint64_t);
template BasicFeatureNet<double> init_random(const std::vector<LayerSpec>&, std::uint64_t);

} // namespace tiltforge::featnet
