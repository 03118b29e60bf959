#include "tiltforge/nst.hpp"

#include <cmath>

#include "tiltforge/rng.hpp"

namespace tiltforge::nst {

namespace {

void check_config(const NstConfig& config) {
    if (!(config.alpha >= 0.0) || !(config.beta >= 0.0))
        throw_validation(Errc::invalid_argument, "content and style weights must be >= 0");
    if (!(config.learning_rate > 0.0))
        throw_validation(Errc::invalid_argument, "learning rate must be positive");
    if (config.iterations < 1)
        throw_validation(Errc::invalid_argument, "iterations must be at least 1");
    if (!(config.content_noise_fraction >= 0.0 && config.content_noise_fraction <= 1.0))
        throw_validation(Errc::invalid_argument, "content noise fraction must be in [0, 1]");
}

struct Standardized {
    Image map;
    double mean = 0.0;
    double stdev = 1.0;
};

Standardized standardize(const Image& img) {
    Standardized out;
    const std::size_t n = img.size();
    double sum = 0.0;
    for (float v : img.v) sum += v;
    out.mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (float v : img.v) {
        const double d = v - out.mean;
        var += d * d;
    }
    out.stdev = std::sqrt(var / static_cast<double>(n));
    if (out.stdev < 1e-12) out.stdev = 1.0; // constant image: shift only
    out.map = Image(1, img.height, img.width);
    const double inv = 1.0 / out.stdev;
    for (std::size_t i = 0; i < n; ++i)
        out.map.v[i] = static_cast<float>((img.v[i] - out.mean) * inv);
    return out;
}

} // namespace

Image transfer_tilt(const featnet::FeatureNet& net, const Image& init_image,
                    const Image& content_image, const Image& style_image, const NstConfig& config,
                    std::vector<LossRecord>* telemetry, std::size_t tilt_index) {
    check_config(config);
    if (init_image.height != content_image.height || init_image.width != content_image.width ||
        init_image.height != style_image.height || init_image.width != style_image.width)
        throw_validation(Errc::shape_mismatch, "init/content/style images differ in shape");

    const Standardized init = standardize(init_image);
    const Standardized content = standardize(content_image);
    const Standardized style = standardize(style_image);
    const featnet::Targets<float> targets = featnet::make_targets(net, content.map, style.map);

    Image work = init.map;
    const std::size_t n = work.size();
    std::vector<float> m(n, 0.0f), v(n, 0.0f);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    for (int it = 1; it <= config.iterations; ++it) {
        const featnet::LossResult<float> res = featnet::style_content_loss(
            net, work, targets.content, targets.style, config.alpha, config.beta);
        if (telemetry)
            telemetry->push_back(
                {tilt_index, it - 1, res.content_loss, res.style_loss, res.loss});
        const double bc1 = 1.0 - std::pow(beta1, it);
        const double bc2 = 1.0 - std::pow(beta2, it);
        for (std::size_t i = 0; i < n; ++i) {
            const double g = res.image_grad.v[i];
            const double mi = beta1 * m[i] + (1.0 - beta1) * g;
            const double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            work.v[i] = static_cast<float>(
                work.v[i] - config.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
        }
    }
    if (telemetry) {
        const featnet::LossResult<float> fin = featnet::evaluate_loss(
            net, work, targets.content, targets.style, config.alpha, config.beta);
        telemetry->push_back(
            {tilt_index, config.iterations, fin.content_loss, fin.style_loss, fin.loss});
    }

    Image out(1, work.height, work.width);
    for (std::size_t i = 0; i < n; ++i)
        out.v[i] = static_cast<float>(work.v[i] * init.stdev + init.mean);
    return out;
}

namespace {

Image tilt_image(const ProjectionStack& stack, std::size_t t) {
    Image img(1, static_cast<int>(stack.height()), static_cast<int>(stack.width()));
    const float* src = stack.data.slice(t);
    std::copy(src, src + img.size(), img.v.begin());
    return img;
}

} // namespace

ProjectionStack transfer_stack(const featnet::FeatureNet& net, const ProjectionStack& init_stack,
                               const ProjectionStack& content_stack,
                               const ProjectionStack& style_stack, const NstConfig& config,
                               std::vector<LossRecord>* telemetry) {
    check_config(config);
    validate_stack(init_stack);
    validate_stack(content_stack);
    validate_stack(style_stack);
    if (!init_stack.data.same_shape(content_stack.data) ||
        !init_stack.data.same_shape(style_stack.data))
        throw_validation(Errc::shape_mismatch, "init/content/style stacks differ in shape");
    if (!(init_stack.geometry == content_stack.geometry))
        throw_validation(Errc::geometry_mismatch, "init and content geometries differ");
    if (!(init_stack.geometry == style_stack.geometry))
        throw_validation(Errc::geometry_mismatch,
                         "style geometry must pair tilt-for-tilt with the content geometry");

    const long tilts = static_cast<long>(init_stack.tilts());
    const std::size_t per_tilt_records = static_cast<std::size_t>(config.iterations) + 1;
    if (telemetry) telemetry->assign(static_cast<std::size_t>(tilts) * per_tilt_records, {});

    Array3f out(init_stack.tilts(), init_stack.height(), init_stack.width());

#pragma omp parallel for schedule(static)
    for (long t = 0; t < tilts; ++t) {
        const auto i = static_cast<std::size_t>(t);
        std::vector<LossRecord> local;
        const Image adapted =
            transfer_tilt(net, tilt_image(init_stack, i), tilt_image(content_stack, i),
                          tilt_image(style_stack, i), config, telemetry ? &local : nullptr, i);
        std::copy(adapted.v.begin(), adapted.v.end(), out.slice(i));
        if (telemetry)
            std::copy(local.begin(), local.end(), telemetry->begin() + i * per_tilt_records);
    }
    return ProjectionStack(std::move(out), init_stack.geometry);
}

ProjectionStack build_faket(const ProjectionStack& noiseless, const ProjectionStack& style_stack,
                            const noise::NoiseModel& model, const featnet::FeatureNet& net,
                            const NstConfig& config, std::uint64_t seed,
                            std::vector<LossRecord>* telemetry) {
    check_config(config);
    const ProjectionStack init = noise::simulate_noisy(noiseless, model, 1.0, seed);
    const ProjectionStack content = noise::simulate_noisy(
        noiseless, model, config.content_noise_fraction, rng::derive_seed(seed, 1));
    return transfer_stack(net, init, content, style_stack, config, telemetry);
}

} // namespace tiltforge::nst
