#ifndef TILTFORGE_NST_HPP
#define TILTFORGE_NST_HPP

#include <cstdint>
#include <vector>

#include "tiltforge/core.hpp"
#include "tiltforge/featnet.hpp"
#include "tiltforge/noise.hpp"

namespace tiltforge::nst {

using Image = featnet::FeatureMap<float>;

struct NstConfig {
    double alpha = 1.0;          // content weight
    double beta = 1.0;           // style weight
    double learning_rate = 0.05; // Adam step size on pixels
    int iterations = 1;
    double content_noise_fraction = 0.25;
    std::uint64_t seed = 0;
};

struct LossRecord {
    std::size_t tilt = 0;
    int iteration = 0; // loss evaluated after this many updates
    double content_loss = 0.0;
    double style_loss = 0.0;
    double total = 0.0;
};

/// Gradient descent on the pixels of a working image initialized from
/// init_image, matching content_image's features and style_image's gram
/// statistics. Images are standardized per image before the net; the result
/// is de-standardized to the init image's moment frame.
Image transfer_tilt(const featnet::FeatureNet& net, const Image& init_image,
                    const Image& content_image, const Image& style_image, const NstConfig& config,
                    std::vector<LossRecord>* telemetry = nullptr, std::size_t tilt_index = 0);

/// transfer_tilt applied independently per tilt. Telemetry (when requested)
/// holds (iterations + 1) records per tilt: the loss before any update, after
/// each update.
ProjectionStack transfer_stack(const featnet::FeatureNet& net, const ProjectionStack& init_stack,
                               const ProjectionStack& content_stack,
                               const ProjectionStack& style_stack, const NstConfig& config,
                               std::vector<LossRecord>* telemetry = nullptr);

/// Full pipeline: tilt-dependent noisy initialization (fraction 1), reduced
/// noise content (config.content_noise_fraction), style transfer against the
/// given style stack.
ProjectionStack build_faket(const ProjectionStack& noiseless, const ProjectionStack& style_stack,
                            const noise::NoiseModel& model, const featnet::FeatureNet& net,
                            const NstConfig& config, std::uint64_t seed,
                            std::vector<LossRecord>* telemetry = nullptr);

} // namespace tiltforge::nst

#endif
