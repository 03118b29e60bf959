#ifndef TILTFORGE_NOISE_HPP
#define TILTFORGE_NOISE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tiltforge/core.hpp"

namespace tiltforge::noise {

/// Per-tilt moment targets plus a quadratic-in-angle noise law
/// sigma(theta) = a*theta^2 + b*theta + c (theta in degrees).
class NoiseModel {
public:
    NoiseModel(TiltGeometry geometry, PerTiltStats target_stats, std::array<double, 3> sigma_poly,
               double global_sigma);

    const TiltGeometry& geometry() const { return geometry_; }
    const PerTiltStats& target_stats() const { return target_stats_; }
    const std::array<double, 3>& sigma_poly() const { return sigma_poly_; }
    double global_sigma() const { return global_sigma_; }

    double sigma_at(double angle_deg) const;
    std::vector<double> sigma_per_tilt() const;

    void save(const std::string& path) const;
    static NoiseModel load(const std::string& path);

private:
    TiltGeometry geometry_;
    PerTiltStats target_stats_;
    std::array<double, 3> sigma_poly_{}; // a, b, c
    double global_sigma_ = 0.0;
};

/// Sample mean and population standard deviation over all pixels of each tilt.
PerTiltStats per_tilt_moments(const ProjectionStack& stack);

/// Element-wise mean of the per-tilt stats over a training set.
PerTiltStats average_training_stats(const std::vector<PerTiltStats>& stats_list);

/// Affine per-tilt rescaling so each tilt's moments equal the targets.
ProjectionStack match_moments(const ProjectionStack& stack, const PerTiltStats& target);

/// Per-tilt std of (target - noiseless) after the noiseless stack is
/// moment-matched to the target, i.e. the tilt-wise noise magnitude.
std::vector<double> extract_noise_sigma(const ProjectionStack& target_stack,
                                        const ProjectionStack& noiseless_stack);

/// Least-squares quadratic fit of the tomogram-averaged sigma against angle.
std::array<double, 3> fit_sigma_poly(const std::vector<double>& angles_deg,
                                     const std::vector<std::vector<double>>& sigmas_per_tomogram);

/// Adds N(0, (fraction*sigma[i])^2) noise to tilt i from a per-tilt stream
/// derived from (seed, i); fraction 0 returns the input unchanged.
ProjectionStack add_gaussian(const ProjectionStack& stack, const std::vector<double>& sigma_per_tilt,
                             double fraction, std::uint64_t seed);

/// match_moments -> global Gaussian noise -> match_moments.
ProjectionStack simulate_baseline(const ProjectionStack& noiseless, const NoiseModel& model,
                                  std::uint64_t seed);

/// match_moments -> tilt-dependent Gaussian noise (sigma(theta), scaled by
/// fraction) -> match_moments. fraction 1 gives the noisy stack, fraction 0.25
/// the style-transfer content stack.
ProjectionStack simulate_noisy(const ProjectionStack& noiseless, const NoiseModel& model,
                               double fraction, std::uint64_t seed);

} // namespace tiltforge::noise

#endif
