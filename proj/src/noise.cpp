#include "tiltforge/noise.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tiltforge/rng.hpp"

namespace tiltforge::noise {

using json = nlohmann::ordered_json;

NoiseModel::NoiseModel(TiltGeometry geometry, PerTiltStats target_stats,
                       std::array<double, 3> sigma_poly, double global_sigma)
    : geometry_(std::move(geometry)),
      target_stats_(std::move(target_stats)),
      sigma_poly_(sigma_poly),
      global_sigma_(global_sigma) {
    validate_stats(target_stats_, geometry_.tilt_count());
    if (!(global_sigma_ >= 0.0))
        throw_validation(Errc::negative_sigma, "global sigma must be non-negative");
    for (double a : geometry_.angles_deg()) {
        if (sigma_at(a) < 0.0) {
            std::ostringstream os;
            os << "sigma polynomial is negative at " << a << " degrees";
            throw_validation(Errc::negative_sigma, os.str());
        }
    }
}

double NoiseModel::sigma_at(double angle_deg) const {
    return (sigma_poly_[0] * angle_deg + sigma_poly_[1]) * angle_deg + sigma_poly_[2];
}

std::vector<double> NoiseModel::sigma_per_tilt() const {
    std::vector<double> out;
    out.reserve(geometry_.tilt_count());
    for (double a : geometry_.angles_deg()) out.push_back(sigma_at(a));
    return out;
}

void NoiseModel::save(const std::string& path) const {
    json j;
    j["angles"] = geometry_.angles_deg();
    j["target_mean"] = target_stats_.mean;
    j["target_std"] = target_stats_.stdev;
    j["poly_a"] = sigma_poly_[0];
    j["poly_b"] = sigma_poly_[1];
    j["poly_c"] = sigma_poly_[2];
    j["global_sigma"] = global_sigma_;
    std::ofstream out(path);
    if (!out) throw_io(Errc::io_error, "cannot open noise model file for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw_io(Errc::io_error, "failed writing noise model file: " + path);
}

NoiseModel NoiseModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io(Errc::io_error, "cannot open noise model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw_io(Errc::format_error, std::string("bad noise model file: ") + e.what());
    }
    try {
        TiltGeometry geom(j.at("angles").get<std::vector<double>>());
        PerTiltStats stats;
        stats.mean = j.at("target_mean").get<std::vector<double>>();
        stats.stdev = j.at("target_std").get<std::vector<double>>();
        std::array<double, 3> poly = {j.at("poly_a").get<double>(), j.at("poly_b").get<double>(),
                                      j.at("poly_c").get<double>()};
        return NoiseModel(std::move(geom), std::move(stats), poly,
                          j.at("global_sigma").get<double>());
    } catch (const json::exception& e) {
        throw_io(Errc::format_error, std::string("noise model file missing keys: ") + e.what());
    }
}

PerTiltStats per_tilt_moments(const ProjectionStack& stack) {
    validate_stack(stack);
    const long tilts = static_cast<long>(stack.tilts());
    const std::size_t n = stack.height() * stack.width();
    PerTiltStats stats;
    stats.mean.resize(stack.tilts());
    stats.stdev.resize(stack.tilts());

#pragma omp parallel for schedule(static)
    for (long t = 0; t < tilts; ++t) {
        const float* p = stack.data.slice(static_cast<std::size_t>(t));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += p[i];
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = p[i] - mean;
            var += d * d;
        }
        stats.mean[static_cast<std::size_t>(t)] = mean;
        stats.stdev[static_cast<std::size_t>(t)] = std::sqrt(var / static_cast<double>(n));
    }
    return stats;
}

PerTiltStats average_training_stats(const std::vector<PerTiltStats>& stats_list) {
    if (stats_list.empty())
        throw_validation(Errc::empty_training_set, "no per-tilt stats to average");
    const std::size_t tilts = stats_list.front().size();
    for (const auto& s : stats_list)
        if (s.mean.size() != tilts || s.stdev.size() != tilts)
            throw_validation(Errc::shape_mismatch, "per-tilt stats have differing tilt counts");

    PerTiltStats avg;
    avg.mean.assign(tilts, 0.0);
    avg.stdev.assign(tilts, 0.0);
    for (const auto& s : stats_list) {
        for (std::size_t i = 0; i < tilts; ++i) {
            avg.mean[i] += s.mean[i];
            avg.stdev[i] += s.stdev[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(stats_list.size());
    for (std::size_t i = 0; i < tilts; ++i) {
        avg.mean[i] *= inv;
        avg.stdev[i] *= inv;
    }
    return avg;
}

ProjectionStack match_moments(const ProjectionStack& stack, const PerTiltStats& target) {
    validate_stack(stack);
    validate_stats(target, stack.tilts());
    const PerTiltStats src = per_tilt_moments(stack);

    const long tilts = static_cast<long>(stack.tilts());
    const std::size_t n = stack.height() * stack.width();
    Array3f out(stack.tilts(), stack.height(), stack.width());

    // Degenerate tilts are detected up front so the error does not depend on
    // the parallel schedule.
    for (long t = 0; t < tilts; ++t) {
        const auto i = static_cast<std::size_t>(t);
        if (src.stdev[i] == 0.0 && target.stdev[i] > 0.0) {
            std::ostringstream os;
            os << "tilt " << t << " is constant; cannot scale to a positive target std";
            throw_validation(Errc::degenerate_tilt, os.str());
        }
    }

#pragma omp parallel for schedule(static)
    for (long t = 0; t < tilts; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const float* p = stack.data.slice(i);
        float* q = out.slice(i);
        if (target.stdev[i] == 0.0) {
            const float v = static_cast<float>(target.mean[i]);
            for (std::size_t k = 0; k < n; ++k) q[k] = v;
            continue;
        }
        const double gain = target.stdev[i] / src.stdev[i];
        const double offset = target.mean[i] - src.mean[i] * gain;
        for (std::size_t k = 0; k < n; ++k)
            q[k] = static_cast<float>(p[k] * gain + offset);
    }
    return ProjectionStack(std::move(out), stack.geometry);
}

std::vector<double> extract_noise_sigma(const ProjectionStack& target_stack,
                                        const ProjectionStack& noiseless_stack) {
    validate_stack(target_stack);
    validate_stack(noiseless_stack);
    if (!target_stack.data.same_shape(noiseless_stack.data) ||
        !(target_stack.geometry == noiseless_stack.geometry))
        throw_validation(Errc::shape_mismatch, "target and noiseless stacks differ in shape");

    const PerTiltStats target_stats = per_tilt_moments(target_stack);
    const ProjectionStack aligned = match_moments(noiseless_stack, target_stats);

    const long tilts = static_cast<long>(target_stack.tilts());
    const std::size_t n = target_stack.height() * target_stack.width();
    std::vector<double> sigma(target_stack.tilts());

#pragma omp parallel for schedule(static)
    for (long t = 0; t < tilts; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const float* a = target_stack.data.slice(i);
        const float* b = aligned.data.slice(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) sum += static_cast<double>(a[k]) - b[k];
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double d = (static_cast<double>(a[k]) - b[k]) - mean;
            var += d * d;
        }
        sigma[i] = std::sqrt(var / static_cast<double>(n));
    }
    return sigma;
}

std::array<double, 3> fit_sigma_poly(const std::vector<double>& angles_deg,
                                     const std::vector<std::vector<double>>& sigmas_per_tomogram) {
    if (sigmas_per_tomogram.empty())
        throw_validation(Errc::insufficient_points, "no sigma measurements to fit");
    const std::size_t tilts = angles_deg.size();
    for (const auto& s : sigmas_per_tomogram)
        if (s.size() != tilts)
            throw_validation(Errc::shape_mismatch, "sigma list length differs from angle count");

    std::vector<double> distinct = angles_deg;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3)
        throw_validation(Errc::insufficient_points,
                         "quadratic fit needs at least 3 distinct angles");

    std::vector<double> avg(tilts, 0.0);
    for (const auto& s : sigmas_per_tomogram)
        for (std::size_t i = 0; i < tilts; ++i) avg[i] += s[i];
    for (double& v : avg) v /= static_cast<double>(sigmas_per_tomogram.size());

    // Normal equations for basis (theta^2, theta, 1), solved by Gaussian
    // elimination with partial pivoting.
    double ata[3][3] = {};
    double aty[3] = {};
    for (std::size_t i = 0; i < tilts; ++i) {
        const double th = angles_deg[i];
        const double row[3] = {th * th, th, 1.0};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) ata[r][c] += row[r] * row[c];
            aty[r] += row[r] * avg[i];
        }
    }
    double m[3][4];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = ata[r][c];
        m[r][3] = aty[r];
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-30)
            throw_validation(Errc::insufficient_points, "degenerate angle configuration");
        if (piv != col)
            for (int c = col; c < 4; ++c) std::swap(m[piv][c], m[col][c]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
}

ProjectionStack add_gaussian(const ProjectionStack& stack, const std::vector<double>& sigma_per_tilt,
                             double fraction, std::uint64_t seed) {
    validate_stack(stack);
    if (sigma_per_tilt.size() != stack.tilts())
        throw_validation(Errc::shape_mismatch, "sigma list length differs from tilt count");
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw_validation(Errc::invalid_argument, "noise fraction must be in [0, 1]");
    for (double s : sigma_per_tilt)
        if (!(s >= 0.0)) throw_validation(Errc::negative_sigma, "per-tilt sigma must be >= 0");

    if (fraction == 0.0) return stack;

    const long tilts = static_cast<long>(stack.tilts());
    const std::size_t n = stack.height() * stack.width();
    Array3f out(stack.tilts(), stack.height(), stack.width());

#pragma omp parallel for schedule(static)
    for (long t = 0; t < tilts; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const float* p = stack.data.slice(i);
        float* q = out.slice(i);
        const double s = fraction * sigma_per_tilt[i];
        if (s == 0.0) {
            for (std::size_t k = 0; k < n; ++k) q[k] = p[k];
            continue;
        }
        rng::Stream stream(seed, i);
        for (std::size_t k = 0; k < n; ++k)
            q[k] = static_cast<float>(p[k] + s * stream.next_normal());
    }
    return ProjectionStack(std::move(out), stack.geometry);
}

ProjectionStack simulate_baseline(const ProjectionStack& noiseless, const NoiseModel& model,
                                  std::uint64_t seed) {
    if (!(noiseless.geometry == model.geometry()))
        throw_validation(Errc::geometry_mismatch, "stack geometry differs from noise model");
    const std::vector<double> sigma(noiseless.tilts(), model.global_sigma());
    ProjectionStack matched = match_moments(noiseless, model.target_stats());
    ProjectionStack noisy = add_gaussian(matched, sigma, 1.0, seed);
    return match_moments(noisy, model.target_stats());
}

ProjectionStack simulate_noisy(const ProjectionStack& noiseless, const NoiseModel& model,
                               double fraction, std::uint64_t seed) {
    if (!(noiseless.geometry == model.geometry()))
        throw_validation(Errc::geometry_mismatch, "stack geometry differs from noise model");
    ProjectionStack matched = match_moments(noiseless, model.target_stats());
    ProjectionStack noisy = add_gaussian(matched, model.sigma_per_tilt(), fraction, seed);
    return match_moments(noisy, model.target_stats());
}

} // namespace tiltforge::noise
