#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <cstdio>

#include "oracles.hpp"
#include "tiltforge/noise.hpp"
#include "tiltforge/rng.hpp"

using namespace tiltforge;

namespace {

PerTiltStats constant_stats(std::size_t tilts, double mean, double stdev) {
    PerTiltStats s;
    s.mean.assign(tilts, mean);
    s.stdev.assign(tilts, stdev);
    return s;
}

noise::NoiseModel fixture_model(const TiltGeometry& g, double mean, double stdev,
                                std::array<double, 3> poly, double global) {
    return noise::NoiseModel(g, constant_stats(g.tilt_count(), mean, stdev), poly, global);
}

} // namespace

TEST_SUITE("noise") {

TEST_CASE("per-tilt moments of a constant stack") {
    const ProjectionStack stack(Array3f(4, 8, 8, 5.0f), evenly_spaced_geometry(-60, 60, 4));
    const PerTiltStats stats = noise::per_tilt_moments(stack);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(stats.mean[i] == doctest::Approx(5.0));
        CHECK(stats.stdev[i] == doctest::Approx(0.0));
    }
}

TEST_CASE("per-tilt moments on tiny hand-computed tilts") {
    Array3f a(2, 1, 2);
    a.v = {0.0f, 2.0f, -1.0f, 1.0f};
    const ProjectionStack stack(std::move(a), TiltGeometry({-10.0, 10.0}));
    const PerTiltStats stats = noise::per_tilt_moments(stack);
    CHECK(stats.mean[0] == doctest::Approx(1.0));
    CHECK(stats.mean[1] == doctest::Approx(0.0));
    CHECK(stats.stdev[0] == doctest::Approx(1.0));
    CHECK(stats.stdev[1] == doctest::Approx(1.0));
}

TEST_CASE("per-tilt moments of standard normal samples") {
    Array3f a(61, 64, 64);
    for (std::size_t t = 0; t < 61; ++t) {
        rng::Stream s(2024, t);
        float* p = a.slice(t);
        for (std::size_t i = 0; i < 64 * 64; ++i) p[i] = static_cast<float>(s.next_normal());
    }
    const ProjectionStack stack(std::move(a), evenly_spaced_geometry(-60, 60, 61));
    const PerTiltStats stats = noise::per_tilt_moments(stack);
    for (std::size_t i = 0; i < 61; ++i) {
        CHECK(std::abs(stats.mean[i]) < 0.1);
        CHECK(std::abs(stats.stdev[i] - 1.0) < 0.1);
    }
}

TEST_CASE("averaging training stats") {
    PerTiltStats a = constant_stats(2, 0.0, 1.0);
    a.mean = {0.0, 2.0};
    PerTiltStats b = constant_stats(2, 0.0, 1.0);
    b.mean = {2.0, 0.0};
    const PerTiltStats avg = noise::average_training_stats({a, b});
    CHECK(avg.mean[0] == doctest::Approx(1.0));
    CHECK(avg.mean[1] == doctest::Approx(1.0));

    const PerTiltStats single = noise::average_training_stats({a});
    CHECK(single.mean == a.mean);
    CHECK(single.stdev == a.stdev);

    CHECK_THROWS_AS(noise::average_training_stats({}), ValidationError);
    PerTiltStats c = constant_stats(3, 0.0, 1.0);
    CHECK_THROWS_AS(noise::average_training_stats({a, c}), ValidationError);
}

TEST_CASE("match_moments maps moments onto the targets") {
    const ProjectionStack stack = oracles::fixture_noiseless(7, 32, 32, 5, 10.0);
    PerTiltStats target;
    for (std::size_t i = 0; i < 7; ++i) {
        target.mean.push_back(1.0 + static_cast<double>(i));
        target.stdev.push_back(0.5 + 0.25 * static_cast<double>(i));
    }
    const ProjectionStack matched = noise::match_moments(stack, target);
    const PerTiltStats got = noise::per_tilt_moments(matched);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(std::abs(got.mean[i] - target.mean[i]) < 1e-5);
        CHECK(std::abs(got.stdev[i] - target.stdev[i]) < 1e-5);
    }

    // idempotence
    const ProjectionStack again = noise::match_moments(matched, target);
    for (std::size_t i = 0; i < again.data.v.size(); ++i)
        CHECK(std::abs(again.data.v[i] - matched.data.v[i]) < 1e-6);

    // affine per tilt: perfect correlation with the input
    for (std::size_t t = 0; t < 7; ++t) {
        const float* x = stack.data.slice(t);
        const float* y = matched.data.slice(t);
        const std::size_t n = 32 * 32;
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += x[i];
            sy += y[i];
            sxx += static_cast<double>(x[i]) * x[i];
            syy += static_cast<double>(y[i]) * y[i];
            sxy += static_cast<double>(x[i]) * y[i];
        }
        const double cov = sxy / n - (sx / n) * (sy / n);
        const double vx = sxx / n - (sx / n) * (sx / n);
        const double vy = syy / n - (sy / n) * (sy / n);
        CHECK(cov / std::sqrt(vx * vy) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("match_moments applies the stated affine map") {
    Array3f a(1, 1, 4);
    a.v = {-1.0f, -0.5f, 0.5f, 1.0f}; // mean 0
    const ProjectionStack stack(std::move(a), TiltGeometry({0.0}));
    const double src_std = std::sqrt((1.0 + 0.25 + 0.25 + 1.0) / 4.0);
    PerTiltStats target = constant_stats(1, 10.0, 2.0 * src_std);
    const ProjectionStack out = noise::match_moments(stack, target);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(out.data.v[i] == doctest::Approx(2.0 * stack.data.v[i] + 10.0).epsilon(1e-6));
}

TEST_CASE("match_moments already at target is the identity") {
    const ProjectionStack stack = oracles::fixture_noiseless(3, 16, 16, 9, 5.0);
    const PerTiltStats own = noise::per_tilt_moments(stack);
    const ProjectionStack out = noise::match_moments(stack, own);
    for (std::size_t i = 0; i < out.data.v.size(); ++i)
        CHECK(std::abs(out.data.v[i] - stack.data.v[i]) < 1e-6 * (1.0 + std::abs(stack.data.v[i])));
}

TEST_CASE("match_moments rejects constant tilts with positive target std") {
    const ProjectionStack stack(Array3f(1, 4, 4, 2.0f), TiltGeometry({0.0}));
    try {
        noise::match_moments(stack, constant_stats(1, 0.0, 1.0));
        FAIL("expected DegenerateTilt");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_tilt);
    }
    // zero target std is fine: output pinned to the target mean
    const ProjectionStack out = noise::match_moments(stack, constant_stats(1, 7.0, 0.0));
    for (float v : out.data.v) CHECK(v == 7.0f);
}

TEST_CASE("extract_noise_sigma of identical stacks is zero") {
    const ProjectionStack stack = oracles::fixture_noiseless(5, 16, 16, 21, 10.0);
    const auto sigma = noise::extract_noise_sigma(stack, stack);
    for (double s : sigma) CHECK(s < 1e-5);
}

TEST_CASE("extract_noise_sigma recovers injected noise") {
    const ProjectionStack clean = oracles::fixture_noiseless(9, 64, 64, 33, 50.0);
    const std::vector<double> half(9, 0.5);
    const ProjectionStack target = noise::add_gaussian(clean, half, 1.0, 7711);
    const auto sigma = noise::extract_noise_sigma(target, clean);
    for (double s : sigma) {
        CHECK(s > 0.45);
        CHECK(s < 0.55);
    }
}

TEST_CASE("fit_sigma_poly recovers exact quadratics") {
    const TiltGeometry g = evenly_spaced_geometry(-60, 60, 61);
    std::vector<double> sig;
    for (double a : g.angles_deg()) sig.push_back(0.001 * a * a + 0.0 * a + 2.0);
    const auto poly = noise::fit_sigma_poly(g.angles_deg(), {sig});
    CHECK(std::abs(poly[0] - 0.001) < 1e-9);
    CHECK(std::abs(poly[1]) < 1e-9);
    CHECK(std::abs(poly[2] - 2.0) < 1e-9);
}

TEST_CASE("fit_sigma_poly on constants") {
    const TiltGeometry g = evenly_spaced_geometry(-60, 60, 7);
    const std::vector<double> sig(7, 3.0);
    const auto poly = noise::fit_sigma_poly(g.angles_deg(), {sig, sig});
    CHECK(std::abs(poly[0]) < 1e-12);
    CHECK(std::abs(poly[1]) < 1e-12);
    CHECK(poly[2] == doctest::Approx(3.0));
}

TEST_CASE("fit_sigma_poly under measurement noise") {
    const TiltGeometry g = evenly_spaced_geometry(-60, 60, 61);
    rng::Stream s(99, 0);
    std::vector<double> sig;
    for (double a : g.angles_deg()) sig.push_back(0.001 * a * a + 2.0 + 0.01 * s.next_normal());
    const auto poly = noise::fit_sigma_poly(g.angles_deg(), {sig});
    CHECK(std::abs(poly[0] - 0.001) < 2e-4);
    CHECK(std::abs(poly[2] - 2.0) < 0.05);
}

TEST_CASE("fit_sigma_poly needs three distinct angles and data") {
    CHECK_THROWS_AS(noise::fit_sigma_poly({0.0, 1.0}, {{1.0, 1.0}}), ValidationError);
    CHECK_THROWS_AS(noise::fit_sigma_poly({0.0, 1.0, 2.0}, {}), ValidationError);
}

TEST_CASE("add_gaussian with fraction 0 is bit-identical") {
    const ProjectionStack stack = oracles::fixture_noiseless(3, 16, 16, 4, 10.0);
    const ProjectionStack out = noise::add_gaussian(stack, {1.0, 2.0, 3.0}, 0.0, 5);
    CHECK(out.data.v == stack.data.v);
}

TEST_CASE("add_gaussian residual statistics follow sigma and fraction") {
    const ProjectionStack stack(Array3f(1, 128, 128, 0.0f), TiltGeometry({0.0}));
    const std::vector<double> sigma(1, 2.0);

    const ProjectionStack full = noise::add_gaussian(stack, sigma, 1.0, 31);
    double sum = 0.0, sum2 = 0.0;
    for (float v : full.data.v) {
        sum += v;
        sum2 += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(full.data.v.size());
    const double std_full = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    CHECK(std_full > 1.9);
    CHECK(std_full < 2.1);

    const ProjectionStack quarter = noise::add_gaussian(stack, sigma, 0.25, 31);
    sum = sum2 = 0.0;
    for (float v : quarter.data.v) {
        sum += v;
        sum2 += static_cast<double>(v) * v;
    }
    const double std_quarter = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    CHECK(std_quarter == doctest::Approx(0.25 * std_full).epsilon(0.05));
}

TEST_CASE("add_gaussian rejects negative sigma") {
    const ProjectionStack stack(Array3f(1, 4, 4, 0.0f), TiltGeometry({0.0}));
    CHECK_THROWS_AS(noise::add_gaussian(stack, {-1.0}, 1.0, 0), ValidationError);
}

TEST_CASE("simulate_baseline with zero sigma reduces to moment matching") {
    const ProjectionStack clean = oracles::fixture_noiseless(5, 32, 32, 44, 10.0);
    const auto model = fixture_model(clean.geometry, 2.0, 1.5, {0, 0, 0}, 0.0);
    const ProjectionStack out = noise::simulate_baseline(clean, model, 9);
    const ProjectionStack matched = noise::match_moments(clean, model.target_stats());
    for (std::size_t i = 0; i < out.data.v.size(); ++i)
        CHECK(std::abs(out.data.v[i] - matched.data.v[i]) < 1e-6);
}

TEST_CASE("simulate_baseline and simulate_noisy hold the moment contract") {
    const ProjectionStack clean = oracles::fixture_noiseless(61, 64, 64, 55, 10.0);
    const auto model = fixture_model(clean.geometry, 0.5, 2.0, {1e-4, 0.0, 1.0}, 1.0);

    for (const ProjectionStack& out : {noise::simulate_baseline(clean, model, 77),
                                       noise::simulate_noisy(clean, model, 1.0, 77)}) {
        const PerTiltStats got = noise::per_tilt_moments(out);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::abs(got.mean[i] - 0.5) < 1e-5);
            CHECK(std::abs(got.stdev[i] - 2.0) < 1e-5);
        }
    }
}

TEST_CASE("simulate_noisy with a constant law reproduces simulate_baseline exactly") {
    const ProjectionStack clean = oracles::fixture_noiseless(7, 32, 32, 66, 10.0);
    const auto model = fixture_model(clean.geometry, 0.0, 1.0, {0.0, 0.0, 0.8}, 0.8);
    const ProjectionStack a = noise::simulate_baseline(clean, model, 123);
    const ProjectionStack b = noise::simulate_noisy(clean, model, 1.0, 123);
    CHECK(a.data.v == b.data.v);
}

TEST_CASE("quadratic law raises the residual std at extreme angles before re-matching") {
    const ProjectionStack clean = oracles::fixture_noiseless(61, 32, 32, 77, 10.0);
    const auto model = fixture_model(clean.geometry, 0.0, 1.0, {5e-4, 0.0, 0.2}, 0.0);
    const ProjectionStack matched = noise::match_moments(clean, model.target_stats());
    const ProjectionStack noisy = noise::add_gaussian(matched, model.sigma_per_tilt(), 1.0, 8);
    auto residual_std = [&](std::size_t t) {
        const float* a = noisy.data.slice(t);
        const float* b = matched.data.slice(t);
        double sum = 0.0, sum2 = 0.0;
        const std::size_t n = 32 * 32;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(a[i]) - b[i];
            sum += d;
            sum2 += d * d;
        }
        return std::sqrt(sum2 / n - (sum / n) * (sum / n));
    };
    CHECK(residual_std(0) > residual_std(30));
    CHECK(residual_std(60) > residual_std(30));
}

TEST_CASE("stochastic ops are seed-deterministic and thread-count independent") {
    const ProjectionStack clean = oracles::fixture_noiseless(9, 32, 32, 88, 10.0);
    const auto model = fixture_model(clean.geometry, 1.0, 3.0, {1e-4, 0.0, 0.5}, 0.7);

    const int prev = omp_get_max_threads();
    omp_set_num_threads(1);
    const ProjectionStack serial = noise::simulate_noisy(clean, model, 0.25, 5);
    omp_set_num_threads(8);
    const ProjectionStack wide = noise::simulate_noisy(clean, model, 0.25, 5);
    omp_set_num_threads(prev);
    CHECK(serial.data.v == wide.data.v);

    const ProjectionStack again = noise::simulate_noisy(clean, model, 0.25, 5);
    CHECK(again.data.v == wide.data.v);
}

TEST_CASE("noise model rejects laws that go negative on the arc") {
    const TiltGeometry g = evenly_spaced_geometry(-60, 60, 61);
    CHECK_THROWS_AS(fixture_model(g, 0.0, 1.0, {0.0, 0.0, -0.1}, 0.0), ValidationError);
    CHECK_THROWS_AS(fixture_model(g, 0.0, 1.0, {-1e-3, 0.0, 1.0}, 0.0), ValidationError);
    CHECK_THROWS_AS(fixture_model(g, 0.0, 1.0, {0.0, 0.0, 1.0}, -1.0), ValidationError);
}

TEST_CASE("noise model files round-trip") {
    const TiltGeometry g = evenly_spaced_geometry(-60, 60, 5);
    PerTiltStats stats;
    stats.mean = {1, 2, 3, 4, 5};
    stats.stdev = {0.1, 0.2, 0.3, 0.4, 0.5};
    const noise::NoiseModel model(g, stats, {1e-4, 1e-5, 2.0}, 1.25);
    const std::string path = "/tmp/tiltforge_test_model.json";
    model.save(path);
    const noise::NoiseModel loaded = noise::NoiseModel::load(path);
    CHECK(loaded.geometry() == g);
    CHECK(loaded.target_stats().mean == stats.mean);
    CHECK(loaded.target_stats().stdev == stats.stdev);
    CHECK(loaded.sigma_poly() == model.sigma_poly());
    CHECK(loaded.global_sigma() == model.global_sigma());
    std::remove(path.c_str());
}

TEST_CASE("pipeline outputs pass stack validation") {
    const ProjectionStack clean = oracles::fixture_noiseless(5, 16, 16, 3, 10.0);
    const auto model = fixture_model(clean.geometry, 0.0, 1.0, {1e-4, 0.0, 0.3}, 0.4);
    CHECK_NOTHROW(validate_stack(noise::simulate_baseline(clean, model, 1)));
    CHECK_NOTHROW(validate_stack(noise::simulate_noisy(clean, model, 0.25, 1)));
    CHECK_NOTHROW(validate_stack(noise::match_moments(clean, model.target_stats())));
}

} // TEST_SUITE
