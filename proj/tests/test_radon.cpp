#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tiltforge/radon.hpp"
#include "tiltforge/reference.hpp"

using namespace tiltforge;

namespace {

double rel_l2(const std::vector<float>& a, const std::vector<float>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        num += d * d;
        den += static_cast<double>(b[i]) * b[i];
    }
    return std::sqrt(num / den);
}

} // namespace

TEST_SUITE("radon") {

TEST_CASE("zero volume projects to a zero stack") {
    const DensityVolume vol(Array3f(8, 8, 8, 0.0f));
    const auto stack = radon::forward_project(vol, evenly_spaced_geometry(-60, 60, 5));
    for (float v : stack.data.v) CHECK(v == 0.0f);
}

TEST_CASE("0-degree projection equals direct depth summation") {
    const DensityVolume vol = oracles::random_volume(16, 16, 16, 11);
    radon::ProjectionConfig config;
    config.negate = false;
    const auto stack = radon::forward_project(vol, TiltGeometry({0.0}), config);
    for (std::size_t y = 0; y < 16; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
            double direct = 0.0;
            for (std::size_t z = 0; z < 16; ++z) direct += vol.data.at(z, y, x);
            CHECK(std::abs(stack.data.at(0, y, x) - direct) < 1e-4);
        }
    }
}

TEST_CASE("negation flips the projection sign") {
    const DensityVolume vol = oracles::random_volume(8, 8, 8, 3);
    radon::ProjectionConfig pos;
    pos.negate = false;
    radon::ProjectionConfig neg;
    neg.negate = true;
    const auto geometry = TiltGeometry({-30.0, 20.0});
    const auto a = radon::forward_project(vol, geometry, pos);
    const auto b = radon::forward_project(vol, geometry, neg);
    for (std::size_t i = 0; i < a.data.v.size(); ++i)
        CHECK(a.data.v[i] == doctest::Approx(-b.data.v[i]));
}

TEST_CASE("oblique projections match the ray-marching oracle") {
    const DensityVolume vol = oracles::random_volume(16, 16, 16, 7);
    radon::ProjectionConfig config;
    config.negate = false;
    for (double angle : {33.0, -60.0}) {
        const TiltGeometry g({angle});
        const auto fast = radon::forward_project(vol, g, config);
        const auto oracle = oracles::radon_ray_march(vol, g);
        CHECK(rel_l2(fast.data.v, oracle.data.v) < 2e-2);
    }
}

TEST_CASE("mass is conserved over angles for a compactly supported phantom") {
    const DensityVolume vol = oracles::disk_cylinder(64, 4, 18.0);
    radon::ProjectionConfig config;
    config.negate = false;
    const auto stack = radon::forward_project(vol, evenly_spaced_geometry(-60, 60, 61), config);
    std::vector<double> mass(stack.tilts(), 0.0);
    for (std::size_t t = 0; t < stack.tilts(); ++t) {
        const float* p = stack.data.slice(t);
        for (std::size_t i = 0; i < stack.height() * stack.width(); ++i) mass[t] += p[i];
    }
    const double m0 = mass[0];
    for (double m : mass) CHECK(std::abs(m - m0) / m0 < 1e-3);
}

TEST_CASE("forward projection is linear") {
    const DensityVolume v1 = oracles::random_volume(12, 6, 12, 1);
    const DensityVolume v2 = oracles::random_volume(12, 6, 12, 2);
    DensityVolume mix(Array3f(12, 6, 12));
    for (std::size_t i = 0; i < mix.data.v.size(); ++i)
        mix.data.v[i] = 2.0f * v1.data.v[i] - 0.5f * v2.data.v[i];

    const TiltGeometry g({-45.0, 10.0, 60.0});
    radon::ProjectionConfig config;
    config.negate = false;
    const auto p1 = radon::forward_project(v1, g, config);
    const auto p2 = radon::forward_project(v2, g, config);
    const auto pm = radon::forward_project(mix, g, config);
    for (std::size_t i = 0; i < pm.data.v.size(); ++i)
        CHECK(pm.data.v[i] ==
              doctest::Approx(2.0 * p1.data.v[i] - 0.5 * p2.data.v[i]).epsilon(1e-4));
}

TEST_CASE("rotationally symmetric volumes project identically at all angles") {
    // compact C^3 bump; band-limited enough that the slightly anisotropic
    // bilinear smoothing stays below the tolerance
    Array3f a(96, 4, 96, 0.0f);
    for (std::size_t z = 0; z < 96; ++z)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 96; ++x) {
                const double r2 = ((static_cast<double>(z) - 47.5) * (static_cast<double>(z) - 47.5) +
                                   (static_cast<double>(x) - 47.5) * (static_cast<double>(x) - 47.5)) /
                                  (40.0 * 40.0);
                if (r2 < 1.0) a.at(z, y, x) = static_cast<float>(std::pow(1.0 - r2, 3.0));
            }
    const DensityVolume vol(std::move(a));
    radon::ProjectionConfig config;
    config.negate = false;
    const auto stack = radon::forward_project(vol, evenly_spaced_geometry(-60, 60, 7), config);
    const float* first = stack.data.slice(0);
    double ref_norm = 0.0;
    for (std::size_t i = 0; i < stack.height() * stack.width(); ++i)
        ref_norm += static_cast<double>(first[i]) * first[i];
    for (std::size_t t = 1; t < stack.tilts(); ++t) {
        const float* p = stack.data.slice(t);
        double diff = 0.0;
        for (std::size_t i = 0; i < stack.height() * stack.width(); ++i) {
            const double d = static_cast<double>(p[i]) - first[i];
            diff += d * d;
        }
        CHECK(std::sqrt(diff / ref_norm) < 1e-3);
    }
}

TEST_CASE("openmp kernel agrees with the serial reference") {
    const DensityVolume vol = oracles::random_volume(16, 8, 16, 99);
    const TiltGeometry g = evenly_spaced_geometry(-60, 60, 9);
    const auto fast = radon::forward_project(vol, g);
    const auto slow = ref::forward_project_serial(vol, g);
    REQUIRE(fast.data.v.size() == slow.data.v.size());
    for (std::size_t i = 0; i < fast.data.v.size(); ++i)
        CHECK(fast.data.v[i] == doctest::Approx(slow.data.v[i]).epsilon(1e-6));
}

TEST_CASE("bin2x averages 2x2 blocks") {
    Array3f a(1, 2, 2);
    a.v = {1.0f, 2.0f, 3.0f, 4.0f};
    const ProjectionStack stack(std::move(a), TiltGeometry({0.0}));
    const auto binned = radon::bin2x(stack);
    REQUIRE(binned.height() == 1);
    REQUIRE(binned.width() == 1);
    CHECK(binned.data.v[0] == doctest::Approx(2.5));
}

TEST_CASE("bin2x keeps constants constant and geometry unchanged") {
    const ProjectionStack stack(Array3f(3, 8, 8, 7.25f), evenly_spaced_geometry(-30, 30, 3));
    const auto binned = radon::bin2x(stack);
    CHECK(binned.tilts() == 3);
    CHECK(binned.height() == 4);
    CHECK(binned.width() == 4);
    CHECK(binned.geometry == stack.geometry);
    for (float v : binned.data.v) CHECK(v == 7.25f);
}

TEST_CASE("bin2x rejects odd dimensions") {
    const ProjectionStack stack(Array3f(1, 3, 4, 0.0f), TiltGeometry({0.0}));
    try {
        radon::bin2x(stack);
        FAIL("expected OddDimension");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::odd_dimension);
    }
}

} // TEST_SUITE
