// Compares the OpenMP kernels against the serial reference implementations.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "tiltforge/fbp.hpp"
#include "tiltforge/featnet.hpp"
#include "tiltforge/noise.hpp"
#include "tiltforge/radon.hpp"
#include "tiltforge/reference.hpp"
#include "tiltforge/rng.hpp"

using namespace tiltforge;

namespace {

double time_ms(const std::function<void()>& fn, int repeats = 3) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        best = std::min(best, ms);
    }
    return best;
}

void report(const char* name, double serial_ms, double omp_ms) {
    std::printf("%-28s serial %9.1f ms   openmp %9.1f ms   speedup %.2fx\n", name, serial_ms,
                omp_ms, serial_ms / omp_ms);
}

} // namespace

int main() {
    const int threads = omp_get_max_threads();
    std::printf("openmp threads: %d\n\n", threads);

    // forward projection, 61 x 128 x 128 from a 48 x 128 x 128 volume
    Array3f vol_a(48, 128, 128);
    rng::Stream vs(1, 0);
    for (auto& v : vol_a.v) v = static_cast<float>(vs.next_unit());
    const DensityVolume volume(std::move(vol_a));
    const TiltGeometry geometry = evenly_spaced_geometry(-60, 60, 61);
    radon::ProjectionConfig config;
    config.negate = false;

    report("forward_project",
           time_ms([&] { ref::forward_project_serial(volume, geometry, config); }),
           time_ms([&] { radon::forward_project(volume, geometry, config); }));

    const ProjectionStack stack = radon::forward_project(volume, geometry, config);

    report("backproject",
           time_ms([&] { ref::backproject_serial(stack, 48); }),
           time_ms([&] { fbp::backproject_unweighted(stack, 48); }));

    const auto filter = fbp::build_filter(stack.height(), stack.width(),
                                          fbp::scale_spec_to_grid(fbp::FilterSpec{}, 128, 128));
    report("filter_projections",
           time_ms([&] {
               omp_set_num_threads(1);
               fbp::filter_projections(stack, filter);
               omp_set_num_threads(threads);
           }),
           time_ms([&] { fbp::filter_projections(stack, filter); }));

    report("per_tilt_moments",
           time_ms([&] { ref::per_tilt_moments_serial(stack); }),
           time_ms([&] { noise::per_tilt_moments(stack); }));

    const auto net = featnet::init_random<float>(featnet::default_layer_spec(), 3);
    featnet::FeatureMap<float> img(1, 128, 128);
    rng::Stream is(2, 0);
    for (auto& v : img.v) v = static_cast<float>(is.next_normal());
    const auto targets = featnet::make_targets(net, img, img);
    report("style_content_loss",
           time_ms([&] {
               omp_set_num_threads(1);
               featnet::style_content_loss(net, img, targets.content, targets.style, 1.0, 1.0);
               omp_set_num_threads(threads);
           }),
           time_ms([&] {
               featnet::style_content_loss(net, img, targets.content, targets.style, 1.0, 1.0);
           }));

    return 0;
}
