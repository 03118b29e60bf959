#include "tiltforge/radon.hpp"

#include <cmath>

#include "tiltforge/detail/interp.hpp"

namespace tiltforge::radon {

ProjectionStack forward_project(const DensityVolume& volume, const TiltGeometry& geometry,
                                const ProjectionConfig& config) {
    validate_volume(volume);
    if (!std::isfinite(config.pad_value))
        throw_validation(Errc::invalid_spec, "pad_value must be finite");

    const long depth = static_cast<long>(volume.depth());
    const long height = static_cast<long>(volume.height());
    const long width = static_cast<long>(volume.width());
    const long tilts = static_cast<long>(geometry.tilt_count());
    const double cz = (depth - 1) / 2.0;
    const double cx = (width - 1) / 2.0;
    const long half = detail::ray_half_steps(volume.depth(), volume.width());
    const long steps_total = 2 * half + 1;
    const double pad = config.pad_value;
    const double sign = config.negate ? -1.0 : 1.0;

    Array3f out(static_cast<std::size_t>(tilts), static_cast<std::size_t>(height),
                static_cast<std::size_t>(width));

#pragma omp parallel for collapse(2) schedule(static)
    for (long t = 0; t < tilts; ++t) {
        for (long y = 0; y < height; ++y) {
            const double a = geometry.angle(static_cast<std::size_t>(t)) * M_PI / 180.0;
            const double c = std::cos(a);
            const double s = std::sin(a);
            const float* slice = volume.data.v.data() + y * width; // row y of slab 0
            const long slab = height * width;                      // stride between depths
            float* row = out.slice(static_cast<std::size_t>(t)) + y * width;
            for (long xo = 0; xo < width; ++xo) {
                const double dx = xo - cx;
                // sample k: x(k) = cx + c*dx - s*k, z(k) = cz + s*dx + c*k
                const double x_at0 = cx + c * dx;
                const double z_at0 = cz + s * dx;
                const auto win =
                    detail::ray_step_window(z_at0, c, x_at0, -s, depth, width, half);
                double acc = 0.0;
                long covered = 0;
                for (long k = win.k0; k <= win.k1; ++k) {
                    const double sx = x_at0 - s * k;
                    const double sz = z_at0 + c * k;
                    acc += detail::bilinear_pad(slice, slab, depth, width, sz, sx, pad);
                    ++covered;
                }
                acc += pad * static_cast<double>(steps_total - covered);
                row[xo] = static_cast<float>(sign * acc);
            }
        }
    }
    return ProjectionStack(std::move(out), geometry);
}

ProjectionStack bin2x(const ProjectionStack& stack) {
    validate_stack(stack);
    if (stack.height() % 2 != 0 || stack.width() % 2 != 0)
        throw_validation(Errc::odd_dimension, "bin2x requires even image dimensions");

    const long tilts = static_cast<long>(stack.tilts());
    const long oh = static_cast<long>(stack.height() / 2);
    const long ow = static_cast<long>(stack.width() / 2);
    const long iw = static_cast<long>(stack.width());
    Array3f out(stack.tilts(), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow));

#pragma omp parallel for schedule(static)
    for (long t = 0; t < tilts; ++t) {
        const float* in = stack.data.slice(static_cast<std::size_t>(t));
        float* dst = out.slice(static_cast<std::size_t>(t));
        for (long y = 0; y < oh; ++y) {
            for (long x = 0; x < ow; ++x) {
                const double sum = static_cast<double>(in[(2 * y) * iw + 2 * x]) +
                                   in[(2 * y) * iw + 2 * x + 1] +
                                   in[(2 * y + 1) * iw + 2 * x] +
                                   in[(2 * y + 1) * iw + 2 * x + 1];
                dst[y * ow + x] = static_cast<float>(sum * 0.25);
            }
        }
    }
    return ProjectionStack(std::move(out), stack.geometry);
}

} // namespace tiltforge::radon
