#include "tiltforge/reference.hpp"

#include <cmath>
#include <vector>

namespace tiltforge::ref {

namespace {

double sample(const float* base, long z_stride, long depth, long width, double z, double x,
              double pad) {
    const long z0 = static_cast<long>(std::floor(z));
    const long x0 = static_cast<long>(std::floor(x));
    const double fz = z - std::floor(z);
    const double fx = x - std::floor(x);
    double out = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        for (int dx = 0; dx < 2; ++dx) {
            const long zi = z0 + dz;
            const long xi = x0 + dx;
            const double w = (dz ? fz : 1.0 - fz) * (dx ? fx : 1.0 - fx);
            const bool in = zi >= 0 && zi < depth && xi >= 0 && xi < width;
            out += w * (in ? static_cast<double>(base[zi * z_stride + xi]) : pad);
        }
    }
    return out;
}

long half_steps(std::size_t depth, std::size_t width) {
    return static_cast<long>(
               std::ceil(std::hypot(static_cast<double>(depth), static_cast<double>(width)) / 2.0)) +
           1;
}

} // namespace

ProjectionStack forward_project_serial(const DensityVolume& volume, const TiltGeometry& geometry,
                                       const radon::ProjectionConfig& config) {
    validate_volume(volume);
    const long depth = static_cast<long>(volume.depth());
    const long height = static_cast<long>(volume.height());
    const long width = static_cast<long>(volume.width());
    const double cz = (depth - 1) / 2.0;
    const double cx = (width - 1) / 2.0;
    const long half = half_steps(volume.depth(), volume.width());
    const long steps = 2 * half + 1;
    const double pad = config.pad_value;
    const double sign = config.negate ? -1.0 : 1.0;

    Array3f out(geometry.tilt_count(), volume.height(), volume.width());
    std::vector<double> rotated(static_cast<std::size_t>(steps) * width);

    for (std::size_t t = 0; t < geometry.tilt_count(); ++t) {
        const double a = geometry.angle(t) * M_PI / 180.0;
        const double c = std::cos(a);
        const double s = std::sin(a);
        for (long y = 0; y < height; ++y) {
            const float* base = volume.data.v.data() + y * width;
            for (long k = -half; k <= half; ++k) {
                for (long xo = 0; xo < width; ++xo) {
                    const double dx = xo - cx;
                    const double sx = cx + c * dx - s * k;
                    const double sz = cz + s * dx + c * k;
                    rotated[static_cast<std::size_t>(k + half) * width + xo] =
                        sample(base, height * width, depth, width, sz, sx, pad);
                }
            }
            float* row = out.slice(t) + y * width;
            for (long xo = 0; xo < width; ++xo) {
                double acc = 0.0;
                for (long k = 0; k < steps; ++k)
                    acc += rotated[static_cast<std::size_t>(k) * width + xo];
                row[xo] = static_cast<float>(sign * acc);
            }
        }
    }
    return ProjectionStack(std::move(out), geometry);
}

DensityVolume backproject_serial(const ProjectionStack& stack, std::size_t depth) {
    validate_stack(stack);
    const long tilts = static_cast<long>(stack.tilts());
    const long height = static_cast<long>(stack.height());
    const long width = static_cast<long>(stack.width());
    const long dlong = static_cast<long>(depth);
    const double cz = (dlong - 1) / 2.0;
    const double cx = (width - 1) / 2.0;
    const long half = half_steps(depth, stack.width());

    std::vector<double> acc(depth * stack.height() * stack.width(), 0.0);
    for (long t = 0; t < tilts; ++t) {
        const double a = stack.geometry.angle(static_cast<std::size_t>(t)) * M_PI / 180.0;
        const double c = std::cos(a);
        const double s = std::sin(a);
        for (long y = 0; y < height; ++y) {
            const float* row = stack.data.slice(static_cast<std::size_t>(t)) + y * width;
            for (long xo = 0; xo < width; ++xo) {
                const double val = row[xo];
                if (val == 0.0) continue;
                const double dx = xo - cx;
                for (long k = -half; k <= half; ++k) {
                    const double sx = cx + c * dx - s * k;
                    const double sz = cz + s * dx + c * k;
                    const long z0 = static_cast<long>(std::floor(sz));
                    const long x0 = static_cast<long>(std::floor(sx));
                    const double fz = sz - std::floor(sz);
                    const double fx = sx - std::floor(sx);
                    for (int dz = 0; dz < 2; ++dz) {
                        for (int dxi = 0; dxi < 2; ++dxi) {
                            const long zi = z0 + dz;
                            const long xi = x0 + dxi;
                            if (zi < 0 || zi >= dlong || xi < 0 || xi >= width) continue;
                            const double w = (dz ? fz : 1.0 - fz) * (dxi ? fx : 1.0 - fx);
                            acc[(static_cast<std::size_t>(zi) * height + y) * width + xi] +=
                                w * val;
                        }
                    }
                }
            }
        }
    }
    Array3f vol(depth, stack.height(), stack.width());
    for (std::size_t i = 0; i < acc.size(); ++i) vol.v[i] = static_cast<float>(acc[i]);
    return DensityVolume(std::move(vol));
}

PerTiltStats per_tilt_moments_serial(const ProjectionStack& stack) {
    validate_stack(stack);
    const std::size_t n = stack.height() * stack.width();
    PerTiltStats stats;
    for (std::size_t t = 0; t < stack.tilts(); ++t) {
        const float* p = stack.data.slice(t);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += p[i];
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = p[i] - mean;
            var += d * d;
        }
        stats.mean.push_back(mean);
        stats.stdev.push_back(std::sqrt(var / static_cast<double>(n)));
    }
    return stats;
}

} // namespace tiltforge::ref
