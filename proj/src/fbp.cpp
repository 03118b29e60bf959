#include "tiltforge/fbp.hpp"

#include <fftw3.h>
#include <omp.h>

#include <cmath>
#include <complex>
#include <memory>

#include "tiltforge/detail/interp.hpp"

namespace tiltforge::fbp {

namespace {

void check_spec(std::size_t height, std::size_t width, const FilterSpec& spec) {
    if (height < 2 || width < 2)
        throw_validation(Errc::invalid_spec, "filter grid must be at least 2x2");
    if (spec.enable_gaussian && !(spec.gaussian_sigma_x > 0.0 && spec.gaussian_sigma_y > 0.0))
        throw_validation(Errc::invalid_spec, "gaussian sigmas must be positive");
    if (spec.enable_ramp && !(spec.crowther_fraction > 0.0 && spec.crowther_fraction <= 1.0))
        throw_validation(Errc::invalid_spec, "crowther fraction must be in (0, 1]");
    if (spec.enable_circle && !(spec.radius_cutoff > 0.0))
        throw_validation(Errc::invalid_spec, "radius cutoff must be positive");
}

} // namespace

FrequencyFilter build_filter(std::size_t height, std::size_t width, const FilterSpec& spec) {
    check_spec(height, width, spec);

    FrequencyFilter filt;
    filt.height = height;
    filt.width = width;
    filt.v.assign(height * width, 1.0);

    const long h2 = static_cast<long>(height) / 2;
    const long w2 = static_cast<long>(width) / 2;
    const double fc = spec.crowther_fraction * (static_cast<double>(width) / 2.0);
    const double r2_cut = spec.radius_cutoff * spec.radius_cutoff;

    for (long iy = 0; iy < static_cast<long>(height); ++iy) {
        const double fy = static_cast<double>(iy - h2);
        for (long ix = 0; ix < static_cast<long>(width); ++ix) {
            const double fx = static_cast<double>(ix - w2);
            double value = 1.0;
            if (spec.enable_gaussian) {
                value *= std::exp(-(fx * fx / (2.0 * spec.gaussian_sigma_x * spec.gaussian_sigma_x) +
                                    fy * fy / (2.0 * spec.gaussian_sigma_y * spec.gaussian_sigma_y)));
            }
            if (spec.enable_ramp) {
                const double afx = std::abs(fx);
                double ramp;
                if (afx <= fc)
                    ramp = afx / fc;
                else
                    ramp = spec.ramp_zero_above_crowther ? 0.0 : 1.0;
                if (fx == 0.0) ramp = 0.0;
                value *= ramp;
            }
            if (spec.enable_circle) {
                if (fx * fx + fy * fy > r2_cut) value = 0.0;
            }
            filt.v[static_cast<std::size_t>(iy) * width + static_cast<std::size_t>(ix)] = value;
        }
    }
    return filt;
}

ProjectionStack filter_projections(const ProjectionStack& stack, const FrequencyFilter& filter) {
    validate_stack(stack);
    if (filter.height != stack.height() || filter.width != stack.width())
        throw_validation(Errc::shape_mismatch, "filter shape differs from projection shape");

    const long tilts = static_cast<long>(stack.tilts());
    const std::size_t h = stack.height();
    const std::size_t w = stack.width();
    const std::size_t n = h * w;

    // Filter values remapped to DFT bin order (DC at bin 0).
    std::vector<double> filt_dft(n);
    for (std::size_t ky = 0; ky < h; ++ky) {
        const long fy = ky < (h + 1) / 2 ? static_cast<long>(ky)
                                         : static_cast<long>(ky) - static_cast<long>(h);
        const std::size_t iy = static_cast<std::size_t>(fy + static_cast<long>(h) / 2);
        for (std::size_t kx = 0; kx < w; ++kx) {
            const long fx = kx < (w + 1) / 2 ? static_cast<long>(kx)
                                             : static_cast<long>(kx) - static_cast<long>(w);
            const std::size_t ix = static_cast<std::size_t>(fx + static_cast<long>(w) / 2);
            filt_dft[ky * w + kx] = filter.at(iy, ix);
        }
    }

    Array3f out(stack.tilts(), h, w);

    const int max_threads = omp_get_max_threads();
    std::vector<fftw_complex*> bufs(static_cast<std::size_t>(max_threads) * 2, nullptr);
    for (auto& b : bufs) b = fftw_alloc_complex(n);
    // Shared plans; execution uses the thread-safe new-array interface.
    fftw_plan fwd = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), bufs[0], bufs[1],
                                     FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), bufs[0], bufs[1],
                                     FFTW_BACKWARD, FFTW_ESTIMATE);

#pragma omp parallel for schedule(static)
    for (long t = 0; t < tilts; ++t) {
        const int tid = omp_get_thread_num();
        fftw_complex* in = bufs[static_cast<std::size_t>(tid) * 2];
        fftw_complex* spec = bufs[static_cast<std::size_t>(tid) * 2 + 1];
        const float* src = stack.data.slice(static_cast<std::size_t>(t));
        float* dst = out.slice(static_cast<std::size_t>(t));

        for (std::size_t i = 0; i < n; ++i) {
            in[i][0] = src[i];
            in[i][1] = 0.0;
        }
        fftw_execute_dft(fwd, in, spec);
        for (std::size_t i = 0; i < n; ++i) {
            spec[i][0] *= filt_dft[i];
            spec[i][1] *= filt_dft[i];
        }
        fftw_execute_dft(inv, spec, in);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(in[i][0] * inv_n);
    }

    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    for (auto& b : bufs) fftw_free(b);
    return ProjectionStack(std::move(out), stack.geometry);
}

namespace {

DensityVolume backproject_impl(const ProjectionStack& stack, std::size_t depth, double scale) {
    validate_stack(stack);
    if (depth < 1) throw_validation(Errc::invalid_argument, "depth must be at least 1");

    const long tilts = static_cast<long>(stack.tilts());
    const long height = static_cast<long>(stack.height());
    const long width = static_cast<long>(stack.width());
    const long dlong = static_cast<long>(depth);
    const double cz = (dlong - 1) / 2.0;
    const double cx = (width - 1) / 2.0;
    const long half = detail::ray_half_steps(depth, stack.width());

    Array3f vol(depth, stack.height(), stack.width());
    const long plane_stride = height * width;

#pragma omp parallel
    {
        std::vector<double> plane(static_cast<std::size_t>(dlong) * width);
#pragma omp for schedule(static)
        for (long y = 0; y < height; ++y) {
            std::fill(plane.begin(), plane.end(), 0.0);
            for (long t = 0; t < tilts; ++t) {
                const double a = stack.geometry.angle(static_cast<std::size_t>(t)) * M_PI / 180.0;
                const double c = std::cos(a);
                const double s = std::sin(a);
                const float* row = stack.data.slice(static_cast<std::size_t>(t)) + y * width;
                for (long xo = 0; xo < width; ++xo) {
                    const double val = row[xo];
                    if (val == 0.0) continue;
                    const double dx = xo - cx;
                    const double x_at0 = cx + c * dx;
                    const double z_at0 = cz + s * dx;
                    const auto win =
                        detail::ray_step_window(z_at0, c, x_at0, -s, dlong, width, half);
                    for (long k = win.k0; k <= win.k1; ++k) {
                        const double sx = x_at0 - s * k;
                        const double sz = z_at0 + c * k;
                        // transpose of the bilinear gather in forward_project
                        const double zf = std::floor(sz);
                        const double xf = std::floor(sx);
                        const long z0 = static_cast<long>(zf);
                        const long x0 = static_cast<long>(xf);
                        const double fz = sz - zf;
                        const double fx = sx - xf;
                        auto splat = [&](long zi, long xi, double wgt) {
                            if (zi >= 0 && zi < dlong && xi >= 0 && xi < width)
                                plane[static_cast<std::size_t>(zi * width + xi)] += wgt * val;
                        };
                        splat(z0, x0, (1.0 - fz) * (1.0 - fx));
                        splat(z0, x0 + 1, (1.0 - fz) * fx);
                        splat(z0 + 1, x0, fz * (1.0 - fx));
                        splat(z0 + 1, x0 + 1, fz * fx);
                    }
                }
            }
            float* dst_row = vol.v.data() + y * width;
            for (long z = 0; z < dlong; ++z)
                for (long x = 0; x < width; ++x)
                    dst_row[z * plane_stride + x] =
                        static_cast<float>(plane[static_cast<std::size_t>(z * width + x)] * scale);
        }
    }
    return DensityVolume(std::move(vol));
}

} // namespace

DensityVolume backproject(const ProjectionStack& stack, std::size_t depth) {
    const double scale = M_PI / (2.0 * static_cast<double>(stack.tilts()));
    return backproject_impl(stack, depth, scale);
}

DensityVolume backproject_unweighted(const ProjectionStack& stack, std::size_t depth) {
    return backproject_impl(stack, depth, 1.0);
}

FilterSpec scale_spec_to_grid(const FilterSpec& spec, std::size_t height, std::size_t width) {
    FilterSpec scaled = spec;
    scaled.gaussian_sigma_x = spec.gaussian_sigma_x * static_cast<double>(width) / 512.0;
    scaled.gaussian_sigma_y = spec.gaussian_sigma_y * static_cast<double>(height) / 512.0;
    scaled.radius_cutoff = spec.radius_cutoff * static_cast<double>(width) / 512.0;
    return scaled;
}

} // namespace tiltforge::fbp
