#ifndef TILTFORGE_DETAIL_INTERP_HPP
#define TILTFORGE_DETAIL_INTERP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace tiltforge::detail {

// Bilinear sample of a (depth x width) slice at (z, x); grid points outside
// the slice contribute `pad` with their bilinear weight. Element (zi, xi)
// lives at base[zi * z_stride + xi], so non-contiguous slices (a fixed row of
// a (depth, row, column) volume) can be sampled in place.
inline double bilinear_pad(const float* base, long z_stride, long depth, long width, double z,
                           double x, double pad) {
    const double zf = std::floor(z);
    const double xf = std::floor(x);
    const long z0 = static_cast<long>(zf);
    const long x0 = static_cast<long>(xf);
    const double fz = z - zf;
    const double fx = x - xf;
    const double w00 = (1.0 - fz) * (1.0 - fx);
    const double w01 = (1.0 - fz) * fx;
    const double w10 = fz * (1.0 - fx);
    const double w11 = fz * fx;
    auto tap = [&](long zi, long xi, double w) -> double {
        const bool in = zi >= 0 && zi < depth && xi >= 0 && xi < width;
        return w * (in ? static_cast<double>(base[zi * z_stride + xi]) : pad);
    };
    return tap(z0, x0, w00) + tap(z0, x0 + 1, w01) + tap(z0 + 1, x0, w10) +
           tap(z0 + 1, x0 + 1, w11);
}

// Half-extent of the unit-step sampling range along a rotated ray so that the
// whole slice diagonal is covered at any angle.
inline long ray_half_steps(std::size_t depth, std::size_t width) {
    const double diag = std::hypot(static_cast<double>(depth), static_cast<double>(width));
    return static_cast<long>(std::ceil(diag / 2.0)) + 1;
}

// Integer step window [k0, k1] of a ray for which the bilinear footprint of
// sample k can touch the grid; samples outside are fully in padding.
// Coordinates along the ray: z(k) = z_at0 + dz * k, x(k) = x_at0 + dx * k.
struct StepWindow {
    long k0 = 0;
    long k1 = -1; // empty when k1 < k0
};

inline StepWindow ray_step_window(double z_at0, double dz, double x_at0, double dx, long depth,
                                  long width, long half) {
    double lo = -static_cast<double>(half);
    double hi = static_cast<double>(half);
    auto clip_axis = [&](double at0, double slope, double lim) -> bool {
        // keep k with at0 + slope*k in (-1, lim)
        if (std::abs(slope) < 1e-12) {
            return at0 > -1.0 && at0 < lim;
        }
        double a = (-1.0 - at0) / slope;
        double b = (lim - at0) / slope;
        if (a > b) std::swap(a, b);
        lo = std::max(lo, a);
        hi = std::min(hi, b);
        return true;
    };
    StepWindow win;
    if (!clip_axis(z_at0, dz, static_cast<double>(depth))) return win;
    if (!clip_axis(x_at0, dx, static_cast<double>(width))) return win;
    if (lo > hi) return win;
    win.k0 = static_cast<long>(std::ceil(lo));
    win.k1 = static_cast<long>(std::floor(hi));
    win.k0 = std::max(win.k0, -half);
    win.k1 = std::min(win.k1, half);
    return win;
}

} // namespace tiltforge::detail

#endif
