#ifndef TILTFORGE_FBP_HPP
#define TILTFORGE_FBP_HPP

#include <cstddef>
#include <vector>

#include "tiltforge/core.hpp"

namespace tiltforge::fbp {

/// Composite reconstruction filter: 2D Gaussian x ramp-with-Crowther x circular
/// cutoff. All parameters are in frequency-grid pixels (integer offsets from
/// DC); defaults are the reverse-engineered values for a 512 grid.
struct FilterSpec {
    double gaussian_sigma_x = 174.0;
    double gaussian_sigma_y = 102.0;
    double crowther_fraction = 0.61; // of Nyquist
    double radius_cutoff = 256.0;
    bool enable_gaussian = true;
    bool enable_ramp = true;
    bool enable_circle = true;
    /// Alternative Crowther reading: zero the ramp above f_c instead of
    /// holding it constant.
    bool ramp_zero_above_crowther = false;
};

/// DC-centered h x w frequency filter. Index (iy, ix) corresponds to the
/// integer frequency offset (fy, fx) = (iy - h/2, ix - w/2).
struct FrequencyFilter {
    std::size_t height = 0, width = 0;
    std::vector<double> v;

    double at(std::size_t iy, std::size_t ix) const { return v[iy * width + ix]; }
};

FrequencyFilter build_filter(std::size_t height, std::size_t width, const FilterSpec& spec);

/// Per tilt: 2D DFT, multiply by the DC-centered filter, inverse DFT, real part.
ProjectionStack filter_projections(const ProjectionStack& stack, const FrequencyFilter& filter);

/// Back-projection smearing each tilt image along its acquisition direction;
/// exact adjoint of radon::forward_project (negate=false, pad 0), scaled by
/// pi/(2T).
DensityVolume backproject(const ProjectionStack& stack, std::size_t depth);

/// Adjoint without the pi/(2T) weighting; used for operator-consistency checks.
DensityVolume backproject_unweighted(const ProjectionStack& stack, std::size_t depth);

/// Scales the 512-grid-referenced pixel parameters of `spec` to a w x h grid.
FilterSpec scale_spec_to_grid(const FilterSpec& spec, std::size_t height, std::size_t width);

} // namespace tiltforge::fbp

#endif
