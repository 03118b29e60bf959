#ifndef TILTFORGE_RADON_HPP
#define TILTFORGE_RADON_HPP

#include "tiltforge/core.hpp"

namespace tiltforge::radon {

struct ProjectionConfig {
    /// Negate intensities after projection so denser regions appear darker,
    /// matching the attenuation convention of TEM images.
    bool negate = true;
    /// Value sampled outside the volume (vacuum).
    float pad_value = 0.0f;
};

/// Forward Radon projection of a volume into a tilt-series. The tilt axis is
/// the row axis (y); each row's x-z slice is rotated about the slice center
/// ((W-1)/2, (D-1)/2) by inverse mapping with bilinear interpolation and
/// summed along the rotated depth axis at unit step length.
ProjectionStack forward_project(const DensityVolume& volume, const TiltGeometry& geometry,
                                const ProjectionConfig& config = {});

/// 2x binning: each output pixel is the mean of the corresponding 2x2 block.
ProjectionStack bin2x(const ProjectionStack& stack);

} // namespace tiltforge::radon

#endif
