#ifndef TILTFORGE_REFERENCE_HPP
#define TILTFORGE_REFERENCE_HPP

#include "tiltforge/core.hpp"
#include "tiltforge/radon.hpp"

namespace tiltforge::ref {

/// Serial textbook forward projection: materialize each rotated slice on the
/// extended grid, then sum along the rotated depth axis. Kept as the
/// reference the OpenMP kernels are tested and benchmarked against.
ProjectionStack forward_project_serial(const DensityVolume& volume, const TiltGeometry& geometry,
                                       const radon::ProjectionConfig& config = {});

/// Serial back-projection (adjoint splat), unweighted.
DensityVolume backproject_serial(const ProjectionStack& stack, std::size_t depth);

/// Serial per-tilt moments.
PerTiltStats per_tilt_moments_serial(const ProjectionStack& stack);

} // namespace tiltforge::ref

#endif
