#ifndef TILTFORGE_CORE_HPP
#define TILTFORGE_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiltforge {

enum class Errc {
    shape_mismatch,
    non_finite_value,
    invalid_range,
    odd_dimension,
    empty_training_set,
    degenerate_tilt,
    insufficient_points,
    negative_sigma,
    shape_too_small,
    inconsistent_channels,
    missing_target,
    format_error,
    checksum_mismatch,
    truncated_file,
    io_error,
    index_out_of_range,
    missing_style,
    pairing_mismatch,
    geometry_mismatch,
    invalid_spec,
    invalid_argument,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what);
    Errc code() const { return code_; }

private:
    Errc code_;
};

/// Bad inputs or violated invariants (CLI exit code 3).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem and file-format failures (CLI exit code 2).
class IoError : public Error {
public:
    using Error::Error;
};

[[noreturn]] void throw_validation(Errc code, const std::string& what);
[[noreturn]] void throw_io(Errc code, const std::string& what);

/// Dense 3-D float array, row-major, index order (i0, i1, i2).
struct Array3f {
    std::size_t d0 = 0, d1 = 0, d2 = 0;
    std::vector<float> v;

    Array3f() = default;
    Array3f(std::size_t n0, std::size_t n1, std::size_t n2, float fill = 0.0f)
        : d0(n0), d1(n1), d2(n2), v(n0 * n1 * n2, fill) {}

    std::size_t size() const { return v.size(); }
    float& at(std::size_t i, std::size_t j, std::size_t k) { return v[(i * d1 + j) * d2 + k]; }
    float at(std::size_t i, std::size_t j, std::size_t k) const { return v[(i * d1 + j) * d2 + k]; }
    float* slice(std::size_t i) { return v.data() + i * d1 * d2; }
    const float* slice(std::size_t i) const { return v.data() + i * d1 * d2; }
    bool same_shape(const Array3f& o) const { return d0 == o.d0 && d1 == o.d1 && d2 == o.d2; }
};

/// Ordered acquisition arc. Angles are strictly increasing, in [-90, +90] degrees.
class TiltGeometry {
public:
    TiltGeometry() = default;
    explicit TiltGeometry(std::vector<double> angles_deg);

    const std::vector<double>& angles_deg() const { return angles_deg_; }
    std::size_t tilt_count() const { return angles_deg_.size(); }
    double angle(std::size_t i) const { return angles_deg_[i]; }
    bool operator==(const TiltGeometry& o) const { return angles_deg_ == o.angles_deg_; }

private:
    std::vector<double> angles_deg_;
};

TiltGeometry evenly_spaced_geometry(double min_deg, double max_deg, int count);

/// T x H x W stack of real-valued tilt images plus its acquisition geometry.
struct ProjectionStack {
    Array3f data;
    TiltGeometry geometry;

    ProjectionStack() = default;
    ProjectionStack(Array3f d, TiltGeometry g) : data(std::move(d)), geometry(std::move(g)) {}

    std::size_t tilts() const { return data.d0; }
    std::size_t height() const { return data.d1; }
    std::size_t width() const { return data.d2; }
};

/// D x H x W density grid (grandmodel or reconstruction), index order (depth, row, column).
struct DensityVolume {
    Array3f data;
    double voxel_size_nm = 1.0;

    DensityVolume() = default;
    explicit DensityVolume(Array3f d, double voxel_nm = 1.0)
        : data(std::move(d)), voxel_size_nm(voxel_nm) {}

    std::size_t depth() const { return data.d0; }
    std::size_t height() const { return data.d1; }
    std::size_t width() const { return data.d2; }
};

/// Per-tilt first and second moments (population standard deviation).
struct PerTiltStats {
    std::vector<double> mean;
    std::vector<double> stdev;

    std::size_t size() const { return mean.size(); }
};

void validate_stack(const ProjectionStack& stack);
void validate_volume(const DensityVolume& volume);
void validate_stats(const PerTiltStats& stats, std::size_t expected_tilts);

} // namespace tiltforge

#endif
