#include "tiltforge/core.hpp"

#include <cmath>
#include <sstream>

namespace tiltforge {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::non_finite_value: return "NonFiniteValue";
        case Errc::invalid_range: return "InvalidRange";
        case Errc::odd_dimension: return "OddDimension";
        case Errc::empty_training_set: return "EmptyTrainingSet";
        case Errc::degenerate_tilt: return "DegenerateTilt";
        case Errc::insufficient_points: return "InsufficientPoints";
        case Errc::negative_sigma: return "NegativeSigma";
        case Errc::shape_too_small: return "ShapeTooSmall";
        case Errc::inconsistent_channels: return "InconsistentChannels";
        case Errc::missing_target: return "MissingTarget";
        case Errc::format_error: return "FormatError";
        case Errc::checksum_mismatch: return "ChecksumMismatch";
        case Errc::truncated_file: return "TruncatedFile";
        case Errc::io_error: return "IoError";
        case Errc::index_out_of_range: return "IndexOutOfRange";
        case Errc::missing_style: return "MissingStyle";
        case Errc::pairing_mismatch: return "PairingMismatch";
        case Errc::geometry_mismatch: return "GeometryMismatch";
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::invalid_argument: return "InvalidArgument";
    }
    return "UnknownError";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

void throw_validation(Errc code, const std::string& what) { throw ValidationError(code, what); }
void throw_io(Errc code, const std::string& what) { throw IoError(code, what); }

TiltGeometry::TiltGeometry(std::vector<double> angles_deg) : angles_deg_(std::move(angles_deg)) {
    if (angles_deg_.empty())
        throw_validation(Errc::invalid_range, "geometry needs at least one tilt angle");
    double prev = -1e30;
    for (double a : angles_deg_) {
        if (!std::isfinite(a) || a < -90.0 || a > 90.0)
            throw_validation(Errc::invalid_range, "tilt angle outside [-90, +90] degrees");
        if (a <= prev)
            throw_validation(Errc::invalid_range, "tilt angles must be strictly increasing");
        prev = a;
    }
}

TiltGeometry evenly_spaced_geometry(double min_deg, double max_deg, int count) {
    if (!(min_deg < max_deg))
        throw_validation(Errc::invalid_range, "min angle must be below max angle");
    if (count < 2)
        throw_validation(Errc::invalid_range, "evenly spaced geometry needs at least 2 tilts");
    std::vector<double> angles(static_cast<std::size_t>(count));
    const double step = (max_deg - min_deg) / (count - 1);
    for (int i = 0; i < count; ++i)
        angles[static_cast<std::size_t>(i)] = min_deg + step * i;
    angles.back() = max_deg; // endpoints exact
    return TiltGeometry(std::move(angles));
}

namespace {

void check_finite(const std::vector<float>& v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            std::ostringstream os;
            os << what << " contains a non-finite value at flat index " << i;
            throw_validation(Errc::non_finite_value, os.str());
        }
    }
}

} // namespace

void validate_stack(const ProjectionStack& stack) {
    if (stack.data.d0 != stack.geometry.tilt_count()) {
        std::ostringstream os;
        os << "stack has " << stack.data.d0 << " tilts but geometry has "
           << stack.geometry.tilt_count() << " angles";
        throw_validation(Errc::shape_mismatch, os.str());
    }
    if (stack.data.d1 < 1 || stack.data.d2 < 1)
        throw_validation(Errc::shape_mismatch, "stack images must be at least 1x1");
    check_finite(stack.data.v, "projection stack");
}

void validate_volume(const DensityVolume& volume) {
    if (volume.data.d0 < 1 || volume.data.d1 < 1 || volume.data.d2 < 1)
        throw_validation(Errc::shape_mismatch, "volume dimensions must be at least 1");
    if (!(volume.voxel_size_nm > 0.0))
        throw_validation(Errc::invalid_argument, "voxel size must be positive");
    check_finite(volume.data.v, "density volume");
}

void validate_stats(const PerTiltStats& stats, std::size_t expected_tilts) {
    if (stats.mean.size() != expected_tilts || stats.stdev.size() != expected_tilts)
        throw_validation(Errc::shape_mismatch, "per-tilt stats length differs from tilt count");
    for (double s : stats.stdev)
        if (!(s >= 0.0))
            throw_validation(Errc::negative_sigma, "per-tilt std must be non-negative");
}

} // namespace tiltforge
