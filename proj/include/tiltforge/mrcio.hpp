#ifndef TILTFORGE_MRCIO_HPP
#define TILTFORGE_MRCIO_HPP

#include <array>
#include <cstdint>
#include <string>

#include "tiltforge/core.hpp"

namespace tiltforge::mrcio {

/// Subset of the 1024-byte MRC2014 header this library interprets.
struct MrcHeader {
    std::int32_t nx = 0, ny = 0, nz = 0;
    std::int32_t mode = 2; // 0 int8, 1 int16, 2 float32, 6 uint16
    std::int32_t nsymbt = 0;
    std::array<std::int32_t, 3> map_crs = {1, 2, 3};
    double voxel_size_nm = 1.0;
    float dmin = 0.0f, dmax = 0.0f, dmean = 0.0f, rms = 0.0f;
    bool big_endian = false;
};

struct MrcData {
    Array3f data; // (z, y, x) -> (tilt/depth, row, column)
    MrcHeader header;
};

/// Reads modes 0/1/2/6, honors the machine stamp, skips extended headers and
/// honors MAPC/MAPR/MAPS axis permutations.
MrcData read_mrc(const std::string& path);

/// Writes mode 2 little-endian with machine stamp 0x44 0x44 0x00 0x00 and
/// populated statistics; byte-identical output for identical inputs.
void write_mrc(const std::string& path, const Array3f& data, double voxel_size_nm);

} // namespace tiltforge::mrcio

#endif
