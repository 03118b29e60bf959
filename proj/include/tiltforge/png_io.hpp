#ifndef TILTFORGE_PNG_IO_HPP
#define TILTFORGE_PNG_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace tiltforge::png_io {

struct GrayImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> bytes;
    float lo = 0.0f, hi = 0.0f; // normalization bounds used
};

/// Linear min-max normalization of a slice to 8-bit gray; a constant slice
/// maps to mid-gray 128.
GrayImage normalize_slice(const float* data, std::size_t height, std::size_t width);

void write_png_gray(const std::string& path, const GrayImage& image);

} // namespace tiltforge::png_io

#endif
