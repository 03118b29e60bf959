#include "tiltforge/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>

#include "tiltforge/core.hpp"

namespace tiltforge::png_io {

GrayImage normalize_slice(const float* data, std::size_t height, std::size_t width) {
    GrayImage img;
    img.width = width;
    img.height = height;
    const std::size_t n = height * width;
    img.bytes.resize(n);

    float lo = data[0], hi = data[0];
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, data[i]);
        hi = std::max(hi, data[i]);
    }
    img.lo = lo;
    img.hi = hi;
    if (hi == lo) {
        std::fill(img.bytes.begin(), img.bytes.end(), static_cast<std::uint8_t>(128));
        return img;
    }
    const double scale = 255.0 / (static_cast<double>(hi) - lo);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = (static_cast<double>(data[i]) - lo) * scale;
        img.bytes[i] = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, v))));
    }
    return img;
}

void write_png_gray(const std::string& path, const GrayImage& image) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw_io(Errc::io_error, "cannot open PNG file for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw_io(Errc::io_error, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw_io(Errc::io_error, "libpng write failed: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < image.height; ++y)
        png_write_row(png, const_cast<png_bytep>(image.bytes.data() + y * image.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace tiltforge::png_io
