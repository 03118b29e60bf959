#include "tiltforge/mrcio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace tiltforge::mrcio {

namespace {

constexpr std::size_t kHeaderBytes = 1024;

void put_i32(unsigned char* p, std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    p[0] = static_cast<unsigned char>(u & 0xff);
    p[1] = static_cast<unsigned char>((u >> 8) & 0xff);
    p[2] = static_cast<unsigned char>((u >> 16) & 0xff);
    p[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

void put_f32(unsigned char* p, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_i32(p, static_cast<std::int32_t>(bits));
}

std::int32_t get_i32(const unsigned char* p, bool big) {
    std::uint32_t u;
    if (big)
        u = static_cast<std::uint32_t>(p[3]) | static_cast<std::uint32_t>(p[2]) << 8 |
            static_cast<std::uint32_t>(p[1]) << 16 | static_cast<std::uint32_t>(p[0]) << 24;
    else
        u = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
            static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
    return static_cast<std::int32_t>(u);
}

float get_f32(const unsigned char* p, bool big) {
    const std::int32_t i = get_i32(p, big);
    float v;
    std::memcpy(&v, &i, 4);
    return v;
}

std::size_t mode_bytes(std::int32_t mode) {
    switch (mode) {
        case 0: return 1;
        case 1: return 2;
        case 2: return 4;
        case 6: return 2;
        default: return 0;
    }
}

} // namespace

MrcData read_mrc(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io(Errc::io_error, "cannot open MRC file: " + path);
    std::vector<unsigned char> hdr(kHeaderBytes);
    in.read(reinterpret_cast<char*>(hdr.data()), static_cast<std::streamsize>(kHeaderBytes));
    if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes))
        throw_io(Errc::truncated_file, "MRC header shorter than 1024 bytes: " + path);

    // Machine stamp decides endianness; 0x11 marks big-endian, anything else
    // is treated as little-endian (many writers leave the stamp blank).
    const bool big = hdr[212] == 0x11;

    MrcHeader header;
    header.big_endian = big;
    header.nx = get_i32(&hdr[0], big);
    header.ny = get_i32(&hdr[4], big);
    header.nz = get_i32(&hdr[8], big);
    header.mode = get_i32(&hdr[12], big);
    header.nsymbt = get_i32(&hdr[92], big);
    header.map_crs = {get_i32(&hdr[64], big), get_i32(&hdr[68], big), get_i32(&hdr[72], big)};
    header.dmin = get_f32(&hdr[76], big);
    header.dmax = get_f32(&hdr[80], big);
    header.dmean = get_f32(&hdr[84], big);
    header.rms = get_f32(&hdr[216], big);

    if (header.nx < 1 || header.ny < 1 || header.nz < 1)
        throw_io(Errc::format_error, "MRC dimensions must be positive: " + path);
    const std::size_t bpp = mode_bytes(header.mode);
    if (bpp == 0)
        throw_io(Errc::format_error,
                 "unsupported MRC mode " + std::to_string(header.mode) + ": " + path);
    if (header.nsymbt < 0)
        throw_io(Errc::format_error, "negative extended header size: " + path);

    const float cella_x = get_f32(&hdr[40], big);
    if (cella_x > 0.0f && std::isfinite(cella_x))
        header.voxel_size_nm = static_cast<double>(cella_x) / header.nx / 10.0;

    auto perm_ok = [&]() {
        int seen[4] = {0, 0, 0, 0};
        for (int a : header.map_crs) {
            if (a < 1 || a > 3) return false;
            seen[a]++;
        }
        return seen[1] == 1 && seen[2] == 1 && seen[3] == 1;
    };
    if (!perm_ok()) header.map_crs = {1, 2, 3};

    in.seekg(static_cast<std::streamoff>(kHeaderBytes) + header.nsymbt, std::ios::beg);
    const std::size_t count = static_cast<std::size_t>(header.nx) *
                              static_cast<std::size_t>(header.ny) *
                              static_cast<std::size_t>(header.nz);
    std::vector<unsigned char> raw(count * bpp);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw_io(Errc::truncated_file, "MRC payload shorter than header promises: " + path);

    std::vector<float> values(count);
    switch (header.mode) {
        case 0:
            for (std::size_t i = 0; i < count; ++i)
                values[i] = static_cast<float>(static_cast<std::int8_t>(raw[i]));
            break;
        case 1:
            for (std::size_t i = 0; i < count; ++i) {
                const unsigned char* p = &raw[i * 2];
                const auto u = big ? static_cast<std::uint16_t>(p[1] | p[0] << 8)
                                   : static_cast<std::uint16_t>(p[0] | p[1] << 8);
                values[i] = static_cast<float>(static_cast<std::int16_t>(u));
            }
            break;
        case 6:
            for (std::size_t i = 0; i < count; ++i) {
                const unsigned char* p = &raw[i * 2];
                const auto u = big ? static_cast<std::uint16_t>(p[1] | p[0] << 8)
                                   : static_cast<std::uint16_t>(p[0] | p[1] << 8);
                values[i] = static_cast<float>(u);
            }
            break;
        case 2:
            for (std::size_t i = 0; i < count; ++i) values[i] = get_f32(&raw[i * 4], big);
            break;
    }

    // File order is (section, row, column); map_crs names the spatial axis
    // (1=x, 2=y, 3=z) along each. Internal order is (z, y, x).
    const std::array<std::int32_t, 3> crs = header.map_crs;
    MrcData out;
    out.header = header;
    if (crs == std::array<std::int32_t, 3>{1, 2, 3}) {
        out.data.d0 = static_cast<std::size_t>(header.nz);
        out.data.d1 = static_cast<std::size_t>(header.ny);
        out.data.d2 = static_cast<std::size_t>(header.nx);
        out.data.v = std::move(values);
    } else {
        std::size_t size_axis[4] = {};
        size_axis[crs[0]] = static_cast<std::size_t>(header.nx);
        size_axis[crs[1]] = static_cast<std::size_t>(header.ny);
        size_axis[crs[2]] = static_cast<std::size_t>(header.nz);
        out.data = Array3f(size_axis[3], size_axis[2], size_axis[1]);
        std::size_t i = 0;
        std::size_t coord[4] = {};
        for (std::int32_t s = 0; s < header.nz; ++s) {
            for (std::int32_t r = 0; r < header.ny; ++r) {
                for (std::int32_t c = 0; c < header.nx; ++c, ++i) {
                    coord[crs[0]] = static_cast<std::size_t>(c);
                    coord[crs[1]] = static_cast<std::size_t>(r);
                    coord[crs[2]] = static_cast<std::size_t>(s);
                    out.data.at(coord[3], coord[2], coord[1]) = values[i];
                }
            }
        }
    }
    return out;
}

void write_mrc(const std::string& path, const Array3f& data, double voxel_size_nm) {
    if (data.d0 < 1 || data.d1 < 1 || data.d2 < 1)
        throw_validation(Errc::shape_mismatch, "MRC data must be at least 1x1x1");
    if (!(voxel_size_nm > 0.0))
        throw_validation(Errc::invalid_argument, "voxel size must be positive");
    for (float v : data.v)
        if (!std::isfinite(v))
            throw_validation(Errc::non_finite_value, "MRC payload contains non-finite values");

    double sum = 0.0, sum2 = 0.0;
    float dmin = std::numeric_limits<float>::max();
    float dmax = std::numeric_limits<float>::lowest();
    for (float v : data.v) {
        sum += v;
        sum2 += static_cast<double>(v) * v;
        dmin = std::min(dmin, v);
        dmax = std::max(dmax, v);
    }
    const double mean = sum / static_cast<double>(data.size());
    const double var = std::max(0.0, sum2 / static_cast<double>(data.size()) - mean * mean);

    std::vector<unsigned char> hdr(kHeaderBytes, 0);
    const auto nx = static_cast<std::int32_t>(data.d2);
    const auto ny = static_cast<std::int32_t>(data.d1);
    const auto nz = static_cast<std::int32_t>(data.d0);
    put_i32(&hdr[0], nx);
    put_i32(&hdr[4], ny);
    put_i32(&hdr[8], nz);
    put_i32(&hdr[12], 2); // mode: float32
    put_i32(&hdr[28], nx); // mx, my, mz
    put_i32(&hdr[32], ny);
    put_i32(&hdr[36], nz);
    const double ang_per_voxel = voxel_size_nm * 10.0;
    put_f32(&hdr[40], static_cast<float>(nx * ang_per_voxel));
    put_f32(&hdr[44], static_cast<float>(ny * ang_per_voxel));
    put_f32(&hdr[48], static_cast<float>(nz * ang_per_voxel));
    put_f32(&hdr[52], 90.0f);
    put_f32(&hdr[56], 90.0f);
    put_f32(&hdr[60], 90.0f);
    put_i32(&hdr[64], 1);
    put_i32(&hdr[68], 2);
    put_i32(&hdr[72], 3);
    put_f32(&hdr[76], dmin);
    put_f32(&hdr[80], dmax);
    put_f32(&hdr[84], static_cast<float>(mean));
    put_i32(&hdr[88], 0);  // ispg
    put_i32(&hdr[92], 0);  // nsymbt
    put_i32(&hdr[108], 20140); // NVERSION
    hdr[208] = 'M';
    hdr[209] = 'A';
    hdr[210] = 'P';
    hdr[211] = ' ';
    hdr[212] = 0x44;
    hdr[213] = 0x44;
    hdr[214] = 0x00;
    hdr[215] = 0x00;
    put_f32(&hdr[216], static_cast<float>(std::sqrt(var)));
    put_i32(&hdr[220], 0); // nlabl

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io(Errc::io_error, "cannot open MRC file for writing: " + path);
    out.write(reinterpret_cast<const char*>(hdr.data()), static_cast<std::streamsize>(hdr.size()));

    std::vector<unsigned char> payload(data.size() * 4);
    for (std::size_t i = 0; i < data.size(); ++i) put_f32(&payload[i * 4], data.v[i]);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw_io(Errc::io_error, "failed writing MRC file: " + path);
}

} // namespace tiltforge::mrcio
