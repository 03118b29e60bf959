#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tiltforge/mrcio.hpp"
#include "tiltforge/rng.hpp"

using namespace tiltforge;

namespace {

const std::string dir = "/tmp/tiltforge_mrc_tests";

std::string path_in_dir(const std::string& name) {
    std::filesystem::create_directories(dir);
    return dir + "/" + name;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// hand-built little-endian header with the few fields the reader interprets
std::vector<unsigned char> make_header(int nx, int ny, int nz, int mode, bool big = false) {
    std::vector<unsigned char> h(1024, 0);
    auto put = [&](std::size_t off, std::uint32_t v) {
        if (big) {
            h[off] = static_cast<unsigned char>(v >> 24);
            h[off + 1] = static_cast<unsigned char>(v >> 16);
            h[off + 2] = static_cast<unsigned char>(v >> 8);
            h[off + 3] = static_cast<unsigned char>(v);
        } else {
            h[off] = static_cast<unsigned char>(v);
            h[off + 1] = static_cast<unsigned char>(v >> 8);
            h[off + 2] = static_cast<unsigned char>(v >> 16);
            h[off + 3] = static_cast<unsigned char>(v >> 24);
        }
    };
    put(0, static_cast<std::uint32_t>(nx));
    put(4, static_cast<std::uint32_t>(ny));
    put(8, static_cast<std::uint32_t>(nz));
    put(12, static_cast<std::uint32_t>(mode));
    put(64, 1);
    put(68, 2);
    put(72, 3);
    h[208] = 'M';
    h[209] = 'A';
    h[210] = 'P';
    h[211] = ' ';
    if (big) {
        h[212] = 0x11;
        h[213] = 0x11;
    } else {
        h[212] = 0x44;
        h[213] = 0x44;
    }
    return h;
}

} // namespace

TEST_SUITE("mrcio") {

TEST_CASE("mode-2 round trip is bit-identical") {
    Array3f a(5, 7, 9);
    rng::Stream s(42, 0);
    for (auto& v : a.v) v = static_cast<float>(s.next_normal());
    const std::string path = path_in_dir("roundtrip.mrc");
    mrcio::write_mrc(path, a, 0.5);
    const mrcio::MrcData back = mrcio::read_mrc(path);
    CHECK(back.data.d0 == 5);
    CHECK(back.data.d1 == 7);
    CHECK(back.data.d2 == 9);
    CHECK(back.data.v == a.v);
    CHECK(back.header.mode == 2);
    CHECK(back.header.voxel_size_nm == doctest::Approx(0.5));
}

TEST_CASE("1x1x1 volume gives a 1028-byte file") {
    Array3f a(1, 1, 1);
    a.v = {3.5f};
    const std::string path = path_in_dir("tiny.mrc");
    mrcio::write_mrc(path, a, 1.0);
    CHECK(std::filesystem::file_size(path) == 1028);
}

TEST_CASE("writes are byte-deterministic") {
    Array3f a(2, 3, 4);
    rng::Stream s(1, 1);
    for (auto& v : a.v) v = static_cast<float>(s.next_normal());
    const std::string p1 = path_in_dir("det1.mrc");
    const std::string p2 = path_in_dir("det2.mrc");
    mrcio::write_mrc(p1, a, 1.0);
    mrcio::write_mrc(p2, a, 1.0);
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("header statistics are populated") {
    Array3f a(1, 2, 2);
    a.v = {0.0f, 1.0f, 2.0f, 3.0f};
    const std::string path = path_in_dir("stats.mrc");
    mrcio::write_mrc(path, a, 1.0);
    const mrcio::MrcData back = mrcio::read_mrc(path);
    CHECK(back.header.dmin == 0.0f);
    CHECK(back.header.dmax == 3.0f);
    CHECK(back.header.dmean == 1.5f);
}

TEST_CASE("truncated payloads are reported") {
    Array3f a(2, 8, 8);
    const std::string path = path_in_dir("trunc.mrc");
    mrcio::write_mrc(path, a, 1.0);
    std::filesystem::resize_file(path, 1024 + 100);
    try {
        mrcio::read_mrc(path);
        FAIL("expected TruncatedFile");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::truncated_file);
    }
    std::filesystem::resize_file(path, 500);
    CHECK_THROWS_AS(mrcio::read_mrc(path), IoError);
}

TEST_CASE("mode 1 integers promote to floats") {
    auto h = make_header(3, 1, 1, 1);
    const std::string path = path_in_dir("mode1.mrc");
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(h.data()), 1024);
    const std::int16_t vals[3] = {-1, 0, 7};
    out.write(reinterpret_cast<const char*>(vals), 6);
    out.close();
    const mrcio::MrcData back = mrcio::read_mrc(path);
    CHECK(back.data.v == std::vector<float>{-1.0f, 0.0f, 7.0f});
}

TEST_CASE("mode 0 is signed bytes, mode 6 is unsigned shorts") {
    {
        auto h = make_header(2, 1, 1, 0);
        const std::string path = path_in_dir("mode0.mrc");
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(h.data()), 1024);
        const std::int8_t vals[2] = {-5, 100};
        out.write(reinterpret_cast<const char*>(vals), 2);
        out.close();
        CHECK(mrcio::read_mrc(path).data.v == std::vector<float>{-5.0f, 100.0f});
    }
    {
        auto h = make_header(2, 1, 1, 6);
        const std::string path = path_in_dir("mode6.mrc");
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(h.data()), 1024);
        const std::uint16_t vals[2] = {0, 40000};
        out.write(reinterpret_cast<const char*>(vals), 4);
        out.close();
        CHECK(mrcio::read_mrc(path).data.v == std::vector<float>{0.0f, 40000.0f});
    }
}

TEST_CASE("big-endian files are byte-swapped via the machine stamp") {
    auto h = make_header(2, 1, 1, 1, true);
    const std::string path = path_in_dir("bigendian.mrc");
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(h.data()), 1024);
    const unsigned char payload[4] = {0xff, 0xff, 0x00, 0x07}; // BE: -1, 7
    out.write(reinterpret_cast<const char*>(payload), 4);
    out.close();
    const mrcio::MrcData back = mrcio::read_mrc(path);
    CHECK(back.header.big_endian);
    CHECK(back.data.v == std::vector<float>{-1.0f, 7.0f});
}

TEST_CASE("axis permutations are honored on read") {
    // file stores columns=z (mapc=3), rows=y, sections=x; 2x1x3 spatial volume
    auto h = make_header(/*nx=*/2, /*ny=*/1, /*nz=*/3, 2);
    // mapc=3, mapr=2, maps=1
    h[64] = 3;
    h[72] = 1;
    const std::string path = path_in_dir("permuted.mrc");
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(h.data()), 1024);
    // value at (c, r, s) = z * 10 + x where z = c, x = s
    for (int s = 0; s < 3; ++s)
        for (int c = 0; c < 2; ++c) {
            const float v = static_cast<float>(c * 10 + s);
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    out.close();
    const mrcio::MrcData back = mrcio::read_mrc(path);
    REQUIRE(back.data.d0 == 2); // z
    REQUIRE(back.data.d1 == 1); // y
    REQUIRE(back.data.d2 == 3); // x
    for (std::size_t z = 0; z < 2; ++z)
        for (std::size_t x = 0; x < 3; ++x)
            CHECK(back.data.at(z, 0, x) == doctest::Approx(static_cast<double>(z * 10 + x)));
}

TEST_CASE("unsupported modes are rejected") {
    auto h = make_header(1, 1, 1, 4);
    const std::string path = path_in_dir("badmode.mrc");
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(h.data()), 1024);
    const float v = 0.0f;
    out.write(reinterpret_cast<const char*>(&v), 4);
    out.close();
    try {
        mrcio::read_mrc(path);
        FAIL("expected FormatError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::format_error);
    }
}

TEST_CASE("non-finite payloads are rejected on write") {
    Array3f a(1, 1, 2);
    a.v = {1.0f, std::numeric_limits<float>::infinity()};
    CHECK_THROWS_AS(mrcio::write_mrc(path_in_dir("inf.mrc"), a, 1.0), ValidationError);
}

} // TEST_SUITE
