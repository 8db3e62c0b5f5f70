#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "duomic/imaging.hpp"
#include "duomic/png_io.hpp"
#include "duomic/rng.hpp"

using namespace duomic;

TEST_CASE("normalize_channel: linear map with half-away rounding") {
    PlaneF raw(4, 4, 10.0f);
    raw.at(0, 0) = 10.0f;
    raw.at(0, 1) = 110.0f;
    raw.at(0, 2) = 60.0f;  // (60-10)/100*255 = 127.5 -> 128
    auto out = normalize_channel(raw);
    CHECK(out.at(0, 0) == 0);
    CHECK(out.at(0, 1) == 255);
    CHECK(out.at(0, 2) == 128);
}

TEST_CASE("normalize_channel: constant plane maps to zeros") {
    PlaneF raw(8, 8, 42.0f);
    auto out = normalize_channel(raw);
    for (auto v : out.v) CHECK(v == 0);
}

TEST_CASE("normalize_channel: full-range input keeps endpoints") {
    PlaneF raw(2, 2);
    raw.v = {0.0f, 255.0f, 128.0f, 64.0f};
    auto out = normalize_channel(raw);
    CHECK(out.v[0] == 0);
    CHECK(out.v[1] == 255);
    CHECK(out.v[2] == 128);
    CHECK(out.v[3] == 64);
}

TEST_CASE("normalize_channel: rejects NaN and Inf") {
    PlaneF raw(2, 2, 1.0f);
    raw.v[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(normalize_channel(raw), ValueError);
    raw.v[3] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(normalize_channel(raw), ValueError);
}

TEST_CASE("normalize_channel: min->0 and max->255 on random planes") {
    Rng rng(17);
    for (int t = 0; t < 20; ++t) {
        PlaneF raw(16, 16);
        for (auto& v : raw.v) v = float(rng.uniform(0, 4096));
        auto out = normalize_channel(raw);
        std::uint8_t lo = 255, hi = 0;
        for (auto v : out.v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == 0);
        CHECK(hi == 255);
    }
}

TEST_CASE("fuse_channels: SHG x1.3 in green, AF x1.0 in blue, red zero") {
    PlaneU8 af(2, 2, 50);
    PlaneU8 shg(2, 2, 100);
    shg.at(0, 1) = 200;  // 260 -> clamp 255
    auto img = fuse_channels(af, shg);
    CHECK(img.at(0, 0, 1) == 130);
    CHECK(img.at(0, 1, 1) == 255);
    CHECK(img.at(0, 0, 2) == 50);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 2; ++x) CHECK(img.at(y, x, 0) == 0);
}

TEST_CASE("fuse_channels: red plane is bit-exactly zero for random input") {
    Rng rng(5);
    PlaneU8 af(32, 32), shg(32, 32);
    for (auto& v : af.v) v = std::uint8_t(rng.uniform_int(256));
    for (auto& v : shg.v) v = std::uint8_t(rng.uniform_int(256));
    auto img = fuse_channels(af, shg);
    for (std::size_t i = 0; i < img.h * img.w; ++i) CHECK(img.rgb[i * 3] == 0);
}

TEST_CASE("fuse_channels: dimension mismatch is an error") {
    PlaneU8 af(4, 4), shg(4, 5);
    CHECK_THROWS_AS(fuse_channels(af, shg), DimensionError);
}

TEST_CASE("rotate: zero angle is the identity") {
    Rng rng(6);
    FusedImage img(16, 16);
    for (auto& v : img.rgb) v = std::uint8_t(rng.uniform_int(256));
    auto out = rotate(img, 0.0);
    CHECK(out.rgb == img.rgb);
}

TEST_CASE("augment: sampled angles stay within +/-30 with near-zero mean") {
    double sum = 0;
    for (int i = 0; i < 10'000; ++i) {
        AugmentParams p;
        p.seed = std::uint64_t(i) + 1;
        const double a = sample_rotation_angle(p);
        CHECK(std::abs(a) <= 30.0);
        sum += a;
    }
    CHECK(std::abs(sum / 10'000) < 1.0);
}

TEST_CASE("augment: deterministic per seed and size-preserving") {
    Rng rng(7);
    FusedImage img(24, 24);
    for (auto& v : img.rgb) v = std::uint8_t(rng.uniform_int(256));
    AugmentParams p;
    p.seed = 99;
    auto a = augment(img, p);
    auto b = augment(img, p);
    CHECK(a.h == img.h);
    CHECK(a.w == img.w);
    CHECK(a.rgb == b.rgb);
    p.enable_rotation = false;
    auto c = augment(img, p);
    CHECK(c.rgb == img.rgb);
}

TEST_CASE("rotate: +20 then -20 approximately restores a smooth gradient") {
    const std::size_t n = 64;
    FusedImage img(n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img.at(y, x, c) = std::uint8_t((x * 255 / (n - 1) + y * 255 / (n - 1)) / 2);
    auto round_trip = rotate(rotate(img, 20.0), -20.0);
    double mae = 0;
    std::size_t count = 0;
    for (std::size_t y = n / 4; y < 3 * n / 4; ++y)
        for (std::size_t x = n / 4; x < 3 * n / 4; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                mae += std::abs(int(round_trip.at(y, x, c)) - int(img.at(y, x, c)));
                ++count;
            }
    CHECK(mae / count < 10.0);
}

TEST_CASE("resize: same size is the identity") {
    Rng rng(8);
    FusedImage img(20, 20);
    for (auto& v : img.rgb) v = std::uint8_t(rng.uniform_int(256));
    auto out = resize(img, 20, 20);
    CHECK(out.rgb == img.rgb);
}

TEST_CASE("resize: upscaling a constant image stays constant") {
    FusedImage img(16, 16);
    for (auto& v : img.rgb) v = 77;
    auto out = resize(img, 32, 32);
    for (auto v : out.rgb) CHECK(v == 77);
}

TEST_CASE("resize: checkerboard downscale preserves the mean") {
    FusedImage img(64, 64);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = ((x + y) % 2) ? 255 : 0;
    auto out = resize(img, 32, 32);
    double mean_in = 0, mean_out = 0;
    for (auto v : img.rgb) mean_in += v;
    for (auto v : out.rgb) mean_out += v;
    mean_in /= double(img.rgb.size());
    mean_out /= double(out.rgb.size());
    CHECK(std::abs(mean_in - mean_out) <= 2.0);
}

TEST_CASE("png roundtrip: 16-bit grayscale and 8-bit RGB") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "duomic_png_test";
    fs::create_directories(dir);

    Rng rng(9);
    PlaneU16 gray(40, 33);
    for (auto& v : gray.v) v = std::uint16_t(rng.uniform_int(65536));
    write_gray16_png(dir / "g.png", gray);
    auto [back, depth] = read_gray_plane(dir / "g.png");
    REQUIRE(depth == 16);
    REQUIRE(back.h == gray.h);
    REQUIRE(back.w == gray.w);
    for (std::size_t i = 0; i < gray.size(); ++i) CHECK(back.v[i] == float(gray.v[i]));

    FusedImage img(21, 17);
    for (auto& v : img.rgb) v = std::uint8_t(rng.uniform_int(256));
    write_rgb8_png(dir / "c.png", img);
    auto rgb = read_rgb8_png(dir / "c.png");
    CHECK(rgb.rgb == img.rgb);

    CHECK_THROWS_AS(read_gray_plane(dir / "missing.png"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("tiff: minimal uncompressed gray reader") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "duomic_tiff_test";
    fs::create_directories(dir);
    const fs::path path = dir / "t.tif";

    // hand-built little-endian 8-bit 4x2 TIFF, single strip
    const std::uint8_t px[8] = {10, 20, 30, 40, 50, 60, 70, 80};
    std::vector<std::uint8_t> buf;
    auto w16 = [&](std::uint16_t v) {
        buf.push_back(v & 0xff);
        buf.push_back(v >> 8);
    };
    auto w32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back((v >> (8 * i)) & 0xff);
    };
    buf.insert(buf.end(), {'I', 'I', 42, 0});
    w32(16);                                      // IFD offset
    buf.insert(buf.end(), px, px + 8);            // pixel strip at offset 8
    REQUIRE(buf.size() == 16);
    w16(7);                                       // 7 entries
    auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t count,
                     std::uint32_t value) {
        w16(tag);
        w16(type);
        w32(count);
        w32(value);
    };
    entry(256, 3, 1, 4);   // width
    entry(257, 3, 1, 2);   // height
    entry(258, 3, 1, 8);   // bits per sample
    entry(259, 3, 1, 1);   // compression: none
    entry(273, 4, 1, 8);   // strip offset
    entry(277, 3, 1, 1);   // samples per pixel
    entry(279, 4, 1, 8);   // strip byte count
    w32(0);                // next IFD

    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    REQUIRE(f);
    std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);

    auto [plane, depth] = read_gray_plane(path);
    CHECK(depth == 8);
    REQUIRE(plane.h == 2);
    REQUIRE(plane.w == 4);
    for (std::size_t i = 0; i < 8; ++i) CHECK(plane.v[i] == float(px[i]));
    fs::remove_all(dir);
}
