#include "duomic/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace duomic {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw DataError("cannot open " + path.string());
    return f;
}

thread_local std::string png_last_error;

// libpng is C; errors must leave via longjmp, never via a C++ throw.
[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    png_last_error = msg ? msg : "unknown";
    png_longjmp(png, 1);
}

void png_warn_fn(png_structp, png_const_charp) {}

bool is_png_magic(const unsigned char* m) {
    static const unsigned char sig[4] = {0x89, 'P', 'N', 'G'};
    return std::memcmp(m, sig, 4) == 0;
}

bool is_tiff_magic(const unsigned char* m) {
    return (m[0] == 'I' && m[1] == 'I' && m[2] == 42 && m[3] == 0) ||
           (m[0] == 'M' && m[1] == 'M' && m[2] == 0 && m[3] == 42);
}

// ---- minimal TIFF reader: uncompressed, single-channel, strip layout ----

std::uint16_t rd16(const unsigned char* p, bool le) {
    return le ? std::uint16_t(p[0] | (p[1] << 8)) : std::uint16_t((p[0] << 8) | p[1]);
}
std::uint32_t rd32(const unsigned char* p, bool le) {
    return le ? (std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                 (std::uint32_t(p[3]) << 24))
              : ((std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                 (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]));
}

std::pair<PlaneF, int> read_tiff_gray(const std::vector<unsigned char>& buf,
                                      const std::string& name) {
    if (buf.size() < 8) throw FormatError(name + ": truncated TIFF");
    const bool le = buf[0] == 'I';
    const std::uint32_t ifd_off = rd32(&buf[4], le);
    if (ifd_off + 2 > buf.size()) throw FormatError(name + ": truncated TIFF directory");
    const std::uint16_t n_entries = rd16(&buf[ifd_off], le);

    std::uint32_t width = 0, height = 0, bits = 8, compression = 1, spp = 1;
    std::vector<std::uint32_t> strip_offsets, strip_counts;
    std::uint32_t rows_per_strip = 0xffffffffu;

    auto tag_values = [&](const unsigned char* e) {
        const std::uint16_t type = rd16(e + 2, le);
        const std::uint32_t count = rd32(e + 4, le);
        const std::size_t elem = type == 3 ? 2 : 4;  // SHORT or LONG
        std::vector<std::uint32_t> vals;
        const unsigned char* src;
        if (count * elem <= 4) {
            src = e + 8;
        } else {
            const std::uint32_t off = rd32(e + 8, le);
            if (off + count * elem > buf.size()) throw FormatError(name + ": TIFF value overrun");
            src = &buf[off];
        }
        for (std::uint32_t i = 0; i < count; ++i)
            vals.push_back(elem == 2 ? rd16(src + 2 * i, le) : rd32(src + 4 * i, le));
        return vals;
    };

    for (std::uint16_t i = 0; i < n_entries; ++i) {
        const std::size_t pos = ifd_off + 2 + std::size_t(i) * 12;
        if (pos + 12 > buf.size()) throw FormatError(name + ": truncated TIFF entry");
        const unsigned char* e = &buf[pos];
        const std::uint16_t tag = rd16(e, le);
        switch (tag) {
            case 256: width = tag_values(e)[0]; break;
            case 257: height = tag_values(e)[0]; break;
            case 258: bits = tag_values(e)[0]; break;
            case 259: compression = tag_values(e)[0]; break;
            case 273: strip_offsets = tag_values(e); break;
            case 277: spp = tag_values(e)[0]; break;
            case 278: rows_per_strip = tag_values(e)[0]; break;
            case 279: strip_counts = tag_values(e); break;
            default: break;
        }
    }
    if (compression != 1) throw FormatError(name + ": only uncompressed TIFF is supported");
    if (spp != 1) throw FormatError(name + ": TIFF must be single-channel");
    if (bits != 8 && bits != 16) throw FormatError(name + ": TIFF must be 8- or 16-bit");
    if (!width || !height || strip_offsets.empty())
        throw FormatError(name + ": TIFF missing required tags");

    PlaneF plane(height, width);
    const std::size_t bytes_per_row = std::size_t(width) * (bits / 8);
    std::size_t row = 0;
    for (std::size_t s = 0; s < strip_offsets.size() && row < height; ++s) {
        const std::size_t rows_here =
            std::min<std::size_t>(rows_per_strip, height - row);
        const std::size_t need = rows_here * bytes_per_row;
        if (strip_offsets[s] + need > buf.size()) throw FormatError(name + ": TIFF strip overrun");
        const unsigned char* src = &buf[strip_offsets[s]];
        for (std::size_t r = 0; r < rows_here; ++r, ++row)
            for (std::size_t x = 0; x < width; ++x) {
                const unsigned char* px = src + r * bytes_per_row + x * (bits / 8);
                plane.at(row, x) = bits == 8 ? float(px[0]) : float(rd16(px, le));
            }
    }
    return {std::move(plane), int(bits)};
}

}  // namespace

std::pair<PlaneF, int> read_gray_plane(const std::filesystem::path& path) {
    auto f = open_file(path, "rb");
    unsigned char magic[8] = {};
    const std::size_t got = std::fread(magic, 1, 8, f.get());
    if (got >= 4 && is_tiff_magic(magic)) {
        std::fseek(f.get(), 0, SEEK_END);
        const long sz = std::ftell(f.get());
        std::fseek(f.get(), 0, SEEK_SET);
        std::vector<unsigned char> buf(static_cast<std::size_t>(sz));
        if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
            throw FormatError(path.string() + ": short read");
        return read_tiff_gray(buf, path.string());
    }
    if (got < 8 || !is_png_magic(magic))
        throw FormatError(path.string() + ": not a PNG or TIFF file");
    std::fseek(f.get(), 0, SEEK_SET);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    png_infop info = png_create_info_struct(png);
    std::vector<unsigned char> row;
    PlaneF plane;
    int out_depth = 8;
    bool bad_color = false;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        if (bad_color) throw FormatError(path.string() + ": expected a grayscale plane");
        throw FormatError(path.string() + ": " + png_last_error);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
        bad_color = true;
        png_error(png, "color type");
    }
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_swap(png);  // file is big-endian
    png_read_update_info(png, info);

    out_depth = depth == 16 ? 16 : 8;
    row.resize(std::size_t(w) * (out_depth / 8));
    plane = PlaneF(h, w);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            if (out_depth == 16) {
                std::uint16_t v;
                std::memcpy(&v, &row[2 * x], 2);
                plane.at(y, x) = float(v);
            } else {
                plane.at(y, x) = float(row[x]);
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return {std::move(plane), out_depth};
}

void write_gray16_png(const std::filesystem::path& path, const PlaneU16& plane) {
    auto f = open_file(path, "wb");
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint16_t> row(plane.w);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError(path.string() + ": " + png_last_error);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(plane.w),
                 static_cast<png_uint_32>(plane.h), 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);  // native little-endian rows
    for (std::size_t y = 0; y < plane.h; ++y) {
        std::memcpy(row.data(), &plane.v[y * plane.w], plane.w * 2);
        png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

void write_rgb8_png(const std::filesystem::path& path, const FusedImage& img) {
    auto f = open_file(path, "wb");
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError(path.string() + ": " + png_last_error);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.h; ++y)
        png_write_row(png, const_cast<png_bytep>(&img.rgb[y * img.w * 3]));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

FusedImage read_rgb8_png(const std::filesystem::path& path) {
    auto f = open_file(path, "rb");
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    png_infop info = png_create_info_struct(png);
    FusedImage img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": " + png_last_error);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    img = FusedImage(h, w);
    for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, &img.rgb[y * w * 3], nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace duomic
