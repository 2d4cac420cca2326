#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "plotyield/binio.hpp"
#include "plotyield/error.hpp"
#include "plotyield/image.hpp"

namespace plotyield {

// ---------------------------------------------------------------------------
// PNG (8-bit gray or RGB)
// ---------------------------------------------------------------------------

inline Image read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) fail("io_open", "cannot open PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail("png_init", "failed to initialize libpng reader");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail("png_decode", "failed to decode PNG file: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail("png_channels", "unsupported PNG channel count after expansion");
    }

    std::vector<uint8_t> pixels(static_cast<size_t>(w) * h * channels);
    std::vector<png_bytep> row_ptrs(h);
    for (png_uint_32 y = 0; y < h; ++y)
        row_ptrs[y] = pixels.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    for (png_uint_32 y = 0; y < h; ++y)
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    from_u8(pixels[(static_cast<size_t>(y) * w + x) * channels + c]);
    return img;
}

inline void write_png(const std::string& path, const Image& img) {
    require(img.channels == 1 || img.channels == 3, "png_channels",
            "PNG output supports 1 or 3 channels");
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) fail("io_open", "cannot open PNG file for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail("png_init", "failed to initialize libpng writer");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail("png_encode", "failed to encode PNG file: " + path);
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<size_t>(x) * img.channels + c] = to_u8(img.at(c, y, x));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

// ---------------------------------------------------------------------------
// FIMG: raw planar float container.
// Layout: magic "FIMG", u32 width, u32 height, u32 channels (little-endian),
// then width*height*channels little-endian f32 values, one plane per channel.
// ---------------------------------------------------------------------------

inline void write_fimg(std::ostream& out, const Image& img) {
    out.write("FIMG", 4);
    binio::put_u32le(out, static_cast<uint32_t>(img.width));
    binio::put_u32le(out, static_cast<uint32_t>(img.height));
    binio::put_u32le(out, static_cast<uint32_t>(img.channels));
    for (float v : img.data) binio::put_f32le(out, v);
}

inline void write_fimg(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("io_open", "cannot open FIMG file for writing: " + path);
    write_fimg(out, img);
    if (!out) fail("io_write", "failed writing FIMG file: " + path);
}

inline Image read_fimg(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "FIMG", 4) != 0)
        fail("fimg_magic", "not a FIMG stream (bad magic)");
    uint32_t w = binio::get_u32le(in, "width");
    uint32_t h = binio::get_u32le(in, "height");
    uint32_t c = binio::get_u32le(in, "channels");
    require(w > 0 && h > 0 && w < (1u << 20) && h < (1u << 20), "fimg_header",
            "implausible FIMG dimensions");
    require(c == 1 || c == 3, "fimg_channels",
            "image FIMG must have 1 or 3 channels (feature maps load as tensors)");
    Image img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.channels = static_cast<int>(c);
    img.data.resize(static_cast<size_t>(w) * h * c);
    for (auto& v : img.data) v = binio::get_f32le(in, "payload");
    return img;
}

inline Image read_fimg(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io_open", "cannot open FIMG file: " + path);
    return read_fimg(in);
}

}  // namespace plotyield
