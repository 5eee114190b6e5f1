#ifndef VDIFF_IO_IMAGE_PNG_HPP
#define VDIFF_IO_IMAGE_PNG_HPP

#include <png.h>

#include <cstdio>
#include <filesystem>

#include "core/tensor.hpp"

namespace vd {

inline uint8_t to_u8(float v) {
    float c = std::clamp(v, 0.0f, 1.0f);
    return (uint8_t)std::lround(c * 255.0f);
}

// planar (3,h,w) float in [0,1] -> 8-bit RGB PNG
inline void write_png(const std::string& path, const Tensor& img) {
    VD_CHECK_CONTRACT(img.ndim() == 3 && img.shape[0] == 3, "write_png: expects (3,h,w)");
    int64_t h = img.shape[1], w = img.shape[2];
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw io_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw io_error("write_png: libpng failure on " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, (png_uint_32)w, (png_uint_32)h, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(w * 3);
    for (int64_t y = 0; y < h; y++) {
        for (int64_t x = 0; x < w; x++)
            for (int c = 0; c < 3; c++) row[x * 3 + c] = to_u8(img[(c * h + y) * w + x]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline Tensor read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw io_error("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw io_error("read_png: libpng failure on " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    int64_t w = png_get_image_width(png, info);
    int64_t h = png_get_image_height(png, info);
    std::vector<uint8_t> raw(h * w * 3);
    std::vector<png_bytep> rows(h);
    for (int64_t y = 0; y < h; y++) rows[y] = raw.data() + y * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    Tensor img({3, h, w});
    for (int64_t y = 0; y < h; y++)
        for (int64_t x = 0; x < w; x++)
            for (int c = 0; c < 3; c++)
                img[(c * h + y) * w + x] = raw[(y * w + x) * 3 + c] / 255.0f;
    return img;
}

// frames as frame_00.png, frame_01.png, ... in a directory
inline void write_frames(const std::string& dir, const std::vector<Tensor>& frames) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (size_t i = 0; i < frames.size(); i++) {
        std::snprintf(name, sizeof(name), "frame_%02zu.png", i);
        write_png(dir + "/" + name, frames[i]);
    }
}

inline std::vector<Tensor> read_frames(const std::string& dir) {
    std::vector<Tensor> frames;
    char name[32];
    for (size_t i = 0;; i++) {
        std::snprintf(name, sizeof(name), "frame_%02zu.png", i);
        std::string p = dir + "/" + name;
        if (!std::filesystem::exists(p)) break;
        frames.push_back(read_png(p));
    }
    if (frames.empty()) throw io_error("read_frames: no frame_*.png in " + dir);
    return frames;
}

}  // namespace vd

#endif
