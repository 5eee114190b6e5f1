#ifndef VDIFF_IO_GIF_HPP
#define VDIFF_IO_GIF_HPP

#include <fstream>
#include <map>

#include "io/image_png.hpp"

namespace vd {

namespace gif_detail {

struct BitPacker {
    std::vector<uint8_t> bytes;
    uint32_t cur = 0;
    int nbits = 0;

    void push(uint32_t code, int width) {
        cur |= code << nbits;
        nbits += width;
        while (nbits >= 8) {
            bytes.push_back((uint8_t)(cur & 0xff));
            cur >>= 8;
            nbits -= 8;
        }
    }
    void flush() {
        if (nbits > 0) bytes.push_back((uint8_t)(cur & 0xff));
        cur = 0;
        nbits = 0;
    }
};

// GIF-flavor LZW over palette indices. The code width grows right after
// emitting the code at which `next` has reached the current capacity, which
// is what stock decoders expect.
inline std::vector<uint8_t> lzw_encode(const std::vector<uint8_t>& indices, int min_code_size) {
    const int clear = 1 << min_code_size;
    const int eoi = clear + 1;
    BitPacker out;
    std::map<std::pair<int, uint8_t>, int> dict;
    int next = eoi + 1;
    int width = min_code_size + 1;
    auto emit = [&](int code) {
        out.push(code, width);
        if (next >= (1 << width) && width < 12) width++;
    };
    emit(clear);
    int cur = -1;
    for (uint8_t ix : indices) {
        if (cur < 0) {
            cur = ix;
            continue;
        }
        auto it = dict.find({cur, ix});
        if (it != dict.end()) {
            cur = it->second;
            continue;
        }
        emit(cur);
        dict[{cur, ix}] = next++;
        cur = ix;
        if (next == 4096) {
            emit(clear);
            dict.clear();
            next = eoi + 1;
            width = min_code_size + 1;
        }
    }
    if (cur >= 0) emit(cur);
    out.push(eoi, width);
    out.flush();
    return out.bytes;
}

inline void put_u16(std::ostream& os, uint16_t v) {
    os.put((char)(v & 0xff));
    os.put((char)(v >> 8));
}

}  // namespace gif_detail

// GIF89a with a local palette per frame and infinite looping. Palette is the
// frame's exact color set when it fits, otherwise a uniform 6x7x6 RGB cube.
inline void export_gif(const std::string& path, const std::vector<Tensor>& frames, int fps) {
    VD_CHECK_CONTRACT(!frames.empty(), "export_gif: need at least one frame");
    VD_CHECK_CONFIG(fps >= 1 && fps <= 100, "export_gif: fps out of range");
    int64_t h = frames[0].shape[1], w = frames[0].shape[2];
    for (auto& f : frames)
        VD_CHECK_CONTRACT(f.ndim() == 3 && f.shape[0] == 3 && f.shape[1] == h && f.shape[2] == w,
                          "export_gif: frames must share (3,h,w)");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("export_gif: cannot open " + path);
    os.write("GIF89a", 6);
    gif_detail::put_u16(os, (uint16_t)w);
    gif_detail::put_u16(os, (uint16_t)h);
    os.put((char)0x70);  // no global color table, 8-bit color resolution
    os.put((char)0);     // background color
    os.put((char)0);     // aspect

    // netscape loop extension, loop forever
    const uint8_t loop[] = {0x21, 0xff, 0x0b, 'N', 'E', 'T', 'S', 'C', 'A', 'P',
                            'E',  '2',  '.',  '0', 3,   1,   0,   0,   0};
    os.write((const char*)loop, sizeof(loop));

    for (size_t fi = 0; fi < frames.size(); fi++) {
        const Tensor& img = frames[fi];
        // quantize and build palette
        std::vector<uint32_t> pix(h * w);
        for (int64_t y = 0; y < h; y++)
            for (int64_t x = 0; x < w; x++) {
                uint32_t r = to_u8(img[(0 * h + y) * w + x]);
                uint32_t g = to_u8(img[(1 * h + y) * w + x]);
                uint32_t b = to_u8(img[(2 * h + y) * w + x]);
                pix[y * w + x] = (r << 16) | (g << 8) | b;
            }
        std::map<uint32_t, int> palette;
        for (uint32_t p : pix)
            if (!palette.count(p) && (int)palette.size() < 257) palette[p] = 0;
        std::vector<uint32_t> colors;
        std::vector<uint8_t> indices(h * w);
        if (palette.size() <= 256) {
            int k = 0;
            for (auto& [c, ix] : palette) {
                ix = k++;
                colors.push_back(c);
            }
            for (int64_t i = 0; i < h * w; i++) indices[i] = (uint8_t)palette[pix[i]];
        } else {
            // uniform 6x7x6 cube
            colors.resize(252);
            for (int r = 0; r < 6; r++)
                for (int g = 0; g < 7; g++)
                    for (int b = 0; b < 6; b++)
                        colors[(r * 7 + g) * 6 + b] = ((uint32_t)(r * 51) << 16) |
                                                      ((uint32_t)(g * 42 + (g == 6 ? 3 : 0)) << 8) |
                                                      (uint32_t)(b * 51);
            for (int64_t i = 0; i < h * w; i++) {
                int r = (int)((pix[i] >> 16) & 0xff) * 6 / 256;
                int g = (int)((pix[i] >> 8) & 0xff) * 7 / 256;
                int b = (int)(pix[i] & 0xff) * 6 / 256;
                indices[i] = (uint8_t)((r * 7 + g) * 6 + b);
            }
        }
        int pal_bits = 1;
        while ((1 << pal_bits) < (int)colors.size()) pal_bits++;
        pal_bits = std::max(pal_bits, 1);
        colors.resize((size_t)1 << pal_bits, 0);

        // graphic control extension: cumulative-rounded delay in centiseconds
        int64_t delay = (int64_t)(100 * (fi + 1) / fps) - (int64_t)(100 * fi / fps);
        os.put((char)0x21);
        os.put((char)0xf9);
        os.put((char)4);
        os.put((char)0);  // no disposal, no transparency
        gif_detail::put_u16(os, (uint16_t)delay);
        os.put((char)0);
        os.put((char)0);

        // image descriptor + local color table
        os.put((char)0x2c);
        gif_detail::put_u16(os, 0);
        gif_detail::put_u16(os, 0);
        gif_detail::put_u16(os, (uint16_t)w);
        gif_detail::put_u16(os, (uint16_t)h);
        os.put((char)(0x80 | (pal_bits - 1)));
        for (uint32_t c : colors) {
            os.put((char)((c >> 16) & 0xff));
            os.put((char)((c >> 8) & 0xff));
            os.put((char)(c & 0xff));
        }

        int min_code_size = std::max(2, pal_bits);
        os.put((char)min_code_size);
        auto data = gif_detail::lzw_encode(indices, min_code_size);
        for (size_t off = 0; off < data.size(); off += 255) {
            size_t n = std::min<size_t>(255, data.size() - off);
            os.put((char)n);
            os.write((const char*)data.data() + off, (std::streamsize)n);
        }
        os.put((char)0);  // block terminator
    }
    os.put((char)0x3b);  // trailer
    if (!os) throw io_error("export_gif: write failed on " + path);
}

}  // namespace vd

#endif
