#include "cosmo/pngio.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cosmo {

namespace {

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(static_cast<uint8_t>(x >> 24));
    v.push_back(static_cast<uint8_t>(x >> 16));
    v.push_back(static_cast<uint8_t>(x >> 8));
    v.push_back(static_cast<uint8_t>(x));
}

void write_chunk(std::ofstream& os, const char type[4], const std::vector<uint8_t>& data) {
    std::vector<uint8_t> head;
    put_u32(head, static_cast<uint32_t>(data.size()));
    os.write(reinterpret_cast<const char*>(head.data()), 4);
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    os.write(reinterpret_cast<const char*>(body.data()),
             static_cast<std::streamsize>(body.size()));
    uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    std::vector<uint8_t> tail;
    put_u32(tail, crc);
    os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

void write_png(const std::string& path, int w, int h, int channels,
               const std::vector<uint8_t>& pixels) {
    if (static_cast<size_t>(w) * h * channels != pixels.size())
        throw std::invalid_argument("write_png: pixel buffer size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_png: cannot open " + path);
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(w));
    put_u32(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);              // gray / truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(os, "IHDR", ihdr);

    // raw scanlines with filter byte 0
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(h) * (static_cast<size_t>(w) * channels + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        const uint8_t* row = pixels.data() + static_cast<size_t>(y) * w * channels;
        raw.insert(raw.end(), row, row + static_cast<size_t>(w) * channels);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: zlib compression failed");
    compressed.resize(bound);
    write_chunk(os, "IDAT", compressed);
    write_chunk(os, "IEND", {});
}

}  // namespace

void write_png_rgb(const std::string& path, int w, int h, const std::vector<uint8_t>& rgb) {
    write_png(path, w, h, 3, rgb);
}

void write_png_gray8(const std::string& path, int w, int h, const std::vector<uint8_t>& gray) {
    write_png(path, w, h, 1, gray);
}

void save_png_gray(const std::string& path, const RealImage& img) {
    double lo = img.min_value(), hi = img.max_value();
    double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    std::vector<uint8_t> gray(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        double t = (img.v[i] - lo) / span;
        gray[i] = static_cast<uint8_t>(t <= 0 ? 0 : t >= 1 ? 255 : t * 255.0 + 0.5);
    }
    write_png_gray8(path, img.w, img.h, gray);
}

}  // namespace cosmo
