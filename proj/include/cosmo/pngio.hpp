#pragma once

#include "cosmo/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cosmo {

// Minimal PNG encoder (8-bit, zlib-compressed, filter 0).
void write_png_rgb(const std::string& path, int w, int h, const std::vector<uint8_t>& rgb);
void write_png_gray8(const std::string& path, int w, int h, const std::vector<uint8_t>& gray);

// Rescales [min, max] of the image to [0, 255].
void save_png_gray(const std::string& path, const RealImage& img);

}  // namespace cosmo
