#pragma once

#include "cosmo/image.hpp"

#include <optional>
#include <vector>

namespace cosmo {

// PSNR in dB relative to `data_range` (conventionally the ground-truth max).
// Identical images are capped at kPsnrCap rather than reporting infinity. An
// optional mask restricts the MSE to the marked pixels.
inline constexpr double kPsnrCap = 300.0;
double psnr(const RealImage& x, const RealImage& ref, double data_range,
            const std::vector<uint8_t>* mask = nullptr);

// Mean local SSIM with a uniform square window (default 7x7) and the usual
// k1=0.01, k2=0.03 stabilizers; window statistics use population variance.
// With a mask, only windows centered on marked pixels contribute.
double ssim(const RealImage& x, const RealImage& ref, double data_range, int window = 7,
            double k1 = 0.01, double k2 = 0.03, const std::vector<uint8_t>* mask = nullptr);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    int n = 0;
};

Aggregate aggregate(const std::vector<double>& values);

}  // namespace cosmo
