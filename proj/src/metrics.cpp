#include "cosmo/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace cosmo {

double psnr(const RealImage& x, const RealImage& ref, double data_range,
            const std::vector<uint8_t>* mask) {
    if (x.h != ref.h || x.w != ref.w) throw std::invalid_argument("psnr: shape mismatch");
    if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be > 0");
    double mse = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < x.v.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        double d = x.v[i] - ref.v[i];
        mse += d * d;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("psnr: empty mask");
    mse /= static_cast<double>(n);
    if (mse <= data_range * data_range * 1e-30) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const RealImage& x, const RealImage& ref, double data_range, int window, double k1,
            double k2, const std::vector<uint8_t>* mask) {
    if (x.h != ref.h || x.w != ref.w) throw std::invalid_argument("ssim: shape mismatch");
    if (window < 1 || window > std::min(x.h, x.w))
        throw std::invalid_argument("ssim: window larger than image");
    double c1 = (k1 * data_range) * (k1 * data_range);
    double c2 = (k2 * data_range) * (k2 * data_range);
    int half = window / 2;
    double acc = 0.0;
    int64_t count = 0;
    for (int cy = half; cy < x.h - half; ++cy) {
        for (int cx = half; cx < x.w - half; ++cx) {
            if (mask && !(*mask)[static_cast<size_t>(cy) * x.w + cx]) continue;
            double mx = 0, my = 0;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    mx += x.at(cy + dy, cx + dx);
                    my += ref.at(cy + dy, cx + dx);
                }
            double n = static_cast<double>(window) * window;
            mx /= n;
            my /= n;
            double vx = 0, vy = 0, cov = 0;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    double ax = x.at(cy + dy, cx + dx) - mx;
                    double ay = ref.at(cy + dy, cx + dx) - my;
                    vx += ax * ax;
                    vy += ay * ay;
                    cov += ax * ay;
                }
            vx /= n;
            vy /= n;
            cov /= n;
            double val = ((2 * mx * my + c1) * (2 * cov + c2)) /
                         ((mx * mx + my * my + c1) * (vx + vy + c2));
            acc += val;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("ssim: no valid windows");
    return acc / static_cast<double>(count);
}

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    a.n = static_cast<int>(values.size());
    if (a.n == 0) return a;
    for (double v : values) a.mean += v;
    a.mean /= a.n;
    if (a.n > 1) {
        double acc = 0;
        for (double v : values) acc += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(acc / (a.n - 1));
    }
    return a;
}

}  // namespace cosmo
