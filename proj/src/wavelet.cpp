#include "cosmo/wavelet.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cosmo {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;

using cd = std::complex<double>;

void check_dims(int h, int w, int levels) {
    if (levels < 1) throw std::invalid_argument("haar2: levels must be >= 1");
    int div = 1 << levels;
    if (h % div != 0 || w % div != 0)
        throw std::invalid_argument("haar2: dims must be divisible by 2^levels");
}

// One analysis pass over the top-left hs x ws block, rows then columns.
void analyze_block(ComplexImage& a, int hs, int ws) {
    std::vector<cd> buf(static_cast<size_t>(std::max(hs, ws)));
    for (int y = 0; y < hs; ++y) {
        for (int x = 0; x < ws / 2; ++x) {
            cd lo = (a.at(y, 2 * x) + a.at(y, 2 * x + 1)) * kInvSqrt2;
            cd hi = (a.at(y, 2 * x) - a.at(y, 2 * x + 1)) * kInvSqrt2;
            buf[static_cast<size_t>(x)] = lo;
            buf[static_cast<size_t>(ws / 2 + x)] = hi;
        }
        for (int x = 0; x < ws; ++x) a.at(y, x) = buf[static_cast<size_t>(x)];
    }
    for (int x = 0; x < ws; ++x) {
        for (int y = 0; y < hs / 2; ++y) {
            cd lo = (a.at(2 * y, x) + a.at(2 * y + 1, x)) * kInvSqrt2;
            cd hi = (a.at(2 * y, x) - a.at(2 * y + 1, x)) * kInvSqrt2;
            buf[static_cast<size_t>(y)] = lo;
            buf[static_cast<size_t>(hs / 2 + y)] = hi;
        }
        for (int y = 0; y < hs; ++y) a.at(y, x) = buf[static_cast<size_t>(y)];
    }
}

void synthesize_block(ComplexImage& a, int hs, int ws) {
    std::vector<cd> buf(static_cast<size_t>(std::max(hs, ws)));
    for (int x = 0; x < ws; ++x) {
        for (int y = 0; y < hs / 2; ++y) {
            cd lo = a.at(y, x);
            cd hi = a.at(hs / 2 + y, x);
            buf[static_cast<size_t>(2 * y)] = (lo + hi) * kInvSqrt2;
            buf[static_cast<size_t>(2 * y + 1)] = (lo - hi) * kInvSqrt2;
        }
        for (int y = 0; y < hs; ++y) a.at(y, x) = buf[static_cast<size_t>(y)];
    }
    for (int y = 0; y < hs; ++y) {
        for (int x = 0; x < ws / 2; ++x) {
            cd lo = a.at(y, x);
            cd hi = a.at(y, ws / 2 + x);
            buf[static_cast<size_t>(2 * x)] = (lo + hi) * kInvSqrt2;
            buf[static_cast<size_t>(2 * x + 1)] = (lo - hi) * kInvSqrt2;
        }
        for (int x = 0; x < ws; ++x) a.at(y, x) = buf[static_cast<size_t>(x)];
    }
}

}  // namespace

ComplexImage haar2_forward(const ComplexImage& x, int levels) {
    check_dims(x.h, x.w, levels);
    ComplexImage a = x;
    int hs = x.h, ws = x.w;
    for (int l = 0; l < levels; ++l) {
        analyze_block(a, hs, ws);
        hs /= 2;
        ws /= 2;
    }
    return a;
}

ComplexImage haar2_inverse(const ComplexImage& w, int levels) {
    check_dims(w.h, w.w, levels);
    ComplexImage a = w;
    for (int l = levels - 1; l >= 0; --l) {
        synthesize_block(a, w.h >> l, w.w >> l);
    }
    return a;
}

double soft_threshold(double w, double lambda) {
    double m = std::abs(w) - lambda;
    if (m <= 0.0) return 0.0;
    return w > 0.0 ? m : -m;
}

std::complex<double> soft_threshold(std::complex<double> w, double lambda) {
    double mag = std::abs(w);
    if (mag <= lambda) return {0.0, 0.0};
    return w * ((mag - lambda) / mag);
}

ComplexImage soft_threshold(const ComplexImage& w, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("soft_threshold: lambda must be >= 0");
    ComplexImage out = w;
    if (lambda == 0.0) return out;
    for (auto& c : out.v) c = soft_threshold(c, lambda);
    return out;
}

}  // namespace cosmo
