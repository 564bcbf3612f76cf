#pragma once

#include <complex>
#include <string>
#include <vector>

namespace cosmo {

// Row-major H x W real map, arbitrary units.
struct RealImage {
    int h = 0, w = 0;
    std::vector<double> v;

    RealImage() = default;
    RealImage(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

    double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }

    double max_value() const;
    double min_value() const;
};

struct ComplexImage {
    int h = 0, w = 0;
    std::vector<std::complex<double>> v;

    ComplexImage() = default;
    ComplexImage(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_) {}

    std::complex<double>& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    std::complex<double> at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }
};

RealImage magnitude(const ComplexImage& x);
ComplexImage to_complex(const RealImage& x);
// m * exp(i*arg(phase_of)), pixelwise
ComplexImage rephase(const RealImage& m, const ComplexImage& phase_of);

double l2_norm(const ComplexImage& x);
double l2_diff(const ComplexImage& a, const ComplexImage& b);

// Pixels above frac * max(img); the usual evaluation support for images whose
// background is (near-)zero by construction.
std::vector<uint8_t> foreground_mask(const RealImage& img, double frac = 0.01);

// Raw float grid with a small header: magic "IMGF", u32 h, u32 w, f64 data.
void save_image(const RealImage& img, const std::string& path);
RealImage load_image(const std::string& path);

}  // namespace cosmo
