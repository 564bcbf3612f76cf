#include "cosmo/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cosmo {

double RealImage::max_value() const {
    double m = -1e300;
    for (double x : v) m = std::max(m, x);
    return m;
}

double RealImage::min_value() const {
    double m = 1e300;
    for (double x : v) m = std::min(m, x);
    return m;
}

RealImage magnitude(const ComplexImage& x) {
    RealImage out(x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) out.v[i] = std::abs(x.v[i]);
    return out;
}

ComplexImage to_complex(const RealImage& x) {
    ComplexImage out(x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) out.v[i] = {x.v[i], 0.0};
    return out;
}

ComplexImage rephase(const RealImage& m, const ComplexImage& phase_of) {
    if (m.h != phase_of.h || m.w != phase_of.w)
        throw std::invalid_argument("rephase: shape mismatch");
    ComplexImage out(m.h, m.w);
    for (size_t i = 0; i < m.v.size(); ++i) {
        double a = std::abs(phase_of.v[i]);
        if (a > 0.0) {
            out.v[i] = phase_of.v[i] / a * m.v[i];
        } else {
            out.v[i] = {m.v[i], 0.0};
        }
    }
    return out;
}

double l2_norm(const ComplexImage& x) {
    double acc = 0;
    for (const auto& c : x.v) acc += std::norm(c);
    return std::sqrt(acc);
}

double l2_diff(const ComplexImage& a, const ComplexImage& b) {
    double acc = 0;
    for (size_t i = 0; i < a.v.size(); ++i) acc += std::norm(a.v[i] - b.v[i]);
    return std::sqrt(acc);
}

std::vector<uint8_t> foreground_mask(const RealImage& img, double frac) {
    double thr = frac * img.max_value();
    std::vector<uint8_t> mask(img.size());
    for (size_t i = 0; i < img.size(); ++i) mask[i] = img.v[i] > thr ? 1 : 0;
    return mask;
}

namespace {
constexpr char kMagic[4] = {'I', 'M', 'G', 'F'};
}

void save_image(const RealImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_image: cannot open " + path);
    os.write(kMagic, 4);
    uint32_t h = static_cast<uint32_t>(img.h), w = static_cast<uint32_t>(img.w);
    os.write(reinterpret_cast<const char*>(&h), 4);
    os.write(reinterpret_cast<const char*>(&w), 4);
    os.write(reinterpret_cast<const char*>(img.v.data()),
             static_cast<std::streamsize>(img.v.size() * sizeof(double)));
    if (!os) throw std::runtime_error("save_image: write failed " + path);
}

RealImage load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_image: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_image: bad magic in " + path);
    uint32_t h = 0, w = 0;
    is.read(reinterpret_cast<char*>(&h), 4);
    is.read(reinterpret_cast<char*>(&w), 4);
    RealImage img(static_cast<int>(h), static_cast<int>(w));
    is.read(reinterpret_cast<char*>(img.v.data()),
            static_cast<std::streamsize>(img.v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("load_image: truncated " + path);
    return img;
}

}  // namespace cosmo
