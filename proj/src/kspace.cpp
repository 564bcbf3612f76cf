#include "cosmo/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cosmo {

namespace {

using cd = std::complex<double>;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey, no scaling.
void fft_pow2(cd* a, int n, bool inverse) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / len * (inverse ? 1.0 : -1.0);
        cd wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// O(n^2) fallback for non-power-of-two lengths, desk scale only.
void dft_naive(cd* a, int n, bool inverse) {
    std::vector<cd> out(static_cast<size_t>(n));
    double sgn = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k) {
        cd acc(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            double ang = sgn * 2.0 * M_PI * k * t / n;
            acc += a[t] * cd(std::cos(ang), std::sin(ang));
        }
        out[static_cast<size_t>(k)] = acc;
    }
    std::copy(out.begin(), out.end(), a);
}

void fft_1d(cd* a, int n, bool inverse) {
    if (is_pow2(n))
        fft_pow2(a, n, inverse);
    else
        dft_naive(a, n, inverse);
}

// Circular shift by k (to the right).
void roll(std::vector<cd>& v, int k) {
    int n = static_cast<int>(v.size());
    k = ((k % n) + n) % n;
    if (k) std::rotate(v.begin(), v.begin() + (n - k), v.end());
}

ComplexImage fft2_centered(const ComplexImage& x, bool inverse) {
    int h = x.h, w = x.w;
    ComplexImage out = x;
    // ifftshift in image domain: shift by -floor(n/2) (= roll by n - n/2)
    // column-wise then row-wise, operating on rows/cols as vectors
    std::vector<cd> buf;
    // rows: ifftshift, fft, fftshift
    for (int y = 0; y < h; ++y) {
        buf.assign(out.v.begin() + static_cast<size_t>(y) * w,
                   out.v.begin() + static_cast<size_t>(y + 1) * w);
        roll(buf, -(w / 2));
        fft_1d(buf.data(), w, inverse);
        roll(buf, w / 2);
        std::copy(buf.begin(), buf.end(), out.v.begin() + static_cast<size_t>(y) * w);
    }
    // cols
    buf.resize(static_cast<size_t>(h));
    for (int xx = 0; xx < w; ++xx) {
        for (int y = 0; y < h; ++y) buf[static_cast<size_t>(y)] = out.at(y, xx);
        roll(buf, -(h / 2));
        fft_1d(buf.data(), h, inverse);
        roll(buf, h / 2);
        for (int y = 0; y < h; ++y) out.at(y, xx) = buf[static_cast<size_t>(y)];
    }
    double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
    for (auto& c : out.v) c *= scale;
    return out;
}

}  // namespace

ComplexImage fft2c(const ComplexImage& x) { return fft2_centered(x, false); }
ComplexImage ifft2c(const ComplexImage& x) { return fft2_centered(x, true); }

bool SamplingMask::keeps(int col) const {
    return std::binary_search(kept_lines.begin(), kept_lines.end(), col);
}

SamplingMask make_mask(int w, double r, double center_fraction, uint64_t seed) {
    if (w < 1 || r < 1.0) throw std::invalid_argument("make_mask: need w >= 1 and r >= 1");
    if (center_fraction < 0.0 || center_fraction > 1.0 / r + 1e-12)
        throw std::invalid_argument("make_mask: center_fraction must be in [0, 1/r]");
    int budget = static_cast<int>(std::ceil(static_cast<double>(w) / r));
    int nc = static_cast<int>(std::llround(center_fraction * w));
    if (nc > budget)
        throw std::invalid_argument("make_mask: center block exceeds line budget");
    SamplingMask m;
    m.w = w;
    m.r = r;
    m.center_fraction = center_fraction;
    m.seed = seed;
    int cstart = w / 2 - nc / 2;
    std::vector<uint8_t> kept(static_cast<size_t>(w), 0);
    for (int i = 0; i < nc; ++i) kept[static_cast<size_t>(cstart + i)] = 1;
    std::vector<int> rest;
    rest.reserve(static_cast<size_t>(w - nc));
    for (int i = 0; i < w; ++i)
        if (!kept[static_cast<size_t>(i)]) rest.push_back(i);
    Rng rng(seed);
    // partial Fisher-Yates: draw (budget - nc) lines without replacement
    int need = budget - nc;
    for (int i = 0; i < need; ++i) {
        int j = static_cast<int>(rng.uniform_int(i, static_cast<int64_t>(rest.size()) - 1));
        std::swap(rest[static_cast<size_t>(i)], rest[static_cast<size_t>(j)]);
        kept[static_cast<size_t>(rest[static_cast<size_t>(i)])] = 1;
    }
    for (int i = 0; i < w; ++i)
        if (kept[static_cast<size_t>(i)]) m.kept_lines.push_back(i);
    return m;
}

void save_mask(const SamplingMask& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_mask: cannot open " + path);
    os << "# mask w=" << m.w << " r=" << m.r << " center_fraction=" << m.center_fraction
       << " seed=" << m.seed << "\n";
    for (int line : m.kept_lines) os << line << "\n";
}

SamplingMask load_mask(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_mask: cannot open " + path);
    std::string header;
    std::getline(is, header);
    SamplingMask m;
    if (std::sscanf(header.c_str(), "# mask w=%d r=%lf center_fraction=%lf seed=%llu", &m.w, &m.r,
                    &m.center_fraction,
                    reinterpret_cast<unsigned long long*>(&m.seed)) != 4)
        throw std::runtime_error("load_mask: bad header in " + path);
    int line;
    while (is >> line) m.kept_lines.push_back(line);
    return m;
}

namespace {
constexpr char kKMagic[4] = {'K', 'S', 'P', 'C'};
}

void save_kspace(const KSpaceData& y, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_kspace: cannot open " + path);
    os.write(kKMagic, 4);
    uint32_t h = static_cast<uint32_t>(y.h()), w = static_cast<uint32_t>(y.w());
    uint32_t nc = static_cast<uint32_t>(y.n_coils());
    os.write(reinterpret_cast<const char*>(&h), 4);
    os.write(reinterpret_cast<const char*>(&w), 4);
    os.write(reinterpret_cast<const char*>(&nc), 4);
    os.write(reinterpret_cast<const char*>(&y.noise_sigma), 8);
    for (const auto& coil : y.coils)
        for (const auto& c : coil.v) {
            double re = c.real(), im = c.imag();
            os.write(reinterpret_cast<const char*>(&re), 8);
            os.write(reinterpret_cast<const char*>(&im), 8);
        }
    if (!os) throw std::runtime_error("save_kspace: write failed " + path);
}

KSpaceData load_kspace(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_kspace: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kKMagic, 4) != 0)
        throw std::runtime_error("load_kspace: bad magic in " + path);
    uint32_t h, w, nc;
    is.read(reinterpret_cast<char*>(&h), 4);
    is.read(reinterpret_cast<char*>(&w), 4);
    is.read(reinterpret_cast<char*>(&nc), 4);
    KSpaceData y;
    is.read(reinterpret_cast<char*>(&y.noise_sigma), 8);
    for (uint32_t k = 0; k < nc; ++k) {
        ComplexImage coil(static_cast<int>(h), static_cast<int>(w));
        for (auto& c : coil.v) {
            double re, im;
            is.read(reinterpret_cast<char*>(&re), 8);
            is.read(reinterpret_cast<char*>(&im), 8);
            c = {re, im};
        }
        y.coils.push_back(std::move(coil));
    }
    if (!is) throw std::runtime_error("load_kspace: truncated " + path);
    return y;
}

KSpaceData ForwardOperator::forward(const ComplexImage& x) const {
    KSpaceData y;
    y.mask = mask;
    int n_coils = coil_sensitivities.empty() ? 1 : static_cast<int>(coil_sensitivities.size());
    for (int ci = 0; ci < n_coils; ++ci) {
        ComplexImage weighted = x;
        if (!coil_sensitivities.empty()) {
            const auto& s = coil_sensitivities[static_cast<size_t>(ci)];
            if (s.h != x.h || s.w != x.w)
                throw std::invalid_argument("forward: coil map shape mismatch");
            for (size_t i = 0; i < weighted.v.size(); ++i) weighted.v[i] *= s.v[i];
        }
        ComplexImage k = fft2c(weighted);
        for (int yy = 0; yy < k.h; ++yy)
            for (int xx = 0; xx < k.w; ++xx)
                if (!mask.keeps(xx)) k.at(yy, xx) = {0.0, 0.0};
        y.coils.push_back(std::move(k));
    }
    return y;
}

ComplexImage ForwardOperator::adjoint(const KSpaceData& y) const {
    if (y.coils.empty()) throw std::invalid_argument("adjoint: empty k-space");
    ComplexImage out(y.h(), y.w());
    for (int ci = 0; ci < y.n_coils(); ++ci) {
        ComplexImage k = y.coils[static_cast<size_t>(ci)];
        for (int yy = 0; yy < k.h; ++yy)
            for (int xx = 0; xx < k.w; ++xx)
                if (!mask.keeps(xx)) k.at(yy, xx) = {0.0, 0.0};
        ComplexImage img = ifft2c(k);
        if (!coil_sensitivities.empty()) {
            const auto& s = coil_sensitivities[static_cast<size_t>(ci)];
            for (size_t i = 0; i < img.v.size(); ++i)
                out.v[i] += std::conj(s.v[i]) * img.v[i];
        } else {
            for (size_t i = 0; i < img.v.size(); ++i) out.v[i] += img.v[i];
        }
    }
    return out;
}

std::vector<ComplexImage> make_coil_sensitivities(int h, int w, int n_coils, uint64_t seed) {
    if (n_coils < 1) throw std::invalid_argument("make_coil_sensitivities: need >= 1 coil");
    Rng rng(seed);
    std::vector<ComplexImage> maps;
    for (int ci = 0; ci < n_coils; ++ci) {
        // Gaussian magnitude bump near the image border, smooth linear phase
        double ang = 2.0 * M_PI * (ci + rng.uniform() * 0.25) / n_coils;
        double cy = h / 2.0 + 0.45 * h * std::sin(ang);
        double cx = w / 2.0 + 0.45 * w * std::cos(ang);
        double width = 0.6 * std::max(h, w) * (0.8 + 0.4 * rng.uniform());
        double py = rng.uniform(-1.5, 1.5) * M_PI / h;
        double px = rng.uniform(-1.5, 1.5) * M_PI / w;
        ComplexImage s(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                double mag = std::exp(-d2 / (2.0 * width * width)) + 0.05;
                double phase = py * y + px * x;
                s.at(y, x) = std::polar(mag, phase);
            }
        maps.push_back(std::move(s));
    }
    // normalize: sum_i |S_i|^2 = 1 per voxel
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double ss = 0;
            for (const auto& s : maps) ss += std::norm(s.at(y, x));
            double inv = 1.0 / std::sqrt(ss);
            for (auto& s : maps) s.at(y, x) *= inv;
        }
    return maps;
}

KSpaceData add_noise(const KSpaceData& y, double sigma_rel, double ref_max, uint64_t seed) {
    if (sigma_rel < 0.0) throw std::invalid_argument("add_noise: sigma_rel must be >= 0");
    KSpaceData out = y;
    if (sigma_rel == 0.0) return out;
    double sigma = sigma_rel * ref_max;
    out.noise_sigma = sigma;
    Rng rng(seed);
    for (auto& coil : out.coils)
        for (int yy = 0; yy < coil.h; ++yy)
            for (int xx = 0; xx < coil.w; ++xx)
                if (y.mask.keeps(xx))
                    coil.at(yy, xx) += std::complex<double>(rng.normal(0.0, sigma),
                                                            rng.normal(0.0, sigma));
    return out;
}

ComplexImage dc_step(const ComplexImage& r, const ForwardOperator& a, const KSpaceData& y,
                     double eta) {
    if (eta < 0.0) throw std::invalid_argument("dc_step: eta must be >= 0");
    if (eta == 0.0) return r;
    KSpaceData ar = a.forward(r);
    for (size_t ci = 0; ci < ar.coils.size(); ++ci)
        for (size_t i = 0; i < ar.coils[ci].v.size(); ++i)
            ar.coils[ci].v[i] -= y.coils[ci].v[i];
    ComplexImage corr = a.adjoint(ar);
    ComplexImage out = r;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= eta * corr.v[i];
    return out;
}

}  // namespace cosmo
