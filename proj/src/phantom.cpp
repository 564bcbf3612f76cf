#include "cosmo/phantom.hpp"

#include "cosmo/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cosmo {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Angular boundary modulation: 1 + sum of low-order harmonics.
struct Wobble {
    std::vector<double> amp, phase;
    std::vector<int> order;
    double operator()(double theta) const {
        double f = 1.0;
        for (size_t j = 0; j < amp.size(); ++j)
            f += amp[j] * std::cos(order[j] * theta + phase[j]);
        return f;
    }
};

Wobble make_wobble(Rng& rng, int min_order, int max_order, double max_amp) {
    Wobble w;
    for (int j = min_order; j <= max_order; ++j) {
        w.order.push_back(j);
        w.amp.push_back(rng.uniform(-max_amp, max_amp) / std::sqrt(static_cast<double>(j)));
        w.phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
    }
    return w;
}

}  // namespace

TissuePhantom make_phantom(uint64_t seed, int h, int w, int n_tissues) {
    if (h < 32 || w < 32) throw std::invalid_argument("make_phantom: grid must be >= 32");
    if (n_tissues < 1 || n_tissues > 4)
        throw std::invalid_argument("make_phantom: supports 1..4 tissue classes");
    Rng rng = Rng(seed).fork(0xA11);

    double cy = h / 2.0 + rng.uniform(-0.02, 0.02) * h;
    double cx = w / 2.0 + rng.uniform(-0.02, 0.02) * w;
    double base = 0.5 * std::min(h, w);
    // nested boundary radii (fractions of base), outermost first
    double r_head = base * rng.uniform(0.82, 0.88);
    double r_rim = r_head * rng.uniform(0.90, 0.94);
    double r_deep = r_head * rng.uniform(0.55, 0.68);
    double r_cav = r_head * rng.uniform(0.16, 0.24);
    double ecc = rng.uniform(0.85, 1.0);  // slight vertical eccentricity

    Wobble outer = make_wobble(rng, 2, 4, 0.05);
    Wobble mid = make_wobble(rng, 2, 9, 0.10);
    Wobble cav = make_wobble(rng, 2, 5, 0.22);
    double cav_off_y = rng.uniform(-0.06, 0.06) * h;
    double cav_off_x = rng.uniform(-0.06, 0.06) * w;

    double soft = 1.1;  // boundary transition width in pixels

    auto inside = [&](double y, double x, double radius, const Wobble& wob, double oy,
                      double ox) {
        double dy = (y - cy - oy) / ecc;
        double dx = x - cx - ox;
        double rho = std::sqrt(dy * dy + dx * dx);
        double theta = std::atan2(dy, dx);
        return logistic((radius * wob(theta) - rho) / soft);
    };

    TissuePhantom ph;
    ph.h = h;
    ph.w = w;
    ph.seed = seed;
    for (int k = 0; k < n_tissues; ++k) ph.occupancy.emplace_back(h, w);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double in_head = inside(y, x, r_head, outer, 0, 0);
            double in_rim = std::min(inside(y, x, r_rim, outer, 0, 0), in_head);
            double in_deep = std::min(inside(y, x, r_deep, mid, 0, 0), in_rim);
            double in_cav =
                std::min(inside(y, x, r_cav, cav, cav_off_y, cav_off_x), in_deep);
            // nested shells: occupancies are differences of ordered insides
            double shells[4] = {in_head - in_rim, in_rim - in_deep, in_deep - in_cav, in_cav};
            if (n_tissues == 1) {
                ph.occupancy[0].at(y, x) = in_head;
            } else {
                for (int k = 0; k < n_tissues - 1; ++k) ph.occupancy[k].at(y, x) = shells[k];
                // last class absorbs the remaining interior
                double rest = 0;
                for (int k = n_tissues - 1; k < 4; ++k) rest += shells[k];
                ph.occupancy[n_tissues - 1].at(y, x) = rest;
            }
        }
    }

    // flush logistic tails to exact zero so the background carries no signal
    for (auto& occ : ph.occupancy)
        for (auto& v : occ.v)
            if (v < 1e-4) v = 0.0;

    // tissue properties near literature fluid / gray / white values, with
    // per-phantom jitter
    Rng prng = Rng(seed).fork(0xB22);
    auto jitter = [&](double v) { return v * prng.uniform(0.96, 1.04); };
    std::vector<TissueClass> all = {
        {"rim_fluid", jitter(0.98), jitter(3500.0), jitter(1800.0)},
        {"outer_tissue", jitter(0.85), jitter(1200.0), jitter(95.0)},
        {"deep_tissue", jitter(0.72), jitter(750.0), jitter(70.0)},
        {"cavity_fluid", jitter(1.00), jitter(4000.0), jitter(2000.0)},
    };
    for (int k = 0; k < n_tissues; ++k) ph.properties.push_back(all[static_cast<size_t>(k)]);
    return ph;
}

double spin_echo_signal(double occupancy, const TissueClass& tissue, SequenceParams p) {
    return occupancy * tissue.pd * (1.0 - std::exp(-p.tr_ms / tissue.t1)) *
           std::exp(-p.te_ms / tissue.t2);
}

RealImage simulate_contrast(const TissuePhantom& phantom, SequenceParams params) {
    if (!(params.te_ms > 0.0) || !(params.tr_ms > params.te_ms))
        throw std::invalid_argument("simulate_contrast: need 0 < TE < TR");
    RealImage img(phantom.h, phantom.w);
    for (int k = 0; k < phantom.n_tissues(); ++k) {
        const auto& occ = phantom.occupancy[static_cast<size_t>(k)];
        const auto& tis = phantom.properties[static_cast<size_t>(k)];
        double weight = tis.pd * (1.0 - std::exp(-params.tr_ms / tis.t1)) *
                        std::exp(-params.te_ms / tis.t2);
        for (size_t i = 0; i < img.v.size(); ++i) img.v[i] += occ.v[i] * weight;
    }
    return img;
}

RealImage degrade_reference(const RealImage& img, int n) {
    if (n < 1 || img.h % n != 0 || img.w % n != 0)
        throw std::invalid_argument("degrade_reference: n must divide both image dims");
    if (n == 1) return img;
    ComplexImage k = fft2c(to_complex(img));
    int hb = img.h / n, wb = img.w / n;
    int y0 = img.h / 2 - hb / 2, x0 = img.w / 2 - wb / 2;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            if (y < y0 || y >= y0 + hb || x < x0 || x >= x0 + wb) k.at(y, x) = {0.0, 0.0};
    ComplexImage back = ifft2c(k);
    RealImage out(img.h, img.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::max(0.0, back.v[i].real());
    return out;
}

RealImage inject_lesion(const RealImage& img, double cy, double cx, double radius,
                        double intensity_delta) {
    if (cy < 0 || cy >= img.h || cx < 0 || cx >= img.w)
        throw std::invalid_argument("inject_lesion: center out of bounds");
    if (radius == 0.0 || intensity_delta == 0.0) return img;
    double sigma = radius / 2.0;
    RealImage out = img;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            out.at(y, x) =
                std::max(0.0, out.at(y, x) + intensity_delta * std::exp(-d2 / (2.0 * sigma * sigma)));
        }
    return out;
}

RealImage misalign(const RealImage& img, double angle_deg) {
    if (angle_deg == 0.0) return img;
    double ang = angle_deg * M_PI / 180.0;
    double c = std::cos(ang), s = std::sin(ang);
    double cy = (img.h - 1) / 2.0, cx = (img.w - 1) / 2.0;
    RealImage out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            // inverse mapping: rotate output coordinate back into the source
            double dy = y - cy, dx = x - cx;
            double sy = cy + (c * dy + s * dx);
            double sx = cx + (-s * dy + c * dx);
            int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
            double fy = sy - y0, fx = sx - x0;
            double acc = 0.0;
            for (int oy = 0; oy <= 1; ++oy)
                for (int ox = 0; ox <= 1; ++ox) {
                    int yy = y0 + oy, xx = x0 + ox;
                    if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) continue;
                    double wgt = (oy ? fy : 1.0 - fy) * (ox ? fx : 1.0 - fx);
                    acc += wgt * img.at(yy, xx);
                }
            out.at(y, x) = acc;
        }
    return out;
}

}  // namespace cosmo
