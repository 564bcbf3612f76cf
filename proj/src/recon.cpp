#include "cosmo/recon.hpp"

#include "cosmo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cosmo {

double l1_diff(const ContentMap& a, const ContentMap& b) {
    double acc = 0;
    for (size_t i = 0; i < a.v.size(); ++i) acc += std::abs(a.v[i] - b.v[i]);
    return acc;
}

double l2_diff(const StyleCode& a, const StyleCode& b) {
    double acc = 0;
    for (size_t i = 0; i < a.v.size(); ++i) acc += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
    return std::sqrt(acc);
}

ReconMode recon_mode_from_string(const std::string& s) {
    if (s == "cs_wt") return ReconMode::cs_wt;
    if (s == "pnp_denoiser") return ReconMode::pnp_denoiser;
    if (s == "cosmo") return ReconMode::cosmo;
    if (s == "cosmo_no_cr") return ReconMode::cosmo_no_cr;
    if (s == "cosmo_oracle") return ReconMode::cosmo_oracle;
    throw std::invalid_argument("unknown reconstruction mode: " + s);
}

std::string to_string(ReconMode m) {
    switch (m) {
        case ReconMode::cs_wt: return "cs_wt";
        case ReconMode::pnp_denoiser: return "pnp_denoiser";
        case ReconMode::cosmo: return "cosmo";
        case ReconMode::cosmo_no_cr: return "cosmo_no_cr";
        case ReconMode::cosmo_oracle: return "cosmo_oracle";
    }
    return "?";
}

void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_trace_csv: cannot open " + path);
    os << "iter,psnr,kres,content_change,style_change,cr_objective\n";
    char buf[256];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.iter, r.psnr,
                      r.kres, r.content_change, r.style_change, r.cr_objective);
        os << buf;
    }
}

namespace {

double kspace_residual(const ForwardOperator& a, const ComplexImage& x, const KSpaceData& y) {
    KSpaceData ax = a.forward(x);
    double acc = 0;
    for (size_t ci = 0; ci < ax.coils.size(); ++ci)
        for (size_t i = 0; i < ax.coils[ci].v.size(); ++i)
            acc += std::norm(ax.coils[ci].v[i] - y.coils[ci].v[i]);
    return std::sqrt(acc);
}

struct TraceHelper {
    const RealImage* gt;
    std::vector<uint8_t> mask;
    double data_range = 1.0;

    explicit TraceHelper(const RealImage* gt_) : gt(gt_) {
        if (gt) {
            mask = foreground_mask(*gt);
            data_range = gt->max_value();
        }
    }
    double psnr_of(const ComplexImage& x) const {
        if (!gt) return 0.0;
        return psnr(magnitude(x), *gt, data_range, &mask);
    }
};

}  // namespace

ReconResult cs_wt_reconstruct(const KSpaceData& y, const ForwardOperator& a,
                              const ReconConfig& cfg, const RealImage* gt) {
    if (cfg.max_iters < 1) throw std::invalid_argument("cs_wt: max_iters must be >= 1");
    TraceHelper th(gt);
    ReconResult res;
    ComplexImage x = a.adjoint(y);
    for (int k = 1; k <= cfg.max_iters; ++k) {
        ComplexImage coeffs = haar2_forward(x, cfg.wavelet_levels);
        coeffs = soft_threshold(coeffs, cfg.lambda);
        ComplexImage r = haar2_inverse(coeffs, cfg.wavelet_levels);
        ComplexImage x_new = dc_step(r, a, y, cfg.eta);
        double rel = l2_diff(x_new, x) / std::max(l2_norm(x), 1e-300);
        TraceRow row;
        row.iter = k;
        row.psnr = th.psnr_of(x_new);
        row.kres = kspace_residual(a, x_new, y);
        res.trace.push_back(row);
        x = std::move(x_new);
        res.iterations = k;
        if (cfg.tolerance > 0.0 && rel < cfg.tolerance) break;
    }
    res.image = std::move(x);
    return res;
}

ReconResult pnp_denoiser_reconstruct(const KSpaceData& y, const ForwardOperator& a,
                                     Denoiser& denoiser, const ReconConfig& cfg,
                                     const RealImage* gt) {
    if (cfg.max_iters < 1) throw std::invalid_argument("pnp: max_iters must be >= 1");
    TraceHelper th(gt);
    ReconResult res;
    ComplexImage x = a.adjoint(y);
    for (int k = 1; k <= cfg.max_iters; ++k) {
        RealImage den = denoiser.denoise(magnitude(x));
        ComplexImage z = rephase(den, x);
        ComplexImage x_new = dc_step(z, a, y, cfg.eta);
        double rel = l2_diff(x_new, x) / std::max(l2_norm(x), 1e-300);
        TraceRow row;
        row.iter = k;
        row.psnr = th.psnr_of(x_new);
        row.kres = kspace_residual(a, x_new, y);
        res.trace.push_back(row);
        x = std::move(x_new);
        res.iterations = k;
        if (cfg.tolerance > 0.0 && rel < cfg.tolerance) break;
    }
    res.image = std::move(x);
    return res;
}

ComplexImage content_consistency(const ComplexImage& x_us, const ContentMap& c_hat,
                                 GuidanceModel& model) {
    StyleCode s = model.encode_style_target(magnitude(x_us));
    RealImage decoded = model.decode_target(c_hat, s);
    if (decoded.h != x_us.h || decoded.w != x_us.w)
        throw std::invalid_argument("content_consistency: decoded shape mismatch");
    return rephase(decoded, x_us);
}

ContentMap cr_step(const ContentMap& c, const StyleCode& s_hat, const ForwardOperator& a,
                   const KSpaceData& y, double gamma, GuidanceModel& model,
                   const ComplexImage& phase_of, double* objective_out) {
    RealImage decoded = model.decode_target(c, s_hat);
    ComplexImage u = rephase(decoded, phase_of);
    KSpaceData r = a.forward(u);
    double obj = 0;
    for (size_t ci = 0; ci < r.coils.size(); ++ci)
        for (size_t i = 0; i < r.coils[ci].v.size(); ++i) {
            r.coils[ci].v[i] -= y.coils[ci].v[i];
            obj += std::norm(r.coils[ci].v[i]);
        }
    if (objective_out) *objective_out = obj;
    if (gamma == 0.0) return c;
    ComplexImage ah = a.adjoint(r);
    // u = decoded .* p with fixed unit phasor p, so dObj/d(decoded) =
    // 2 Re(conj(p) .* A^H r)
    RealImage g_img(decoded.h, decoded.w);
    for (size_t i = 0; i < g_img.v.size(); ++i) {
        double amp = std::abs(phase_of.v[i]);
        std::complex<double> p =
            amp > 0.0 ? phase_of.v[i] / amp : std::complex<double>(1.0, 0.0);
        g_img.v[i] = 2.0 * (std::conj(p) * ah.v[i]).real();
    }
    ContentMap grad = model.decode_grad_content(c, s_hat, g_img);
    ContentMap out = c;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= gamma * grad.v[i];
    return out;
}

ReconResult cosmo_reconstruct(const KSpaceData& y, const ForwardOperator& a,
                              const RealImage& x_ref, GuidanceModel& model,
                              const ReconConfig& cfg, const RealImage* gt) {
    if (cfg.max_iters < 1) throw std::invalid_argument("cosmo: max_iters must be >= 1");
    bool use_cr = cfg.mode == ReconMode::cosmo;
    if (cfg.mode == ReconMode::cosmo_oracle && gt == nullptr)
        throw std::invalid_argument("cosmo: oracle mode needs the ground-truth image");
    if (cfg.mode != ReconMode::cosmo && cfg.mode != ReconMode::cosmo_no_cr &&
        cfg.mode != ReconMode::cosmo_oracle)
        throw std::invalid_argument("cosmo_reconstruct: not a guided mode");

    TraceHelper th(gt);
    ReconResult res;
    ComplexImage x = a.adjoint(y);
    ContentMap c = cfg.mode == ReconMode::cosmo_oracle ? model.encode_content_target(*gt)
                                                       : model.encode_content_ref(x_ref);
    StyleCode prev_style;
    for (int k = 1; k <= cfg.max_iters; ++k) {
        StyleCode s = model.encode_style_target(magnitude(x));
        RealImage decoded = model.decode_target(c, s);
        ComplexImage z = rephase(decoded, x);
        ComplexImage x_new = dc_step(z, a, y, cfg.eta);

        TraceRow row;
        row.iter = k;
        row.style_change = prev_style.v.empty() ? 0.0 : l2_diff(s, prev_style);
        prev_style = s;

        if (use_cr) {
            StyleCode s2 = model.encode_style_target(magnitude(x_new));
            double obj = 0;
            ContentMap c_new = cr_step(c, s2, a, y, cfg.gamma, model, x_new, &obj);
            row.cr_objective = obj;
            row.content_change = l1_diff(c_new, c);
            c = std::move(c_new);
        }

        double rel = l2_diff(x_new, x) / std::max(l2_norm(x), 1e-300);
        row.psnr = th.psnr_of(x_new);
        row.kres = kspace_residual(a, x_new, y);
        res.trace.push_back(row);
        x = std::move(x_new);
        res.iterations = k;
        if (cfg.tolerance > 0.0 && rel < cfg.tolerance) break;
    }
    res.image = std::move(x);
    return res;
}

}  // namespace cosmo
