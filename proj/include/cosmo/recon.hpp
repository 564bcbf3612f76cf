#pragma once

#include "cosmo/image.hpp"
#include "cosmo/kspace.hpp"
#include "cosmo/wavelet.hpp"

#include <memory>
#include <string>
#include <vector>

namespace cosmo {

// Multi-channel spatial latent shared by both contrasts.
struct ContentMap {
    int channels = 0, h = 0, w = 0;
    std::vector<double> v;

    ContentMap() = default;
    ContentMap(int c, int h_, int w_)
        : channels(c), h(h_), w(w_), v(static_cast<size_t>(c) * h_ * w_, 0.0) {}
    size_t size() const { return v.size(); }
};

// Low-dimensional contrast-specific latent.
struct StyleCode {
    std::vector<double> v;
};

double l1_diff(const ContentMap& a, const ContentMap& b);
double l2_diff(const StyleCode& a, const StyleCode& b);

// What the iterative loop needs from a trained content/style model. All
// images are in acquisition units; adapters own any internal normalization.
class GuidanceModel {
public:
    virtual ~GuidanceModel() = default;
    virtual ContentMap encode_content_ref(const RealImage& ref) = 0;
    virtual ContentMap encode_content_target(const RealImage& img) = 0;
    virtual StyleCode encode_style_target(const RealImage& img) = 0;
    virtual RealImage decode_target(const ContentMap& c, const StyleCode& s) = 0;
    // dLoss/dc for a given dLoss/d(decoded image)
    virtual ContentMap decode_grad_content(const ContentMap& c, const StyleCode& s,
                                           const RealImage& dloss_dout) = 0;
};

class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual RealImage denoise(const RealImage& img) = 0;
};

enum class ReconMode { cs_wt, pnp_denoiser, cosmo, cosmo_no_cr, cosmo_oracle };

ReconMode recon_mode_from_string(const std::string& s);
std::string to_string(ReconMode m);

struct ReconConfig {
    ReconMode mode = ReconMode::cs_wt;
    double eta = 1.0;         // data-consistency step size
    double gamma = 0.0;       // content-refinement step size
    double lambda = 2e-3;     // soft-threshold level (cs_wt)
    int wavelet_levels = 3;
    int max_iters = 200;
    double tolerance = 1e-5;  // relative iterate change; 0 disables early stop
};

// Per-iteration record. style_change is 0 for the first iteration;
// cr_objective is the content sub-problem value ||A G(c, s) - y||^2 and is
// recorded only in the CR-enabled mode (0 otherwise).
struct TraceRow {
    int iter = 0;
    double psnr = 0.0;
    double kres = 0.0;
    double content_change = 0.0;
    double style_change = 0.0;
    double cr_objective = 0.0;
};

struct ReconResult {
    ComplexImage image;
    std::vector<TraceRow> trace;
    int iterations = 0;
};

void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

// ISTA with an orthonormal wavelet prior: alternate transform-domain
// soft-thresholding and the data-consistency gradient step from x0 = A^H y.
ReconResult cs_wt_reconstruct(const KSpaceData& y, const ForwardOperator& a,
                              const ReconConfig& cfg, const RealImage* gt = nullptr);

// Same loop with the thresholding replaced by a learned denoiser applied to
// the iterate magnitude (output re-phased with the iterate phase).
ReconResult pnp_denoiser_reconstruct(const KSpaceData& y, const ForwardOperator& a,
                                     Denoiser& denoiser, const ReconConfig& cfg,
                                     const RealImage* gt = nullptr);

// Replaces the aliased content of x_us with c_hat, keeping the style
// estimated from x_us; output re-phased with the phase of x_us.
ComplexImage content_consistency(const ComplexImage& x_us, const ContentMap& c_hat,
                                 GuidanceModel& model);

// One gradient step on ||A G(c, s_hat) - y||^2 with respect to c. The decoded
// image is re-phased with `phase_of` before entering the forward operator.
// Returns the updated content; writes the objective value at the current c
// when objective_out is non-null.
ContentMap cr_step(const ContentMap& c, const StyleCode& s_hat, const ForwardOperator& a,
                   const KSpaceData& y, double gamma, GuidanceModel& model,
                   const ComplexImage& phase_of, double* objective_out = nullptr);

// Guided iterative reconstruction: init x = A^H y and c from the reference
// (or from the ground truth in oracle mode), then loop content consistency,
// data consistency and (in the CR-enabled mode) content refinement.
ReconResult cosmo_reconstruct(const KSpaceData& y, const ForwardOperator& a,
                              const RealImage& x_ref, GuidanceModel& model,
                              const ReconConfig& cfg, const RealImage* gt = nullptr);

}  // namespace cosmo
