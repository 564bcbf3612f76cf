#pragma once

#include "cosmo/image.hpp"
#include "cosmo/recon.hpp"
#include "cosmo/rng.hpp"
#include "cosmo/tg/ops.hpp"
#include "cosmo/tg/optim.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cosmo {

struct ModelConfig {
    int img = 64;              // trained resolution
    int content_down = 1;      // spatial downsampling factor m of the content maps
    int content_channels = 4;  // C_c
    int style_dim = 8;
    int base_filters = 8;
    bool mask_conditioned_disc = true;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& s);
};

// ------------------------------------------------------------------ layers

struct Conv {
    tg::Tensor w, b;
    int stride = 1, pad = 0;
    void init(Rng& rng, int in_ch, int out_ch, int k, int stride_, int pad_,
              double scale = 1.0);
    tg::Tensor fwd(const tg::Tensor& x) const { return tg::conv2d(x, w, b, stride, pad); }
};

struct Linear {
    tg::Tensor w, b;
    void init(Rng& rng, int in_f, int out_f, double scale = 1.0);
    tg::Tensor fwd(const tg::Tensor& x) const { return tg::linear(x, w, b); }
};

struct ResBlock {
    Conv c1, c2;
    void init(Rng& rng, int ch);
    tg::Tensor fwd(const tg::Tensor& x) const;
};

struct AdaResBlock {
    Conv c1, c2;
    void init(Rng& rng, int ch);
    tg::Tensor fwd(const tg::Tensor& x, const tg::Tensor& g1, const tg::Tensor& b1,
                   const tg::Tensor& g2, const tg::Tensor& b2) const;
};

// Convolution with spectral weight normalization; u is the persistent power-
// iteration state (one step per training forward).
struct SNConv {
    tg::Tensor w, b;
    int stride = 1, pad = 0;
    std::vector<tg::Scalar> u;
    void init(Rng& rng, int in_ch, int out_ch, int k, int stride_, int pad_);
    tg::Tensor fwd(const tg::Tensor& x, bool update_power_iter);
};

// ---------------------------------------------------------------- networks

// 7x7 input conv, log2(m) strided downsampling convs, two residual blocks,
// then a 1x1 projection to the configured number of content channels.
struct ContentEncoder {
    Conv in;
    std::vector<Conv> down;
    ResBlock r1, r2;
    Conv out;
    void init(Rng& rng, const ModelConfig& cfg);
    tg::Tensor fwd(const tg::Tensor& x) const;
};

// Input conv, four strided downsampling convs, adaptive average pooling and
// a fully-connected head to the style vector.
struct StyleEncoder {
    Conv in;
    std::vector<Conv> down;
    Linear fc;
    void init(Rng& rng, const ModelConfig& cfg);
    tg::Tensor fwd(const tg::Tensor& x) const;
};

// Mirrors the content encoder with nearest-neighbor upsampling; style enters
// through AdaIN parameters produced by a small MLP. Output head is a scaled
// tanh into [0, 1].
struct Decoder {
    Conv in;
    AdaResBlock r1, r2;
    std::vector<Conv> up;
    Conv out;
    Linear mlp_trunk;
    std::vector<Linear> heads;  // one per AdaIN layer, each [N, 2*ch]
    int res_channels = 0;
    void init(Rng& rng, const ModelConfig& cfg);
    tg::Tensor fwd(const tg::Tensor& c, const tg::Tensor& s) const;
};

// One-scale patch discriminator; optionally conditioned on a foreground mask
// (input becomes [img .* mask, mask]).
struct Discriminator {
    std::vector<SNConv> convs;
    SNConv head;
    bool mask_conditioned = true;
    void init(Rng& rng, const ModelConfig& cfg);
    tg::Tensor fwd(const tg::Tensor& img, const tg::Tensor& mask, bool update_power_iter);
};

// ------------------------------------------------------------------- model

struct ContentStyleModel {
    ModelConfig cfg;
    double norm1 = 1.0, norm2 = 1.0;  // per-domain normalization constants
    ContentEncoder e1c, e2c;
    StyleEncoder e1s, e2s;
    Decoder g1, g2;
    Discriminator d1, d2;

    void init(uint64_t seed);
    // (H_c * W_c) / (H_x * W_x)
    double content_capacity() const {
        return 1.0 / (static_cast<double>(cfg.content_down) * cfg.content_down);
    }

    std::vector<std::pair<std::string, tg::Tensor>> named_gen_params();
    std::vector<std::pair<std::string, tg::Tensor>> named_disc_params();
    std::vector<tg::Tensor> gen_params();
    std::vector<tg::Tensor> disc_params();
    void set_requires_grad(bool on);

    void save(const std::string& path) const;
    static ContentStyleModel load(const std::string& path);
};

// ------------------------------------------------------------------ losses

// Type-erased network bundle so the loss formulas can be exercised against
// stub models in tests.
struct ModelFns {
    std::function<tg::Tensor(const tg::Tensor&)> e1c, e2c, e1s, e2s;
    std::function<tg::Tensor(const tg::Tensor&, const tg::Tensor&)> g1, g2;
    // (img, conditioning mask) -> patch score map
    std::function<tg::Tensor(const tg::Tensor&, const tg::Tensor&)> d1, d2;
};

ModelFns bind_model(ContentStyleModel& m, bool update_power_iter);

struct MunitBatch {
    tg::Tensor x1, x2;        // [N,1,H,W] in model units
    tg::Tensor mask1, mask2;  // foreground masks, same shape
    tg::Tensor s1_prior, s2_prior;  // [N, d] samples from the style prior
};

struct MunitTerms {
    tg::Tensor gan, image_self, content_self, style_self, total;
    tg::Tensor fake1, fake2;  // cross-translations, reused by the D update
};

// L = L_GAN + a1 L_image_self + a2 L_content_self + a3 L_style_self, with
// least-squares generator GAN terms on the cross-translated images.
MunitTerms munit_losses(const ModelFns& fns, const MunitBatch& batch, double alpha1,
                        double alpha2, double alpha3);

struct PftTerms {
    tg::Tensor gan, image_self, image_cross, content_cross, total;
    tg::Tensor fake1, fake2;
};

// Paired objective: L_GAN + b1 L_image_self + b2 L_image_cross +
// b3 L_content_cross, for spatially aligned pairs (x1, x2).
PftTerms pft_losses(const ModelFns& fns, const MunitBatch& batch, double beta1, double beta2,
                    double beta3);

// Symmetric least-squares discriminator objective for one domain.
tg::Tensor disc_loss(const std::function<tg::Tensor(const tg::Tensor&, const tg::Tensor&)>& d,
                     const tg::Tensor& real, const tg::Tensor& mask_real,
                     const tg::Tensor& fake_detached, const tg::Tensor& mask_fake);

// --------------------------------------------------------------- inference

ContentMap tensor_to_content(const tg::Tensor& t);
tg::Tensor content_to_tensor(const ContentMap& c);

// GuidanceModel adapter over a trained bundle; handles the [0,1] model-unit
// normalization on both sides.
class CsmGuidance : public GuidanceModel {
public:
    explicit CsmGuidance(ContentStyleModel model);
    ContentMap encode_content_ref(const RealImage& ref) override;
    ContentMap encode_content_target(const RealImage& img) override;
    StyleCode encode_style_target(const RealImage& img) override;
    RealImage decode_target(const ContentMap& c, const StyleCode& s) override;
    ContentMap decode_grad_content(const ContentMap& c, const StyleCode& s,
                                   const RealImage& dloss_dout) override;
    ContentStyleModel& model() { return model_; }

private:
    tg::Tensor image_tensor(const RealImage& img, double norm) const;
    ContentStyleModel model_;
};

}  // namespace cosmo
