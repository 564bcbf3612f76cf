#include "cosmo/csmodel.hpp"

#include "cosmo/tg/checkpoint.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace cosmo {

using tg::Tensor;

namespace {

int log2_int(int m) {
    switch (m) {
        case 1: return 0;
        case 2: return 1;
        case 4: return 2;
        default: throw std::invalid_argument("content_down must be 1, 2 or 4");
    }
}

Tensor randn_tensor(Rng& rng, const std::vector<int>& shape, double stddev) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<tg::Scalar> data(static_cast<size_t>(n));
    for (auto& v : data) v = static_cast<tg::Scalar>(rng.normal(0.0, stddev));
    return Tensor::from_data(shape, std::move(data), true);
}

void normalize_vec(std::vector<tg::Scalar>& v) {
    tg::Scalar n = 0;
    for (auto t : v) n += t * t;
    n = std::sqrt(n) + tg::Scalar(1e-12);
    for (auto& t : v) t /= n;
}

}  // namespace

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["img"] = img;
    j["content_down"] = content_down;
    j["content_channels"] = content_channels;
    j["style_dim"] = style_dim;
    j["base_filters"] = base_filters;
    j["mask_conditioned_disc"] = mask_conditioned_disc;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& s) {
    auto j = nlohmann::json::parse(s);
    ModelConfig c;
    c.img = j.at("img");
    c.content_down = j.at("content_down");
    c.content_channels = j.at("content_channels");
    c.style_dim = j.at("style_dim");
    c.base_filters = j.at("base_filters");
    c.mask_conditioned_disc = j.at("mask_conditioned_disc");
    return c;
}

// ------------------------------------------------------------------ layers

void Conv::init(Rng& rng, int in_ch, int out_ch, int k, int stride_, int pad_, double scale) {
    stride = stride_;
    pad = pad_;
    double stddev = scale * std::sqrt(2.0 / (in_ch * k * k));
    w = randn_tensor(rng, {out_ch, in_ch, k, k}, stddev);
    b = Tensor::zeros({out_ch}, true);
}

void Linear::init(Rng& rng, int in_f, int out_f, double scale) {
    double stddev = scale * std::sqrt(2.0 / in_f);
    w = randn_tensor(rng, {out_f, in_f}, stddev);
    b = Tensor::zeros({out_f}, true);
}

void ResBlock::init(Rng& rng, int ch) {
    c1.init(rng, ch, ch, 3, 1, 1);
    c2.init(rng, ch, ch, 3, 1, 1);
}

Tensor ResBlock::fwd(const Tensor& x) const {
    Tensor y = tg::instance_norm(c1.fwd(x));
    y = tg::relu(y);
    y = tg::instance_norm(c2.fwd(y));
    return tg::add(x, y);
}

void AdaResBlock::init(Rng& rng, int ch) {
    c1.init(rng, ch, ch, 3, 1, 1);
    c2.init(rng, ch, ch, 3, 1, 1);
}

Tensor AdaResBlock::fwd(const Tensor& x, const Tensor& g1, const Tensor& b1, const Tensor& g2,
                        const Tensor& b2) const {
    Tensor y = tg::adain(c1.fwd(x), g1, b1);
    y = tg::relu(y);
    y = tg::adain(c2.fwd(y), g2, b2);
    return tg::add(x, y);
}

void SNConv::init(Rng& rng, int in_ch, int out_ch, int k, int stride_, int pad_) {
    stride = stride_;
    pad = pad_;
    double stddev = std::sqrt(2.0 / (in_ch * k * k));
    w = randn_tensor(rng, {out_ch, in_ch, k, k}, stddev);
    b = Tensor::zeros({out_ch}, true);
    u.resize(static_cast<size_t>(out_ch));
    for (auto& t : u) t = static_cast<tg::Scalar>(rng.normal());
    normalize_vec(u);
}

Tensor SNConv::fwd(const Tensor& x, bool update_power_iter) {
    int rows = w.dim(0);
    int cols = static_cast<int>(w.numel() / rows);
    std::vector<tg::Scalar> v;
    if (update_power_iter) {
        tg::power_iteration_step(w.data(), rows, cols, u, v);
    } else {
        // v from the stored u, without advancing the state
        v.assign(static_cast<size_t>(cols), tg::Scalar(0));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                v[static_cast<size_t>(c)] += w.data()[static_cast<size_t>(r * cols + c)] *
                                             u[static_cast<size_t>(r)];
        normalize_vec(v);
    }
    Tensor wn = tg::spectral_norm_apply(w, u, v);
    return tg::conv2d(x, wn, b, stride, pad);
}

// ---------------------------------------------------------------- networks

void ContentEncoder::init(Rng& rng, const ModelConfig& cfg) {
    int f = cfg.base_filters;
    in.init(rng, 1, f, 7, 1, 3);
    int ch = f;
    down.clear();
    for (int i = 0; i < log2_int(cfg.content_down); ++i) {
        Conv c;
        c.init(rng, ch, ch * 2, 4, 2, 1);
        down.push_back(std::move(c));
        ch *= 2;
    }
    r1.init(rng, ch);
    r2.init(rng, ch);
    out.init(rng, ch, cfg.content_channels, 1, 1, 0);
}

Tensor ContentEncoder::fwd(const Tensor& x) const {
    Tensor t = tg::relu(in.fwd(x));
    for (const auto& d : down) t = tg::relu(tg::instance_norm(d.fwd(t)));
    t = r1.fwd(t);
    t = r2.fwd(t);
    return out.fwd(t);
}

void StyleEncoder::init(Rng& rng, const ModelConfig& cfg) {
    int f = cfg.base_filters;
    in.init(rng, 1, f, 7, 1, 3);
    down.clear();
    int ch = f;
    for (int i = 0; i < 4; ++i) {
        int next = std::min(ch * 2, 4 * f);
        Conv c;
        c.init(rng, ch, next, 4, 2, 1);
        down.push_back(std::move(c));
        ch = next;
    }
    fc.init(rng, ch, cfg.style_dim);
}

Tensor StyleEncoder::fwd(const Tensor& x) const {
    Tensor t = tg::relu(in.fwd(x));
    for (const auto& d : down) t = tg::relu(d.fwd(t));
    t = tg::adaptive_avg_pool2d(t, 1, 1);
    t = tg::reshape(t, {t.dim(0), t.dim(1)});
    return fc.fwd(t);
}

void Decoder::init(Rng& rng, const ModelConfig& cfg) {
    int f = cfg.base_filters;
    int ch = f * cfg.content_down;
    res_channels = ch;
    in.init(rng, cfg.content_channels, ch, 3, 1, 1);
    r1.init(rng, ch);
    r2.init(rng, ch);
    up.clear();
    int c = ch;
    for (int i = 0; i < log2_int(cfg.content_down); ++i) {
        Conv u;
        u.init(rng, c, c / 2, 3, 1, 1);
        up.push_back(std::move(u));
        c /= 2;
    }
    out.init(rng, c, 1, 7, 1, 3);
    int hidden = 4 * f;
    mlp_trunk.init(rng, cfg.style_dim, hidden);
    heads.clear();
    for (int i = 0; i < 4; ++i) {
        Linear h;
        h.init(rng, hidden, 2 * ch, 0.1);  // start near identity modulation
        heads.push_back(std::move(h));
    }
}

Tensor Decoder::fwd(const Tensor& c, const Tensor& s) const {
    Tensor h = tg::relu(mlp_trunk.fwd(s));
    std::vector<Tensor> gammas, betas;
    for (const auto& head : heads) {
        Tensor gb = head.fwd(h);
        gammas.push_back(tg::add_const(tg::narrow_cols(gb, 0, res_channels), 1.0));
        betas.push_back(tg::narrow_cols(gb, res_channels, res_channels));
    }
    Tensor t = tg::relu(in.fwd(c));
    t = r1.fwd(t, gammas[0], betas[0], gammas[1], betas[1]);
    t = r2.fwd(t, gammas[2], betas[2], gammas[3], betas[3]);
    for (const auto& u : up) {
        t = tg::upsample_nearest2d(t, 2);
        t = tg::relu(tg::instance_norm(u.fwd(t)));
    }
    t = out.fwd(t);
    // tanh head mapped onto [0, 1]
    return tg::scale(tg::add_const(tg::tanh_op(t), 1.0), 0.5);
}

void Discriminator::init(Rng& rng, const ModelConfig& cfg) {
    mask_conditioned = cfg.mask_conditioned_disc;
    int f = cfg.base_filters;
    int in_ch = mask_conditioned ? 2 : 1;
    convs.clear();
    SNConv c0, c1, c2;
    c0.init(rng, in_ch, f, 4, 2, 1);
    c1.init(rng, f, 2 * f, 4, 2, 1);
    c2.init(rng, 2 * f, 4 * f, 4, 2, 1);
    convs.push_back(std::move(c0));
    convs.push_back(std::move(c1));
    convs.push_back(std::move(c2));
    head.init(rng, 4 * f, 1, 3, 1, 1);
}

Tensor Discriminator::fwd(const Tensor& img, const Tensor& mask, bool update_power_iter) {
    Tensor t = img;
    // the raw image stays visible so background signal can be penalized;
    // the mask channel tells the critic where background is
    if (mask_conditioned) t = tg::concat_channels(img, mask);
    for (auto& c : convs) t = tg::relu(c.fwd(t, update_power_iter), 0.2);
    return head.fwd(t, update_power_iter);
}

// ------------------------------------------------------------------- model

void ContentStyleModel::init(uint64_t seed) {
    Rng rng = Rng(seed).fork(0x919);
    e1c.init(rng, cfg);
    e2c.init(rng, cfg);
    e1s.init(rng, cfg);
    e2s.init(rng, cfg);
    g1.init(rng, cfg);
    g2.init(rng, cfg);
    d1.init(rng, cfg);
    d2.init(rng, cfg);
}

namespace {

void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             Conv& c) {
    out.emplace_back(prefix + ".w", c.w);
    out.emplace_back(prefix + ".b", c.b);
}
void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             Linear& l) {
    out.emplace_back(prefix + ".w", l.w);
    out.emplace_back(prefix + ".b", l.b);
}
void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             ResBlock& r) {
    collect(out, prefix + ".c1", r.c1);
    collect(out, prefix + ".c2", r.c2);
}
void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             AdaResBlock& r) {
    collect(out, prefix + ".c1", r.c1);
    collect(out, prefix + ".c2", r.c2);
}
void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             ContentEncoder& e) {
    collect(out, prefix + ".in", e.in);
    for (size_t i = 0; i < e.down.size(); ++i)
        collect(out, prefix + ".down" + std::to_string(i), e.down[i]);
    collect(out, prefix + ".r1", e.r1);
    collect(out, prefix + ".r2", e.r2);
    collect(out, prefix + ".out", e.out);
}
void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             StyleEncoder& e) {
    collect(out, prefix + ".in", e.in);
    for (size_t i = 0; i < e.down.size(); ++i)
        collect(out, prefix + ".down" + std::to_string(i), e.down[i]);
    collect(out, prefix + ".fc", e.fc);
}
void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             Decoder& g) {
    collect(out, prefix + ".in", g.in);
    collect(out, prefix + ".r1", g.r1);
    collect(out, prefix + ".r2", g.r2);
    for (size_t i = 0; i < g.up.size(); ++i)
        collect(out, prefix + ".up" + std::to_string(i), g.up[i]);
    collect(out, prefix + ".out", g.out);
    collect(out, prefix + ".mlp", g.mlp_trunk);
    for (size_t i = 0; i < g.heads.size(); ++i)
        collect(out, prefix + ".head" + std::to_string(i), g.heads[i]);
}
void collect_sn(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                SNConv& c) {
    out.emplace_back(prefix + ".w", c.w);
    out.emplace_back(prefix + ".b", c.b);
}
void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             Discriminator& d) {
    for (size_t i = 0; i < d.convs.size(); ++i)
        collect_sn(out, prefix + ".c" + std::to_string(i), d.convs[i]);
    collect_sn(out, prefix + ".head", d.head);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> ContentStyleModel::named_gen_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    collect(out, "e1c", e1c);
    collect(out, "e2c", e2c);
    collect(out, "e1s", e1s);
    collect(out, "e2s", e2s);
    collect(out, "g1", g1);
    collect(out, "g2", g2);
    return out;
}

std::vector<std::pair<std::string, Tensor>> ContentStyleModel::named_disc_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    collect(out, "d1", d1);
    collect(out, "d2", d2);
    return out;
}

std::vector<Tensor> ContentStyleModel::gen_params() {
    std::vector<Tensor> out;
    for (auto& [n, t] : named_gen_params()) out.push_back(t);
    return out;
}

std::vector<Tensor> ContentStyleModel::disc_params() {
    std::vector<Tensor> out;
    for (auto& [n, t] : named_disc_params()) out.push_back(t);
    return out;
}

void ContentStyleModel::set_requires_grad(bool on) {
    for (auto& [n, t] : named_gen_params()) t.set_requires_grad(on);
    for (auto& [n, t] : named_disc_params()) t.set_requires_grad(on);
}

void ContentStyleModel::save(const std::string& path) const {
    auto* self = const_cast<ContentStyleModel*>(this);
    tg::Checkpoint ck;
    nlohmann::json j = nlohmann::json::parse(cfg.to_json());
    j["norm1"] = norm1;
    j["norm2"] = norm2;
    ck.meta = j.dump();
    for (auto& [name, t] : self->named_gen_params()) ck.put(name, t);
    for (auto& [name, t] : self->named_disc_params()) ck.put(name, t);
    // persistent power-iteration state
    auto put_u = [&](const std::string& name, const SNConv& c) {
        ck.put(name, Tensor::from_data({static_cast<int>(c.u.size())}, c.u));
    };
    for (size_t i = 0; i < d1.convs.size(); ++i)
        put_u("d1.c" + std::to_string(i) + ".u", d1.convs[i]);
    put_u("d1.head.u", d1.head);
    for (size_t i = 0; i < d2.convs.size(); ++i)
        put_u("d2.c" + std::to_string(i) + ".u", d2.convs[i]);
    put_u("d2.head.u", d2.head);
    ck.save(path);
}

ContentStyleModel ContentStyleModel::load(const std::string& path) {
    tg::Checkpoint ck = tg::Checkpoint::load(path);
    auto j = nlohmann::json::parse(ck.meta);
    ContentStyleModel m;
    m.cfg = ModelConfig::from_json(ck.meta);
    m.norm1 = j.at("norm1");
    m.norm2 = j.at("norm2");
    m.init(0);  // builds the right shapes, weights are overwritten below
    for (auto& [name, t] : m.named_gen_params()) {
        Tensor loaded = ck.get(name);
        if (loaded.shape() != t.shape())
            throw std::runtime_error("model load: shape mismatch for " + name);
        t.data() = loaded.data();
    }
    for (auto& [name, t] : m.named_disc_params()) {
        Tensor loaded = ck.get(name);
        if (loaded.shape() != t.shape())
            throw std::runtime_error("model load: shape mismatch for " + name);
        t.data() = loaded.data();
    }
    auto get_u = [&](const std::string& name, SNConv& c) {
        c.u = ck.get(name).data();
    };
    for (size_t i = 0; i < m.d1.convs.size(); ++i)
        get_u("d1.c" + std::to_string(i) + ".u", m.d1.convs[i]);
    get_u("d1.head.u", m.d1.head);
    for (size_t i = 0; i < m.d2.convs.size(); ++i)
        get_u("d2.c" + std::to_string(i) + ".u", m.d2.convs[i]);
    get_u("d2.head.u", m.d2.head);
    return m;
}

// ------------------------------------------------------------------ losses

ModelFns bind_model(ContentStyleModel& m, bool update_power_iter) {
    ModelFns f;
    f.e1c = [&m](const Tensor& x) { return m.e1c.fwd(x); };
    f.e2c = [&m](const Tensor& x) { return m.e2c.fwd(x); };
    f.e1s = [&m](const Tensor& x) { return m.e1s.fwd(x); };
    f.e2s = [&m](const Tensor& x) { return m.e2s.fwd(x); };
    f.g1 = [&m](const Tensor& c, const Tensor& s) { return m.g1.fwd(c, s); };
    f.g2 = [&m](const Tensor& c, const Tensor& s) { return m.g2.fwd(c, s); };
    f.d1 = [&m, update_power_iter](const Tensor& x, const Tensor& mask) {
        return m.d1.fwd(x, mask, update_power_iter);
    };
    f.d2 = [&m, update_power_iter](const Tensor& x, const Tensor& mask) {
        return m.d2.fwd(x, mask, update_power_iter);
    };
    return f;
}

MunitTerms munit_losses(const ModelFns& fns, const MunitBatch& b, double alpha1, double alpha2,
                        double alpha3) {
    Tensor c1 = fns.e1c(b.x1);
    Tensor s1 = fns.e1s(b.x1);
    Tensor c2 = fns.e2c(b.x2);
    Tensor s2 = fns.e2s(b.x2);

    MunitTerms t;
    Tensor recon1 = fns.g1(c1, s1);
    Tensor recon2 = fns.g2(c2, s2);
    t.image_self = tg::add(tg::l1_loss(b.x1, recon1), tg::l1_loss(b.x2, recon2));

    t.fake2 = fns.g2(c1, b.s2_prior);  // domain-1 content rendered in domain 2
    t.fake1 = fns.g1(c2, b.s1_prior);
    t.content_self = tg::add(tg::l1_loss(c1, fns.e2c(t.fake2)), tg::l1_loss(c2, fns.e1c(t.fake1)));
    t.style_self =
        tg::add(tg::l1_loss(b.s2_prior, fns.e2s(t.fake2)), tg::l1_loss(b.s1_prior, fns.e1s(t.fake1)));
    t.gan = tg::add(tg::mse_to_const(fns.d2(t.fake2, b.mask1), 1.0),
                    tg::mse_to_const(fns.d1(t.fake1, b.mask2), 1.0));

    t.total = tg::add(t.gan, tg::add(tg::scale(t.image_self, alpha1),
                                     tg::add(tg::scale(t.content_self, alpha2),
                                             tg::scale(t.style_self, alpha3))));
    return t;
}

PftTerms pft_losses(const ModelFns& fns, const MunitBatch& b, double beta1, double beta2,
                    double beta3) {
    Tensor c1 = fns.e1c(b.x1);
    Tensor s1 = fns.e1s(b.x1);
    Tensor c2 = fns.e2c(b.x2);
    Tensor s2 = fns.e2s(b.x2);

    PftTerms t;
    Tensor recon1 = fns.g1(c1, s1);
    Tensor recon2 = fns.g2(c2, s2);
    t.image_self = tg::add(tg::l1_loss(b.x1, recon1), tg::l1_loss(b.x2, recon2));

    Tensor cross2 = fns.g2(c1, s2);  // render the pair's shared content with the real styles
    Tensor cross1 = fns.g1(c2, s1);
    t.image_cross = tg::add(tg::l1_loss(b.x2, cross2), tg::l1_loss(b.x1, cross1));
    t.content_cross = tg::l1_loss(c1, c2);

    t.fake2 = fns.g2(c1, b.s2_prior);
    t.fake1 = fns.g1(c2, b.s1_prior);
    t.gan = tg::add(tg::mse_to_const(fns.d2(t.fake2, b.mask1), 1.0),
                    tg::mse_to_const(fns.d1(t.fake1, b.mask2), 1.0));

    t.total = tg::add(t.gan, tg::add(tg::scale(t.image_self, beta1),
                                     tg::add(tg::scale(t.image_cross, beta2),
                                             tg::scale(t.content_cross, beta3))));
    return t;
}

tg::Tensor disc_loss(const std::function<Tensor(const Tensor&, const Tensor&)>& d,
                     const Tensor& real, const Tensor& mask_real, const Tensor& fake_detached,
                     const Tensor& mask_fake) {
    return tg::add(tg::mse_to_const(d(real, mask_real), 1.0),
                   tg::mse_to_const(d(fake_detached, mask_fake), 0.0));
}

// --------------------------------------------------------------- inference

ContentMap tensor_to_content(const Tensor& t) {
    ContentMap c(t.dim(1), t.dim(2), t.dim(3));
    for (size_t i = 0; i < c.v.size(); ++i) c.v[i] = static_cast<double>(t.data()[i]);
    return c;
}

tg::Tensor content_to_tensor(const ContentMap& c) {
    std::vector<tg::Scalar> data(c.v.size());
    for (size_t i = 0; i < c.v.size(); ++i) data[i] = static_cast<tg::Scalar>(c.v[i]);
    return Tensor::from_data({1, c.channels, c.h, c.w}, std::move(data));
}

CsmGuidance::CsmGuidance(ContentStyleModel model) : model_(std::move(model)) {
    model_.set_requires_grad(false);
}

tg::Tensor CsmGuidance::image_tensor(const RealImage& img, double norm) const {
    std::vector<tg::Scalar> data(img.v.size());
    for (size_t i = 0; i < img.v.size(); ++i)
        data[i] = static_cast<tg::Scalar>(img.v[i] / norm);
    return Tensor::from_data({1, 1, img.h, img.w}, std::move(data));
}

ContentMap CsmGuidance::encode_content_ref(const RealImage& ref) {
    tg::NoGradGuard ng;
    return tensor_to_content(model_.e1c.fwd(image_tensor(ref, model_.norm1)));
}

ContentMap CsmGuidance::encode_content_target(const RealImage& img) {
    tg::NoGradGuard ng;
    return tensor_to_content(model_.e2c.fwd(image_tensor(img, model_.norm2)));
}

StyleCode CsmGuidance::encode_style_target(const RealImage& img) {
    tg::NoGradGuard ng;
    Tensor s = model_.e2s.fwd(image_tensor(img, model_.norm2));
    StyleCode out;
    out.v.assign(s.data().begin(), s.data().end());
    return out;
}

RealImage CsmGuidance::decode_target(const ContentMap& c, const StyleCode& s) {
    tg::NoGradGuard ng;
    std::vector<tg::Scalar> sv(s.v.begin(), s.v.end());
    int sd = static_cast<int>(sv.size());
    Tensor st = Tensor::from_data({1, sd}, std::move(sv));
    Tensor img = model_.g2.fwd(content_to_tensor(c), st);
    RealImage out(img.dim(2), img.dim(3));
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = static_cast<double>(img.data()[i]) * model_.norm2;
    return out;
}

ContentMap CsmGuidance::decode_grad_content(const ContentMap& c, const StyleCode& s,
                                            const RealImage& dloss_dout) {
    std::vector<tg::Scalar> sv(s.v.begin(), s.v.end());
    int sd = static_cast<int>(sv.size());
    Tensor st = Tensor::from_data({1, sd}, std::move(sv));
    Tensor ct = content_to_tensor(c);
    ct.set_requires_grad(true);
    Tensor decoded = model_.g2.fwd(ct, st);
    // decoded is in model units; the caller's gradient is per a.u. pixel
    std::vector<tg::Scalar> seed(dloss_dout.v.size());
    for (size_t i = 0; i < seed.size(); ++i)
        seed[i] = static_cast<tg::Scalar>(dloss_dout.v[i] * model_.norm2);
    tg::backward_seeded(decoded, seed);
    ContentMap grad(c.channels, c.h, c.w);
    const auto& g = ct.grad();
    for (size_t i = 0; i < grad.v.size(); ++i) grad.v[i] = static_cast<double>(g[i]);
    return grad;
}

}  // namespace cosmo
