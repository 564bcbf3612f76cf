#include "cosmo/train.hpp"

#include "cosmo/tg/checkpoint.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cosmo {

using tg::Tensor;

namespace {

struct LoadedItem {
    std::vector<tg::Scalar> img;   // normalized to model units
    std::vector<tg::Scalar> mask;  // dilated foreground
    std::string id;
};

// Foreground support with one 3x3 dilation so boundaries stay inside.
std::vector<tg::Scalar> training_mask(const RealImage& img) {
    auto fg = foreground_mask(img, 0.02);
    std::vector<tg::Scalar> out(fg.size(), 0);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            bool on = false;
            for (int dy = -1; dy <= 1 && !on; ++dy)
                for (int dx = -1; dx <= 1 && !on; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < img.h && xx >= 0 && xx < img.w &&
                        fg[static_cast<size_t>(yy) * img.w + xx])
                        on = true;
                }
            if (on) out[static_cast<size_t>(y) * img.w + x] = 1;
        }
    return out;
}

std::vector<LoadedItem> load_split(const DatasetManifest& data, const std::string& split,
                                   const std::string& contrast, bool paired_only) {
    std::vector<LoadedItem> items;
    for (const auto* it : data.select(split, contrast)) {
        if (paired_only && !it->paired) continue;
        RealImage img = data.load(*it);
        LoadedItem li;
        li.id = it->id;
        double norm = data.norm_for(contrast);
        li.img.resize(img.v.size());
        for (size_t i = 0; i < img.v.size(); ++i)
            li.img[i] = static_cast<tg::Scalar>(img.v[i] / norm);
        li.mask = training_mask(img);
        items.push_back(std::move(li));
    }
    return items;
}

Tensor stack_batch(const std::vector<const std::vector<tg::Scalar>*>& rows, int h, int w) {
    std::vector<tg::Scalar> data;
    data.reserve(rows.size() * static_cast<size_t>(h) * w);
    for (const auto* r : rows) data.insert(data.end(), r->begin(), r->end());
    return Tensor::from_data({static_cast<int>(rows.size()), 1, h, w}, std::move(data));
}

Tensor sample_styles(Rng& rng, int n, int d) {
    std::vector<tg::Scalar> data(static_cast<size_t>(n) * d);
    for (auto& v : data) v = static_cast<tg::Scalar>(rng.normal());
    return Tensor::from_data({n, d}, std::move(data));
}

void check_finite(double v, int iter, const char* what) {
    if (!std::isfinite(v)) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "training diverged: non-finite %s at iteration %d", what,
                      iter);
        throw std::runtime_error(buf);
    }
}

}  // namespace

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["alpha"] = {alpha1, alpha2, alpha3};
    j["beta"] = {beta1, beta2, beta3};
    j["iterations"] = iterations;
    j["batch"] = batch;
    j["seed"] = seed;
    j["lr"] = lr;
    j["adam_betas"] = {adam_beta1, adam_beta2};
    j["log_every"] = log_every;
    j["style_prior"] = "standard_normal";
    return j.dump(2);
}

void save_loss_csv(const std::vector<LossRow>& rows, const std::string& header,
                   const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_loss_csv: cannot open " + path);
    os << header << "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.iter, r.gan,
                      r.term1, r.term2, r.term3, r.disc, r.total);
        os << buf;
    }
}

std::vector<LossRow> pretrain(ContentStyleModel& model, const DatasetManifest& data,
                              const TrainConfig& cfg, const std::string& log_csv) {
    auto items1 = load_split(data, "train", "domain1", false);
    auto items2 = load_split(data, "train", "domain2", false);
    if (items1.empty() || items2.empty())
        throw std::runtime_error("pretrain: empty training split");
    int h = model.cfg.img, w = model.cfg.img;

    tg::Adam opt_g(cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    opt_g.add_params(model.gen_params());
    tg::Adam opt_d(cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    opt_d.add_params(model.disc_params());

    Rng rng = Rng(cfg.seed).fork(0x7124);
    std::vector<LossRow> history;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<const std::vector<tg::Scalar>*> b1, b2, m1, m2;
        for (int k = 0; k < cfg.batch; ++k) {
            const auto& i1 = items1[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(items1.size()) - 1))];
            const auto& i2 = items2[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(items2.size()) - 1))];
            b1.push_back(&i1.img);
            m1.push_back(&i1.mask);
            b2.push_back(&i2.img);
            m2.push_back(&i2.mask);
        }
        MunitBatch batch;
        batch.x1 = stack_batch(b1, h, w);
        batch.x2 = stack_batch(b2, h, w);
        batch.mask1 = stack_batch(m1, h, w);
        batch.mask2 = stack_batch(m2, h, w);
        batch.s1_prior = sample_styles(rng, cfg.batch, model.cfg.style_dim);
        batch.s2_prior = sample_styles(rng, cfg.batch, model.cfg.style_dim);

        ModelFns fns = bind_model(model, true);

        // generator update
        opt_g.zero_grad();
        MunitTerms terms = munit_losses(fns, batch, cfg.alpha1, cfg.alpha2, cfg.alpha3);
        check_finite(terms.total.item(), iter, "generator loss");
        tg::backward(terms.total);
        opt_g.step();

        // discriminator update on the detached translations
        opt_d.zero_grad();
        Tensor dloss = tg::add(
            disc_loss(fns.d1, batch.x1, batch.mask1, terms.fake1.detach(), batch.mask2),
            disc_loss(fns.d2, batch.x2, batch.mask2, terms.fake2.detach(), batch.mask1));
        check_finite(dloss.item(), iter, "discriminator loss");
        tg::backward(dloss);
        opt_d.step();

        if (iter == 1 || iter % cfg.log_every == 0 || iter == cfg.iterations) {
            LossRow row;
            row.iter = iter;
            row.gan = terms.gan.item();
            row.term1 = terms.image_self.item();
            row.term2 = terms.content_self.item();
            row.term3 = terms.style_self.item();
            row.disc = dloss.item();
            row.total = terms.total.item();
            history.push_back(row);
        }
    }
    if (!log_csv.empty())
        save_loss_csv(history, "iter,gan,image_self,content_self,style_self,disc,total", log_csv);
    return history;
}

std::vector<LossRow> finetune(ContentStyleModel& model, const DatasetManifest& data,
                              const TrainConfig& cfg, const std::string& log_csv) {
    auto items1 = load_split(data, "train", "domain1", true);
    auto items2 = load_split(data, "train", "domain2", true);
    if (cfg.iterations > 0 && (items1.empty() || items1.size() != items2.size()))
        throw std::runtime_error("finetune: needs a non-empty paired train subset");
    int h = model.cfg.img, w = model.cfg.img;

    tg::Adam opt_g(cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    opt_g.add_params(model.gen_params());
    tg::Adam opt_d(cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    opt_d.add_params(model.disc_params());

    Rng rng = Rng(cfg.seed).fork(0x7125);
    std::vector<LossRow> history;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<const std::vector<tg::Scalar>*> b1, b2, m1, m2;
        for (int k = 0; k < cfg.batch; ++k) {
            // aligned pair: same phantom index in both domains
            size_t idx = static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(items1.size()) - 1));
            b1.push_back(&items1[idx].img);
            m1.push_back(&items1[idx].mask);
            b2.push_back(&items2[idx].img);
            m2.push_back(&items2[idx].mask);
        }
        MunitBatch batch;
        batch.x1 = stack_batch(b1, h, w);
        batch.x2 = stack_batch(b2, h, w);
        batch.mask1 = stack_batch(m1, h, w);
        batch.mask2 = stack_batch(m2, h, w);
        batch.s1_prior = sample_styles(rng, cfg.batch, model.cfg.style_dim);
        batch.s2_prior = sample_styles(rng, cfg.batch, model.cfg.style_dim);

        ModelFns fns = bind_model(model, true);

        opt_g.zero_grad();
        PftTerms terms = pft_losses(fns, batch, cfg.beta1, cfg.beta2, cfg.beta3);
        check_finite(terms.total.item(), iter, "generator loss");
        tg::backward(terms.total);
        opt_g.step();

        opt_d.zero_grad();
        Tensor dloss = tg::add(
            disc_loss(fns.d1, batch.x1, batch.mask1, terms.fake1.detach(), batch.mask2),
            disc_loss(fns.d2, batch.x2, batch.mask2, terms.fake2.detach(), batch.mask1));
        check_finite(dloss.item(), iter, "discriminator loss");
        tg::backward(dloss);
        opt_d.step();

        if (iter == 1 || iter % cfg.log_every == 0 || iter == cfg.iterations) {
            LossRow row;
            row.iter = iter;
            row.gan = terms.gan.item();
            row.term1 = terms.image_self.item();
            row.term2 = terms.image_cross.item();
            row.term3 = terms.content_cross.item();
            row.disc = dloss.item();
            row.total = terms.total.item();
            history.push_back(row);
        }
    }
    if (!log_csv.empty())
        save_loss_csv(history, "iter,gan,image_self,image_cross,content_cross,disc,total",
                      log_csv);
    return history;
}

// ---------------------------------------------------------------- denoiser

void DenoiserNet::init(uint64_t seed, int base_filters) {
    cfg.base_filters = base_filters;
    Rng rng = Rng(seed).fork(0xD40);
    int f = base_filters;
    c0.init(rng, 1, f, 3, 1, 1);
    c1.init(rng, f, f, 3, 1, 1);
    c2.init(rng, f, f, 3, 1, 1);
    c3.init(rng, f, 1, 3, 1, 1);
}

Tensor DenoiserNet::fwd(const Tensor& x) const {
    Tensor t = tg::relu(c0.fwd(x));
    t = tg::relu(c1.fwd(t));
    t = tg::relu(c2.fwd(t));
    return c3.fwd(t);  // predicted noise
}

std::vector<std::pair<std::string, Tensor>> DenoiserNet::named_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("c0.w", c0.w);
    out.emplace_back("c0.b", c0.b);
    out.emplace_back("c1.w", c1.w);
    out.emplace_back("c1.b", c1.b);
    out.emplace_back("c2.w", c2.w);
    out.emplace_back("c2.b", c2.b);
    out.emplace_back("c3.w", c3.w);
    out.emplace_back("c3.b", c3.b);
    return out;
}

void DenoiserNet::set_requires_grad(bool on) {
    for (auto& [n, t] : named_params()) t.set_requires_grad(on);
}

void DenoiserNet::save(const std::string& path) const {
    auto* self = const_cast<DenoiserNet*>(this);
    tg::Checkpoint ck;
    nlohmann::json j;
    j["base_filters"] = cfg.base_filters;
    j["norm"] = norm;
    j["sigma_min"] = sigma_min;
    j["sigma_max"] = sigma_max;
    ck.meta = j.dump();
    for (auto& [name, t] : self->named_params()) ck.put(name, t);
    ck.save(path);
}

DenoiserNet DenoiserNet::load(const std::string& path) {
    tg::Checkpoint ck = tg::Checkpoint::load(path);
    auto j = nlohmann::json::parse(ck.meta);
    DenoiserNet net;
    net.init(0, j.at("base_filters"));
    net.norm = j.at("norm");
    net.sigma_min = j.at("sigma_min");
    net.sigma_max = j.at("sigma_max");
    for (auto& [name, t] : net.named_params()) t.data() = ck.get(name).data();
    return net;
}

std::vector<LossRow> train_denoiser(DenoiserNet& net, const DatasetManifest& data,
                                    const DenoiserTrainConfig& cfg, const std::string& log_csv) {
    auto items = load_split(data, "train", "domain2", false);
    if (items.empty()) throw std::runtime_error("train_denoiser: empty training split");
    net.norm = data.norm_domain2;
    net.sigma_min = cfg.sigma_min;
    net.sigma_max = cfg.sigma_max;
    int h = data.params.grid, w = data.params.grid;

    tg::Adam opt(cfg.lr, 0.9, 0.999);
    std::vector<Tensor> params;
    for (auto& [n, t] : net.named_params()) params.push_back(t);
    opt.add_params(params);

    Rng rng = Rng(cfg.seed).fork(0xD41);
    std::vector<LossRow> history;
    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const auto& item = items[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(items.size()) - 1))];
        double sigma = rng.uniform(cfg.sigma_min, cfg.sigma_max);
        std::vector<tg::Scalar> noisy(item.img.size()), noise(item.img.size());
        for (size_t i = 0; i < noisy.size(); ++i) {
            noise[i] = static_cast<tg::Scalar>(rng.normal(0.0, sigma));
            noisy[i] = item.img[i] + noise[i];
        }
        Tensor x = Tensor::from_data({1, 1, h, w}, std::move(noisy));
        Tensor target = Tensor::from_data({1, 1, h, w}, std::move(noise));
        opt.zero_grad();
        Tensor loss = tg::mse_loss(net.fwd(x), target);
        check_finite(loss.item(), iter, "denoiser loss");
        tg::backward(loss);
        opt.step();
        if (iter == 1 || iter % cfg.log_every == 0 || iter == cfg.iterations) {
            LossRow row;
            row.iter = iter;
            row.total = loss.item();
            history.push_back(row);
        }
    }
    if (!log_csv.empty()) save_loss_csv(history, "iter,gan,t1,t2,t3,disc,mse", log_csv);
    return history;
}

RealImage CnnDenoiser::denoise(const RealImage& img) {
    tg::NoGradGuard ng;
    std::vector<tg::Scalar> data(img.v.size());
    for (size_t i = 0; i < img.v.size(); ++i)
        data[i] = static_cast<tg::Scalar>(img.v[i] / net_.norm);
    Tensor x = Tensor::from_data({1, 1, img.h, img.w}, std::move(data));
    Tensor noise = net_.fwd(x);
    RealImage out(img.h, img.w);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = (static_cast<double>(x.data()[i]) - static_cast<double>(noise.data()[i])) *
                   net_.norm;
    return out;
}

}  // namespace cosmo
