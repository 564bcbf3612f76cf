#pragma once

#include "cosmo/csmodel.hpp"
#include "cosmo/dataset.hpp"

#include <string>
#include <vector>

namespace cosmo {

struct TrainConfig {
    double alpha1 = 1.0, alpha2 = 1.0, alpha3 = 1.0;  // pre-training weights
    double beta1 = 1.0, beta2 = 1.0, beta3 = 1.0;     // fine-tuning weights
    int iterations = 2000;
    int batch = 1;
    uint64_t seed = 1;
    double lr = 1e-4;
    double adam_beta1 = 0.5, adam_beta2 = 0.999;
    int log_every = 25;

    // full record of the configuration, including the fixed standard-normal
    // style prior
    std::string to_json() const;
};

struct LossRow {
    int iter = 0;
    double gan = 0, term1 = 0, term2 = 0, term3 = 0, disc = 0, total = 0;
};

// Alternating generator/discriminator updates on unpaired batches drawn from
// the train split. Throws on non-finite loss. Deterministic per seed.
std::vector<LossRow> pretrain(ContentStyleModel& model, const DatasetManifest& data,
                              const TrainConfig& cfg, const std::string& log_csv = "");

// Paired fine-tuning on the paired train subset; requires at least one
// paired phantom. Zero iterations leaves the model unchanged.
std::vector<LossRow> finetune(ContentStyleModel& model, const DatasetManifest& data,
                              const TrainConfig& cfg, const std::string& log_csv = "");

void save_loss_csv(const std::vector<LossRow>& rows, const std::string& header,
                   const std::string& path);

// ---------------------------------------------------------------- denoiser

// Small residual CNN noise predictor: denoised = x - f(x).
struct DenoiserNet {
    ModelConfig cfg;  // img + base_filters are used
    double norm = 1.0;
    double sigma_min = 0.01, sigma_max = 0.1;
    Conv c0, c1, c2, c3;

    void init(uint64_t seed, int base_filters);
    tg::Tensor fwd(const tg::Tensor& x) const;
    std::vector<std::pair<std::string, tg::Tensor>> named_params();
    void set_requires_grad(bool on);
    void save(const std::string& path) const;
    static DenoiserNet load(const std::string& path);
};

struct DenoiserTrainConfig {
    int iterations = 1500;
    uint64_t seed = 1;
    double lr = 1e-3;
    double sigma_min = 0.01, sigma_max = 0.1;  // noise level range, fraction of dynamic range
    int log_every = 50;
};

std::vector<LossRow> train_denoiser(DenoiserNet& net, const DatasetManifest& data,
                                    const DenoiserTrainConfig& cfg,
                                    const std::string& log_csv = "");

class CnnDenoiser : public Denoiser {
public:
    explicit CnnDenoiser(DenoiserNet net) : net_(std::move(net)) {
        net_.set_requires_grad(false);
    }
    RealImage denoise(const RealImage& img) override;

private:
    DenoiserNet net_;
};

}  // namespace cosmo
