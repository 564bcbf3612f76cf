#pragma once

#include "cosmo/csmodel.hpp"
#include "cosmo/dataset.hpp"
#include "cosmo/sweep.hpp"
#include "cosmo/train.hpp"

#include <string>
#include <vector>

namespace cosmo {

struct ExperimentEnv {
    std::string out_root = "out";
    uint64_t seed = 1;
    int jobs = 1;
    bool fast = false;  // reduced iteration budgets for smoke runs
};

// ---- cached build steps (idempotent: a step re-runs only when its inputs
// ---- hash to a directory that does not exist yet; all steps are
// ---- deterministic per seed, so cache hits are bit-identical re-creations)

std::string dataset_cache_dir(const DatasetParams& p, const std::string& root);
DatasetManifest ensure_dataset(const DatasetParams& p, const std::string& root);

struct ModelBuildSpec {
    ModelConfig model;
    TrainConfig pretrain_cfg;
    int finetune_iters = 0;  // 0 skips the paired stage
    TrainConfig finetune_cfg;
};

std::string ensure_model(const DatasetManifest& data, const ModelBuildSpec& spec,
                         const std::string& root);
std::string ensure_denoiser(const DatasetManifest& data, const DenoiserTrainConfig& cfg,
                            const std::string& root);

// Argmax-PSNR gamma on the validation split at the given sampling setup.
double tune_gamma(const DatasetManifest& data, const std::string& model_ckpt, double r, double cf,
                  double sigma, const std::vector<double>& gammas, uint64_t seed,
                  int max_iters = 60);

// ---- the simulation studies --------------------------------------------

// PSNR vs disentanglement weight (alpha2 = alpha3 grid) at R in {2,4}.
void experiment_disentanglement(const ExperimentEnv& env);
// Optimal content capacity vs reference degradation (n in {1,2,4} crossed
// with J in {1, 1/4, 1/16}).
void experiment_capacity(const ExperimentEnv& env);
// Convergence traces of the guided modes on one test slice at R=2.
void experiment_convergence(const ExperimentEnv& env);
// Lesion-ROI PSNR with and without content refinement at R in {2,4}.
void experiment_lesion(const ExperimentEnv& env);
// Whole-image PSNR under a 2-degree reference rotation at R=2.
void experiment_misalign(const ExperimentEnv& env);
// PSNR over the (R, sigma, gamma) grid; argmax gamma per cell.
void experiment_gamma(const ExperimentEnv& env);

void run_experiment(const std::string& name, const ExperimentEnv& env);

// Shared desk-scale setup used by the convergence/lesion/misalign/gamma
// studies and the acceptance suite: a 64x64 dataset and a pretrained plus
// fine-tuned full-capacity model.
struct MainSetup {
    DatasetManifest data;
    std::string model_ckpt;
    std::string denoiser_ckpt;
};
MainSetup ensure_main_setup(const ExperimentEnv& env, bool with_denoiser = false);
DatasetParams main_dataset_params(uint64_t seed);

}  // namespace cosmo
