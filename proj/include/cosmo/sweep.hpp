#pragma once

#include "cosmo/dataset.hpp"
#include "cosmo/recon.hpp"

#include <string>
#include <vector>

namespace cosmo {

// Declarative description of a reconstruction sweep: the cartesian product of
// (mode, R, center fraction, sigma, gamma) applied to every slice of a split.
// A spec plus the code version determines all outputs bit-exactly.
struct SweepSpec {
    std::string name = "sweep";
    std::string data_dir;
    std::string model_ckpt;     // guided modes
    std::string denoiser_ckpt;  // pnp_denoiser mode
    std::vector<std::string> modes = {"cs_wt"};
    std::vector<double> accelerations = {4.0};
    std::vector<double> center_fractions = {0.0625};
    std::vector<double> sigmas = {0.01};
    std::vector<double> gammas = {0.0};  // applies to the CR-enabled mode only
    double eta = 1.0;
    double lambda = 2e-3;
    int wavelet_levels = 3;
    int max_iters = 200;
    double tolerance = 1e-5;
    std::string split = "test";
    uint64_t seed = 1;
    bool save_traces = false;
    bool save_images = false;

    std::string to_json() const;
    static SweepSpec from_json(const std::string& text);
    static SweepSpec load(const std::string& path);
    void save(const std::string& path) const;
};

// One reconstruction run (a sweep cell applied to one slice).
struct SweepRow {
    std::string run_id;
    std::string mode;
    double r = 0, cf = 0, sigma = 0, gamma = 0;
    std::string slice_id;
    double psnr = 0, ssim = 0, kres = 0;
    int iterations = 0;
};

// Executes the sweep with a small worker pool (cells are independent; output
// order is fixed by the task list, so reruns are byte-identical). Writes
// metrics.csv, config.json and run_info.txt under out_dir.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const std::string& out_dir, int jobs = 1);

void write_metrics_csv(const std::vector<SweepRow>& rows, const std::string& path);
std::vector<SweepRow> read_metrics_csv(const std::string& path);

// Aggregates an existing metrics.csv into summary.csv rows
// (run id, mode, R, metric, mean, std, n) and PSNR/SSIM-vs-R line plots.
// Pure aggregation: no value appears that is absent from the input rows.
void write_report(const std::string& sweep_dir, const std::string& out_dir);

}  // namespace cosmo
