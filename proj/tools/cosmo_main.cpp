// Command-line front end: data generation, model training, reconstruction
// and the simulation-study experiments.

#include <CLI11.hpp>

#include "cosmo/csmodel.hpp"
#include "cosmo/experiments.hpp"
#include "cosmo/metrics.hpp"
#include "cosmo/pngio.hpp"
#include "cosmo/sweep.hpp"
#include "cosmo/train.hpp"

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace cosmo;

int main(int argc, char** argv) {
    CLI::App app{"cosmo: guided two-contrast MRI reconstruction via content/style modeling"};
    app.require_subcommand(1);

    // ---- gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic two-contrast dataset");
    DatasetParams dp;
    std::string gen_out = "data";
    bool lesion_on = false;
    double lesion_cy = 44, lesion_cx = 26, lesion_radius = 4.5, lesion_delta = 0.3;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--train", dp.n_train, "training phantoms");
    gen->add_option("--val", dp.n_val, "validation phantoms");
    gen->add_option("--test", dp.n_test, "test phantoms");
    gen->add_option("--grid", dp.grid, "image size (pixels per side)");
    gen->add_option("--paired-fraction", dp.paired_fraction, "fraction of train phantoms kept aligned");
    gen->add_option("--seed", dp.seed, "generation seed");
    gen->add_option("--ref-lowpass", dp.ref_lowpass_n, "keep only the lower 1/n reference band");
    gen->add_option("--misalign-deg", dp.misalign_deg, "rotate test references by this angle");
    gen->add_flag("--lesion", lesion_on, "inject a lesion into test target images");
    gen->add_option("--lesion-cy", lesion_cy);
    gen->add_option("--lesion-cx", lesion_cx);
    gen->add_option("--lesion-radius", lesion_radius);
    gen->add_option("--lesion-delta", lesion_delta);
    gen->add_flag("--png", dp.export_png, "export 8-bit previews next to the raw images");

    // ---- pretrain
    auto* pre = app.add_subcommand("pretrain", "unpaired content/style pre-training");
    std::string data_dir = "data", ckpt_out = "model.ckpt", log_csv;
    ModelConfig mc;
    TrainConfig tc;
    pre->add_option("--data", data_dir, "dataset directory")->required();
    pre->add_option("--out", ckpt_out, "checkpoint to write");
    pre->add_option("--log", log_csv, "loss history CSV");
    pre->add_option("--iters", tc.iterations);
    pre->add_option("--batch", tc.batch);
    pre->add_option("--seed", tc.seed);
    pre->add_option("--lr", tc.lr);
    pre->add_option("--alpha1", tc.alpha1);
    pre->add_option("--alpha2", tc.alpha2);
    pre->add_option("--alpha3", tc.alpha3);
    pre->add_option("--content-down", mc.content_down, "content downsampling factor m (1,2,4)");
    int content_channels = 0;
    pre->add_option("--content-channels", content_channels, "content channels (default 4 for m=1, else 2)");
    pre->add_option("--style-dim", mc.style_dim);
    pre->add_option("--filters", mc.base_filters);

    // ---- finetune
    auto* ft = app.add_subcommand("finetune", "paired fine-tuning of a pretrained model");
    std::string ft_in = "model.ckpt", ft_out = "model_ft.ckpt", ft_log;
    TrainConfig ftc;
    ftc.iterations = 300;
    ft->add_option("--data", data_dir, "dataset directory")->required();
    ft->add_option("--ckpt", ft_in, "pretrained checkpoint")->required();
    ft->add_option("--out", ft_out, "checkpoint to write");
    ft->add_option("--log", ft_log, "loss history CSV");
    ft->add_option("--iters", ftc.iterations);
    ft->add_option("--batch", ftc.batch);
    ft->add_option("--seed", ftc.seed);
    ft->add_option("--lr", ftc.lr);
    ft->add_option("--beta1", ftc.beta1);
    ft->add_option("--beta2", ftc.beta2);
    ft->add_option("--beta3", ftc.beta3);

    // ---- train-denoiser
    auto* td = app.add_subcommand("train-denoiser", "train the plug-and-play CNN denoiser");
    std::string den_out = "denoiser.ckpt", den_log;
    DenoiserTrainConfig dtc;
    td->add_option("--data", data_dir, "dataset directory")->required();
    td->add_option("--out", den_out, "checkpoint to write");
    td->add_option("--log", den_log, "loss history CSV");
    td->add_option("--iters", dtc.iterations);
    td->add_option("--seed", dtc.seed);
    td->add_option("--lr", dtc.lr);
    td->add_option("--sigma-min", dtc.sigma_min);
    td->add_option("--sigma-max", dtc.sigma_max);

    // ---- reconstruct
    auto* rec = app.add_subcommand("reconstruct", "reconstruct one split slice");
    std::string rec_mode = "cs_wt", rec_out = "recon_out", rec_slice, model_ckpt, denoiser_ckpt;
    double rec_r = 4.0, rec_cf = 0.0625, rec_sigma = 0.01, rec_eta = 1.0, rec_gamma = 0.05,
           rec_lambda = 2e-3, rec_tol = 1e-5;
    int rec_iters = 200;
    uint64_t rec_seed = 1;
    std::string rec_split = "test";
    rec->add_option("--data", data_dir, "dataset directory")->required();
    rec->add_option("--mode", rec_mode, "cs_wt|pnp_denoiser|cosmo|cosmo_no_cr|cosmo_oracle");
    rec->add_option("--ckpt", model_ckpt, "content/style model checkpoint");
    rec->add_option("--denoiser", denoiser_ckpt, "denoiser checkpoint");
    rec->add_option("--slice", rec_slice, "slice id (default: first in split)");
    rec->add_option("--split", rec_split);
    rec->add_option("--R", rec_r, "acceleration factor");
    rec->add_option("--cf", rec_cf, "fully-sampled center fraction");
    rec->add_option("--sigma", rec_sigma, "k-space noise level relative to max");
    rec->add_option("--eta", rec_eta);
    rec->add_option("--gamma", rec_gamma);
    rec->add_option("--lambda", rec_lambda);
    rec->add_option("--iters", rec_iters);
    rec->add_option("--tol", rec_tol);
    rec->add_option("--seed", rec_seed);
    rec->add_option("--out", rec_out, "output directory");

    // ---- sweep
    auto* sw = app.add_subcommand("sweep", "run a reconstruction sweep from a spec file");
    std::string sweep_spec_path, sweep_out = "sweep_out";
    int jobs = 1;
    sw->add_option("--spec", sweep_spec_path, "sweep spec JSON")->required();
    sw->add_option("--out", sweep_out, "output directory");
    sw->add_option("--jobs", jobs, "worker threads");

    // ---- report
    auto* rep = app.add_subcommand("report", "aggregate a sweep into summary.csv and plots");
    std::string rep_in, rep_out;
    rep->add_option("--sweep", rep_in, "sweep output directory")->required();
    rep->add_option("--out", rep_out, "report directory (default: the sweep directory)");

    // ---- experiment
    auto* ex = app.add_subcommand("experiment", "run one of the simulation studies");
    std::string ex_name;
    ExperimentEnv env;
    ex->add_option("name", ex_name,
                   "disentanglement|capacity|convergence|lesion|misalign|gamma")
        ->required();
    ex->add_option("--out", env.out_root, "output root directory");
    ex->add_option("--seed", env.seed);
    ex->add_option("--jobs", env.jobs);
    ex->add_flag("--fast", env.fast, "reduced iteration budgets (smoke run)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            if (lesion_on) {
                dp.lesion.enabled = true;
                dp.lesion.cy = lesion_cy;
                dp.lesion.cx = lesion_cx;
                dp.lesion.radius = lesion_radius;
                dp.lesion.delta = lesion_delta;
            }
            DatasetManifest m = build_dataset(dp, gen_out);
            std::cout << "wrote " << m.items.size() << " images under " << gen_out << "\n";
        } else if (*pre) {
            DatasetManifest data = load_manifest((fs::path(data_dir) / "manifest.tsv").string());
            mc.img = data.params.grid;
            mc.content_channels =
                content_channels > 0 ? content_channels : (mc.content_down == 1 ? 4 : 2);
            ContentStyleModel model;
            model.cfg = mc;
            model.init(tc.seed);
            model.norm1 = data.norm_domain1;
            model.norm2 = data.norm_domain2;
            auto hist = pretrain(model, data, tc, log_csv);
            model.save(ckpt_out);
            std::ofstream cfg_os(ckpt_out + ".config.json");
            cfg_os << tc.to_json() << "\n";
            std::cout << "pretrained " << tc.iterations << " iters; final losses: gan="
                      << hist.back().gan << " image_self=" << hist.back().term1 << "\n";
            std::cout << "wrote " << ckpt_out << "\n";
        } else if (*ft) {
            DatasetManifest data = load_manifest((fs::path(data_dir) / "manifest.tsv").string());
            ContentStyleModel model = ContentStyleModel::load(ft_in);
            auto hist = finetune(model, data, ftc, ft_log);
            model.save(ft_out);
            if (!hist.empty())
                std::cout << "fine-tuned " << ftc.iterations
                          << " iters; final content_cross=" << hist.back().term3 << "\n";
            std::cout << "wrote " << ft_out << "\n";
        } else if (*td) {
            DatasetManifest data = load_manifest((fs::path(data_dir) / "manifest.tsv").string());
            DenoiserNet net;
            net.init(dtc.seed, 12);
            auto hist = train_denoiser(net, data, dtc, den_log);
            net.save(den_out);
            std::cout << "trained denoiser; final mse=" << hist.back().total << "\n";
            std::cout << "wrote " << den_out << "\n";
        } else if (*rec) {
            SweepSpec spec;
            spec.name = "reconstruct";
            spec.data_dir = data_dir;
            spec.model_ckpt = model_ckpt;
            spec.denoiser_ckpt = denoiser_ckpt;
            spec.modes = {rec_mode};
            spec.accelerations = {rec_r};
            spec.center_fractions = {rec_cf};
            spec.sigmas = {rec_sigma};
            spec.gammas = {rec_gamma};
            spec.eta = rec_eta;
            spec.lambda = rec_lambda;
            spec.max_iters = rec_iters;
            spec.tolerance = rec_tol;
            spec.split = rec_split;
            spec.seed = rec_seed;
            spec.save_traces = true;
            spec.save_images = true;
            auto rows = run_sweep(spec, rec_out, 1);
            for (const auto& r : rows)
                if (rec_slice.empty() || r.slice_id == rec_slice)
                    std::cout << r.slice_id << " " << r.mode << " R=" << r.r
                              << " psnr=" << r.psnr << " ssim=" << r.ssim << "\n";
        } else if (*sw) {
            SweepSpec spec = SweepSpec::load(sweep_spec_path);
            auto rows = run_sweep(spec, sweep_out, jobs);
            std::cout << "wrote " << rows.size() << " runs to " << sweep_out << "/metrics.csv\n";
            write_report(sweep_out, sweep_out);
        } else if (*rep) {
            if (rep_out.empty()) rep_out = rep_in;
            write_report(rep_in, rep_out);
            std::cout << "wrote " << rep_out << "/summary.csv\n";
        } else if (*ex) {
            run_experiment(ex_name, env);
            std::cout << "experiment " << ex_name << " done under " << env.out_root << "/"
                      << ex_name << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
