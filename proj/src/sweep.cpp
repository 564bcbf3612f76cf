#include "cosmo/sweep.hpp"

#include "cosmo/csmodel.hpp"
#include "cosmo/metrics.hpp"
#include "cosmo/plot.hpp"
#include "cosmo/pngio.hpp"
#include "cosmo/tg/checkpoint.hpp"
#include "cosmo/train.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace cosmo {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    uint64_t z = seed;
    for (uint64_t t : {a + 1, b + 1, c + 1}) {
        z += 0x9E3779B97F4A7C15ULL * t;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z ^= z >> 31;
    }
    return z;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

std::string SweepSpec::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["data_dir"] = data_dir;
    j["model_ckpt"] = model_ckpt;
    j["denoiser_ckpt"] = denoiser_ckpt;
    j["modes"] = modes;
    j["accelerations"] = accelerations;
    j["center_fractions"] = center_fractions;
    j["sigmas"] = sigmas;
    j["gammas"] = gammas;
    j["eta"] = eta;
    j["lambda"] = lambda;
    j["wavelet_levels"] = wavelet_levels;
    j["max_iters"] = max_iters;
    j["tolerance"] = tolerance;
    j["split"] = split;
    j["seed"] = seed;
    j["save_traces"] = save_traces;
    j["save_images"] = save_images;
    return j.dump(2);
}

SweepSpec SweepSpec::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    SweepSpec s;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
    };
    get("name", s.name);
    get("data_dir", s.data_dir);
    get("model_ckpt", s.model_ckpt);
    get("denoiser_ckpt", s.denoiser_ckpt);
    get("modes", s.modes);
    get("accelerations", s.accelerations);
    get("center_fractions", s.center_fractions);
    get("sigmas", s.sigmas);
    get("gammas", s.gammas);
    get("eta", s.eta);
    get("lambda", s.lambda);
    get("wavelet_levels", s.wavelet_levels);
    get("max_iters", s.max_iters);
    get("tolerance", s.tolerance);
    get("split", s.split);
    get("seed", s.seed);
    get("save_traces", s.save_traces);
    get("save_images", s.save_images);
    return s;
}

SweepSpec SweepSpec::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("sweep spec: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

void SweepSpec::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("sweep spec: cannot write " + path);
    os << to_json() << "\n";
}

namespace {

struct Task {
    size_t out_index;
    std::string mode;
    double r, cf, sigma, gamma;
    size_t r_idx, cf_idx, sigma_idx, slice_idx;
    const DatasetItem* gt_item;
    const DatasetItem* ref_item;
};

}  // namespace

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const std::string& out_dir, int jobs) {
    fs::create_directories(out_dir);
    if (spec.data_dir.empty()) throw std::runtime_error("sweep: data_dir is required");
    DatasetManifest data = load_manifest((fs::path(spec.data_dir) / "manifest.tsv").string());

    bool needs_model = false, needs_denoiser = false;
    for (const auto& m : spec.modes) {
        ReconMode rm = recon_mode_from_string(m);
        if (rm == ReconMode::cosmo || rm == ReconMode::cosmo_no_cr ||
            rm == ReconMode::cosmo_oracle)
            needs_model = true;
        if (rm == ReconMode::pnp_denoiser) needs_denoiser = true;
    }
    std::unique_ptr<CsmGuidance> guidance;
    if (needs_model) {
        if (spec.model_ckpt.empty() || !fs::exists(spec.model_ckpt))
            throw std::runtime_error(
                "sweep: guided modes need a trained model checkpoint (missing: '" +
                spec.model_ckpt + "'); run the pretrain/finetune commands first");
        guidance = std::make_unique<CsmGuidance>(ContentStyleModel::load(spec.model_ckpt));
    }
    std::unique_ptr<CnnDenoiser> denoiser;
    if (needs_denoiser) {
        if (spec.denoiser_ckpt.empty() || !fs::exists(spec.denoiser_ckpt))
            throw std::runtime_error(
                "sweep: pnp_denoiser needs a denoiser checkpoint (missing: '" +
                spec.denoiser_ckpt + "'); run train-denoiser first");
        denoiser = std::make_unique<CnnDenoiser>(DenoiserNet::load(spec.denoiser_ckpt));
    }

    auto slices = data.select(spec.split, "domain2");
    if (slices.empty()) throw std::runtime_error("sweep: split has no slices: " + spec.split);

    std::vector<Task> tasks;
    for (const auto& mode : spec.modes) {
        bool use_gammas = recon_mode_from_string(mode) == ReconMode::cosmo;
        std::vector<double> gammas = use_gammas ? spec.gammas : std::vector<double>{0.0};
        for (size_t ri = 0; ri < spec.accelerations.size(); ++ri)
            for (size_t ci = 0; ci < spec.center_fractions.size(); ++ci)
                for (size_t si = 0; si < spec.sigmas.size(); ++si)
                    for (double gamma : gammas)
                        for (size_t ki = 0; ki < slices.size(); ++ki) {
                            Task t;
                            t.out_index = tasks.size();
                            t.mode = mode;
                            t.r = spec.accelerations[ri];
                            t.cf = spec.center_fractions[ci];
                            t.sigma = spec.sigmas[si];
                            t.gamma = gamma;
                            t.r_idx = ri;
                            t.cf_idx = ci;
                            t.sigma_idx = si;
                            t.slice_idx = ki;
                            t.gt_item = slices[ki];
                            t.ref_item = data.find(slices[ki]->id, "domain1");
                            if (!t.ref_item)
                                throw std::runtime_error("sweep: missing reference for slice " +
                                                         slices[ki]->id);
                            tasks.push_back(std::move(t));
                        }
    }

    std::vector<SweepRow> rows(tasks.size());
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                const Task& t = tasks[i];
                RealImage gt = data.load(*t.gt_item);
                RealImage ref = data.load(*t.ref_item);

                ForwardOperator a;
                // identical measurements for every mode/gamma at a given
                // (R, cf, sigma, slice), so comparisons are paired
                a.mask = make_mask(gt.w, t.r, t.cf,
                                   mix_seed(spec.seed, t.r_idx, t.cf_idx, t.slice_idx));
                KSpaceData y = a.forward(to_complex(gt));
                if (t.sigma > 0)
                    y = add_noise(y, t.sigma, gt.max_value(),
                                  mix_seed(spec.seed ^ 0xA5A5, t.r_idx,
                                           t.sigma_idx * 101 + t.cf_idx, t.slice_idx));

                ReconConfig cfg;
                cfg.mode = recon_mode_from_string(t.mode);
                cfg.eta = spec.eta;
                cfg.gamma = t.gamma;
                cfg.lambda = spec.lambda;
                cfg.wavelet_levels = spec.wavelet_levels;
                cfg.max_iters = spec.max_iters;
                cfg.tolerance = spec.tolerance;

                ReconResult res;
                switch (cfg.mode) {
                    case ReconMode::cs_wt:
                        res = cs_wt_reconstruct(y, a, cfg, &gt);
                        break;
                    case ReconMode::pnp_denoiser:
                        res = pnp_denoiser_reconstruct(y, a, *denoiser, cfg, &gt);
                        break;
                    default:
                        res = cosmo_reconstruct(y, a, ref, *guidance, cfg, &gt);
                        break;
                }

                auto fg = foreground_mask(gt);
                RealImage mag = magnitude(res.image);
                SweepRow row;
                row.mode = t.mode;
                row.r = t.r;
                row.cf = t.cf;
                row.sigma = t.sigma;
                row.gamma = t.gamma;
                row.slice_id = t.gt_item->id;
                row.run_id = t.mode + "_R" + fmt(t.r) + "_cf" + fmt(t.cf) + "_s" + fmt(t.sigma) +
                             "_g" + fmt(t.gamma);
                row.psnr = psnr(mag, gt, gt.max_value(), &fg);
                row.ssim = ssim(mag, gt, gt.max_value(), 7, 0.01, 0.03, &fg);
                row.kres = res.trace.empty() ? 0.0 : res.trace.back().kres;
                row.iterations = res.iterations;
                rows[t.out_index] = std::move(row);

                if (spec.save_traces) {
                    fs::create_directories(fs::path(out_dir) / "traces");
                    save_trace_csv(res.trace, (fs::path(out_dir) / "traces" /
                                               (rows[t.out_index].run_id + "_" +
                                                t.gt_item->id + ".csv"))
                                                  .string());
                }
                if (spec.save_images) {
                    fs::create_directories(fs::path(out_dir) / "images");
                    std::string base = rows[t.out_index].run_id + "_" + t.gt_item->id;
                    save_image(mag, (fs::path(out_dir) / "images" / (base + ".img")).string());
                    save_png_gray((fs::path(out_dir) / "images" / (base + ".png")).string(), mag);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);

    write_metrics_csv(rows, (fs::path(out_dir) / "metrics.csv").string());
    spec.save((fs::path(out_dir) / "config.json").string());

    std::ofstream info((fs::path(out_dir) / "run_info.txt").string());
    info << "sweep " << spec.name << "\n";
    info << "seed " << spec.seed << "\n";
    info << "runs " << rows.size() << "\n";
    if (!spec.model_ckpt.empty() && fs::exists(spec.model_ckpt))
        info << "model_ckpt_hash " << std::hex << tg::Checkpoint::file_hash(spec.model_ckpt)
             << std::dec << "\n";
    if (!spec.denoiser_ckpt.empty() && fs::exists(spec.denoiser_ckpt))
        info << "denoiser_ckpt_hash " << std::hex
             << tg::Checkpoint::file_hash(spec.denoiser_ckpt) << std::dec << "\n";
    return rows;
}

void write_metrics_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    os << "run_id,mode,R,cf,sigma,gamma,slice,psnr,ssim,kres,iterations\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%.10g,%.10g,%.10g,%s,%.10g,%.10g,%.10g,%d\n",
                      r.run_id.c_str(), r.mode.c_str(), r.r, r.cf, r.sigma, r.gamma,
                      r.slice_id.c_str(), r.psnr, r.ssim, r.kres, r.iterations);
        os << buf;
    }
}

std::vector<SweepRow> read_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_metrics_csv: cannot open " + path);
    std::string line;
    std::getline(is, line);  // header
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        SweepRow r;
        std::string field;
        auto next = [&] {
            std::getline(ss, field, ',');
            return field;
        };
        r.run_id = next();
        r.mode = next();
        r.r = std::stod(next());
        r.cf = std::stod(next());
        r.sigma = std::stod(next());
        r.gamma = std::stod(next());
        r.slice_id = next();
        r.psnr = std::stod(next());
        r.ssim = std::stod(next());
        r.kres = std::stod(next());
        r.iterations = std::stoi(next());
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_report(const std::string& sweep_dir, const std::string& out_dir) {
    auto rows = read_metrics_csv((fs::path(sweep_dir) / "metrics.csv").string());
    fs::create_directories(fs::path(out_dir) / "plots");

    // group by (run_id minus slice), i.e. one aggregate per sweep cell
    std::map<std::string, std::vector<const SweepRow*>> cells;
    for (const auto& r : rows) cells[r.run_id].push_back(&r);

    std::ofstream os((fs::path(out_dir) / "summary.csv").string());
    os << "run_id,mode,R,metric,mean,std,n\n";
    char buf[512];
    for (const auto& [id, cell] : cells) {
        std::vector<double> ps, ss;
        for (const auto* r : cell) {
            ps.push_back(r->psnr);
            ss.push_back(r->ssim);
        }
        Aggregate ap = aggregate(ps), as = aggregate(ss);
        const SweepRow* r0 = cell.front();
        std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,psnr,%.10g,%.10g,%d\n", id.c_str(),
                      r0->mode.c_str(), r0->r, ap.mean, ap.stddev, ap.n);
        os << buf;
        std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,ssim,%.10g,%.10g,%d\n", id.c_str(),
                      r0->mode.c_str(), r0->r, as.mean, as.stddev, as.n);
        os << buf;
    }

    // PSNR / SSIM vs R, one series per mode (mean over everything else)
    for (const char* metric : {"psnr", "ssim"}) {
        std::map<std::string, std::map<double, std::vector<double>>> by_mode;
        for (const auto& r : rows)
            by_mode[r.mode][r.r].push_back(std::string(metric) == "psnr" ? r.psnr : r.ssim);
        std::vector<Series> series;
        for (auto& [mode, pts] : by_mode) {
            Series s;
            s.label = mode;
            for (auto& [rr, vals] : pts) {
                s.x.push_back(rr);
                s.y.push_back(aggregate(vals).mean);
            }
            series.push_back(std::move(s));
        }
        std::string ylabel = std::string(metric) == "psnr" ? "PSNR (dB)" : "SSIM";
        plot_lines((fs::path(out_dir) / "plots" / (std::string(metric) + "_vs_R.png")).string(),
                   ylabel + " vs acceleration", "R", ylabel, series);
    }
}

}  // namespace cosmo
