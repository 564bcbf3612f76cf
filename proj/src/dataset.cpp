#include "cosmo/dataset.hpp"

#include "cosmo/pngio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace cosmo {

SequenceParams draw_sequence_params(Rng& rng, const std::string& contrast) {
    SequenceParams p;
    if (contrast == "domain1") {
        // short-TE short-TR (T1-weighted-like)
        p.te_ms = rng.uniform(10.0, 20.0);
        p.tr_ms = rng.uniform(400.0, 700.0);
    } else {
        // long-TE long-TR (T2-weighted-like)
        p.te_ms = rng.uniform(80.0, 110.0);
        p.tr_ms = rng.uniform(2000.0, 5000.0);
    }
    return p;
}

std::vector<const DatasetItem*> DatasetManifest::select(const std::string& split,
                                                        const std::string& contrast) const {
    std::vector<const DatasetItem*> out;
    for (const auto& it : items)
        if ((split.empty() || it.split == split) && (contrast.empty() || it.contrast == contrast))
            out.push_back(&it);
    return out;
}

const DatasetItem* DatasetManifest::find(const std::string& id,
                                         const std::string& contrast) const {
    for (const auto& it : items)
        if (it.id == id && it.contrast == contrast) return &it;
    return nullptr;
}

RealImage DatasetManifest::load(const DatasetItem& item) const {
    return load_image((fs::path(root) / item.path).string());
}

DatasetManifest build_dataset(const DatasetParams& params, const std::string& dir) {
    if (params.n_train < 1 || params.n_val < 1 || params.n_test < 1)
        throw std::invalid_argument("build_dataset: all split counts must be >= 1");
    fs::create_directories(fs::path(dir) / "images");

    DatasetManifest m;
    m.params = params;
    m.root = dir;

    int total = params.n_train + params.n_val + params.n_test;
    int n_paired = static_cast<int>(std::llround(params.paired_fraction * params.n_train));
    Rng base(params.seed);

    double max1 = 0.0, max2 = 0.0;
    for (int idx = 0; idx < total; ++idx) {
        std::string split = idx < params.n_train          ? "train"
                            : idx < params.n_train + params.n_val ? "val"
                                                                  : "test";
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "p%03d", idx);
        std::string id = idbuf;
        uint64_t phantom_seed = base.fork(static_cast<uint64_t>(idx)).seed();
        TissuePhantom ph = make_phantom(phantom_seed, params.grid, params.grid);
        Rng seq = base.fork(0x5E0 + static_cast<uint64_t>(idx));
        bool paired = split != "train" || idx < n_paired;

        for (const char* contrast_tag : {"domain1", "domain2"}) {
            std::string contrast = contrast_tag;
            SequenceParams sp = draw_sequence_params(seq, contrast);
            RealImage img = simulate_contrast(ph, sp);
            if (contrast == "domain1" && params.ref_lowpass_n > 1)
                img = degrade_reference(img, params.ref_lowpass_n);
            if (contrast == "domain2" && split == "test" && params.lesion.enabled)
                img = inject_lesion(img, params.lesion.cy, params.lesion.cx,
                                    params.lesion.radius, params.lesion.delta);
            if (contrast == "domain1" && split == "test" && params.misalign_deg != 0.0)
                img = misalign(img, params.misalign_deg);

            DatasetItem item;
            item.id = id;
            item.split = split;
            item.contrast = contrast;
            item.path = "images/" + id + "_" + (contrast == "domain1" ? "d1" : "d2") + ".img";
            item.te_ms = sp.te_ms;
            item.tr_ms = sp.tr_ms;
            item.paired = paired;
            save_image(img, (fs::path(dir) / item.path).string());
            if (params.export_png)
                save_png_gray((fs::path(dir) / (item.path + ".png")).string(), img);
            if (split == "train") {
                double mx = img.max_value();
                if (contrast == "domain1")
                    max1 = std::max(max1, mx);
                else
                    max2 = std::max(max2, mx);
            }
            m.items.push_back(std::move(item));
        }
    }
    m.norm_domain1 = max1 > 0 ? max1 : 1.0;
    m.norm_domain2 = max2 > 0 ? max2 : 1.0;
    save_manifest(m, (fs::path(dir) / "manifest.tsv").string());
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_manifest: cannot open " + path);
    const auto& p = m.params;
    os << "# cosmo-dataset v1\n";
    os << "# grid " << p.grid << "\n";
    os << "# seed " << p.seed << "\n";
    os << "# counts " << p.n_train << " " << p.n_val << " " << p.n_test << "\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "# paired_fraction %.17g\n", p.paired_fraction);
    os << buf;
    os << "# ref_lowpass_n " << p.ref_lowpass_n << "\n";
    std::snprintf(buf, sizeof(buf), "# misalign_deg %.17g\n", p.misalign_deg);
    os << buf;
    if (p.lesion.enabled) {
        std::snprintf(buf, sizeof(buf), "# lesion %.17g %.17g %.17g %.17g\n", p.lesion.cy,
                      p.lesion.cx, p.lesion.radius, p.lesion.delta);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "# norm domain1 %.17g\n", m.norm_domain1);
    os << buf;
    std::snprintf(buf, sizeof(buf), "# norm domain2 %.17g\n", m.norm_domain2);
    os << buf;
    os << "id\tsplit\tcontrast\tpath\tte_ms\ttr_ms\tpaired\n";
    for (const auto& it : m.items) {
        std::snprintf(buf, sizeof(buf), "%s\t%s\t%s\t%s\t%.17g\t%.17g\t%d\n", it.id.c_str(),
                      it.split.c_str(), it.contrast.c_str(), it.path.c_str(), it.te_ms, it.tr_ms,
                      it.paired ? 1 : 0);
        os << buf;
    }
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_manifest: cannot open " + path);
    DatasetManifest m;
    m.root = fs::path(path).parent_path().string();
    std::string line;
    bool header_done = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "grid") ss >> m.params.grid;
            else if (key == "seed") ss >> m.params.seed;
            else if (key == "counts") ss >> m.params.n_train >> m.params.n_val >> m.params.n_test;
            else if (key == "paired_fraction") ss >> m.params.paired_fraction;
            else if (key == "ref_lowpass_n") ss >> m.params.ref_lowpass_n;
            else if (key == "misalign_deg") ss >> m.params.misalign_deg;
            else if (key == "lesion") {
                m.params.lesion.enabled = true;
                ss >> m.params.lesion.cy >> m.params.lesion.cx >> m.params.lesion.radius >>
                    m.params.lesion.delta;
            } else if (key == "norm") {
                std::string dom;
                ss >> dom;
                if (dom == "domain1") ss >> m.norm_domain1;
                else ss >> m.norm_domain2;
            }
            continue;
        }
        if (!header_done) {  // column header row
            header_done = true;
            continue;
        }
        std::istringstream ss(line);
        DatasetItem it;
        int paired = 0;
        std::getline(ss, it.id, '\t');
        std::getline(ss, it.split, '\t');
        std::getline(ss, it.contrast, '\t');
        std::getline(ss, it.path, '\t');
        std::string f;
        std::getline(ss, f, '\t');
        it.te_ms = std::stod(f);
        std::getline(ss, f, '\t');
        it.tr_ms = std::stod(f);
        std::getline(ss, f, '\t');
        paired = std::stoi(f);
        it.paired = paired != 0;
        m.items.push_back(std::move(it));
    }
    return m;
}

}  // namespace cosmo
