#pragma once

#include "cosmo/image.hpp"
#include "cosmo/phantom.hpp"

#include <map>
#include <string>
#include <vector>

namespace cosmo {

struct DatasetItem {
    std::string id;        // phantom id, e.g. "p003"
    std::string split;     // train | val | test
    std::string contrast;  // domain1 (reference-like) | domain2 (target-like)
    std::string path;      // relative to the dataset directory
    double te_ms = 0.0;
    double tr_ms = 0.0;
    bool paired = false;
};

struct LesionSpec {
    bool enabled = false;
    double cy = 0.0, cx = 0.0, radius = 0.0, delta = 0.0;
};

struct DatasetParams {
    int n_train = 18, n_val = 1, n_test = 1;
    int grid = 64;
    double paired_fraction = 0.15;
    uint64_t seed = 1;
    int ref_lowpass_n = 1;       // degrade all domain1 images to the lower 1/n band
    LesionSpec lesion;           // applied to test-split domain2 images
    double misalign_deg = 0.0;   // applied to test-split domain1 images
    bool export_png = false;
};

struct DatasetManifest {
    DatasetParams params;
    std::vector<DatasetItem> items;
    double norm_domain1 = 1.0;  // max over train-split images, per domain
    double norm_domain2 = 1.0;
    std::string root;  // directory holding manifest.tsv

    std::vector<const DatasetItem*> select(const std::string& split,
                                           const std::string& contrast) const;
    const DatasetItem* find(const std::string& id, const std::string& contrast) const;
    RealImage load(const DatasetItem& item) const;
    double norm_for(const std::string& contrast) const {
        return contrast == "domain1" ? norm_domain1 : norm_domain2;
    }
};

// Generates phantoms, simulates both contrasts with randomized TE/TR from
// the built-in ranges, applies the configured degradations and writes
// images plus a manifest under `dir`.
DatasetManifest build_dataset(const DatasetParams& params, const std::string& dir);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Deterministic per-phantom TE/TR draws used by build_dataset.
SequenceParams draw_sequence_params(Rng& rng, const std::string& contrast);

}  // namespace cosmo
