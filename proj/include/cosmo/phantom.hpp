#pragma once

#include "cosmo/image.hpp"
#include "cosmo/rng.hpp"

#include <string>
#include <vector>

namespace cosmo {

struct TissueClass {
    std::string name;
    double pd;  // proton density, a.u.
    double t1;  // ms
    double t2;  // ms
};

// Fuzzy occupancy maps in [0,1]; pointwise sum <= 1, remainder is background.
struct TissuePhantom {
    int h = 0, w = 0;
    uint64_t seed = 0;
    std::vector<RealImage> occupancy;     // one map per tissue class
    std::vector<TissueClass> properties;  // same length

    int n_tissues() const { return static_cast<int>(occupancy.size()); }
};

struct SequenceParams {
    double te_ms = 0.0;
    double tr_ms = 0.0;
};

// Deformed nested-ring anatomy (rim fluid, outer and inner soft tissue,
// central fluid cavity), deterministic per seed.
TissuePhantom make_phantom(uint64_t seed, int h, int w, int n_tissues = 4);

// Spin-echo signal: sum_k occ_k * PD_k * (1 - exp(-TR/T1_k)) * exp(-TE/T2_k).
RealImage simulate_contrast(const TissuePhantom& phantom, SequenceParams params);

// Fourier low-pass keeping the central 1/n of frequencies per axis (same
// spatial resolution). n must divide both image dimensions.
RealImage degrade_reference(const RealImage& img, int n);

// Adds a Gaussian intensity bump (profile sigma = radius/2) centered at
// (cy, cx); delta may be negative. radius 0 or delta 0 is the identity.
RealImage inject_lesion(const RealImage& img, double cy, double cx, double radius,
                        double intensity_delta);

// Bilinear rotation about the image center, zero background fill. Positive
// angles move a feature right of center toward the top of the image.
RealImage misalign(const RealImage& img, double angle_deg);

double spin_echo_signal(double occupancy, const TissueClass& tissue, SequenceParams params);

}  // namespace cosmo
