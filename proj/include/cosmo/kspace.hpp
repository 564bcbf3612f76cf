#pragma once

#include "cosmo/image.hpp"
#include "cosmo/rng.hpp"

#include <string>
#include <vector>

namespace cosmo {

// Centered unitary 2D DFT: fftshift . DFT . ifftshift with 1/sqrt(HW)
// scaling in both directions, so forward and inverse are exact adjoints.
ComplexImage fft2c(const ComplexImage& x);
ComplexImage ifft2c(const ComplexImage& x);

// 1D Cartesian mask over phase-encode columns. A fully sampled centered
// block plus uniformly drawn remaining lines.
struct SamplingMask {
    int w = 0;
    double r = 1.0;
    double center_fraction = 0.0;
    uint64_t seed = 0;
    std::vector<int> kept_lines;  // sorted ascending

    bool keeps(int col) const;
    int num_kept() const { return static_cast<int>(kept_lines.size()); }
};

// Budget is ceil(w / r); the centered block of round(center_fraction * w)
// lines is always kept; the rest is drawn without replacement.
SamplingMask make_mask(int w, double r, double center_fraction, uint64_t seed);

void save_mask(const SamplingMask& m, const std::string& path);
SamplingMask load_mask(const std::string& path);

struct KSpaceData {
    std::vector<ComplexImage> coils;  // unsampled entries are exactly zero
    SamplingMask mask;
    double noise_sigma = 0.0;

    int h() const { return coils.empty() ? 0 : coils[0].h; }
    int w() const { return coils.empty() ? 0 : coils[0].w; }
    int n_coils() const { return static_cast<int>(coils.size()); }
};

void save_kspace(const KSpaceData& y, const std::string& path);
KSpaceData load_kspace(const std::string& path);

// A = M . F (single coil) or {M . F . S_i} per coil; coil maps satisfy
// sum_i |S_i|^2 = 1 pointwise.
struct ForwardOperator {
    SamplingMask mask;
    std::vector<ComplexImage> coil_sensitivities;  // empty -> single coil

    KSpaceData forward(const ComplexImage& x) const;
    ComplexImage adjoint(const KSpaceData& y) const;
};

// Smooth normalized synthetic sensitivities (Gaussian magnitude bumps with
// smooth phase ramps).
std::vector<ComplexImage> make_coil_sensitivities(int h, int w, int n_coils, uint64_t seed);

// y' = y + complex Gaussian noise on kept lines, sigma = sigma_rel * ref_max
// per real/imag component.
KSpaceData add_noise(const KSpaceData& y, double sigma_rel, double ref_max, uint64_t seed);

// x = r - eta * A^H (A r - y)
ComplexImage dc_step(const ComplexImage& r, const ForwardOperator& a, const KSpaceData& y,
                     double eta);

}  // namespace cosmo
