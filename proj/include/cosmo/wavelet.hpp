#pragma once

#include "cosmo/image.hpp"

#include <complex>

namespace cosmo {

// Orthonormal 2D Haar transform (Mallat layout: the low-pass quadrant is
// recursively transformed). Image dims must be divisible by 2^levels.
// The transform is linear with real coefficients, so it applies to complex
// images componentwise and satisfies Psi^H Psi = I to machine precision.
ComplexImage haar2_forward(const ComplexImage& x, int levels);
ComplexImage haar2_inverse(const ComplexImage& w, int levels);

// Proximal map of lambda*|.|_1. For complex values: magnitude shrinkage
// preserving phase.
double soft_threshold(double w, double lambda);
std::complex<double> soft_threshold(std::complex<double> w, double lambda);
ComplexImage soft_threshold(const ComplexImage& w, double lambda);

}  // namespace cosmo
