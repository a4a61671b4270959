#pragma once

#include "pnp/core.hpp"

namespace pnp {

// PSNR of |x| against |ref| over the mask: peak = max over the mask of |ref|.
// Returns +infinity when the masked MSE is zero.
double psnr_roi(ComplexImage const &x, ComplexImage const &ref, Mask const &mask);

// Mean SSIM of magnitudes over all valid 11x11 windows (Gaussian weights,
// sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range max |ref|.
double ssim(ComplexImage const &x, ComplexImage const &ref);

} // namespace pnp
