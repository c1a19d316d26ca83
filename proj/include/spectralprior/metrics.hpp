#pragma once

#include "spectralprior/tensor.hpp"

namespace spectralprior::diagnostics {

/// Mean squared error over all elements.
double mse(const Tensor& a, const Tensor& b);

/// 10 log10(peak^2 / MSE). Identical inputs give +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// PSNR restricted to pixels where `mask` ([1,H,W] or [H,W]) is nonzero,
/// broadcast over channels of [C,H,W] inputs.
double psnr(const Tensor& a, const Tensor& b, double peak, const Tensor& mask);

}  // namespace spectralprior::diagnostics
