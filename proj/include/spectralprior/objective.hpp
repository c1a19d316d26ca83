#pragma once

#include <string>
#include <vector>

#include "spectralprior/degrade.hpp"
#include "spectralprior/spectral.hpp"
#include "spectralprior/tensor.hpp"

namespace spectralprior::objective {

enum class LossKind { dsp_complex, dsp_magnitude, dsp_log_magnitude, dip_pixel };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

struct LossSpec {
  LossKind kind = LossKind::dsp_magnitude;
  spectral::Normalization normalization = spectral::Normalization::unitary;
  /// Magnitude smoothing: sqrt(|F|^2 + eps).
  double eps = 1e-8;
  /// Optional per-band weights over equal-width radial bands (empty: none).
  /// Applies to the spectral kinds only.
  std::vector<double> band_weights;

  void validate() const;
};

/// || F(A pred) - F(y) ||^2 over all coefficients.
Var dsp_complex_loss(Var pred, const degrade::Observation& obs,
                     spectral::Normalization normalization = spectral::Normalization::unitary);

/// sum_w ( sqrt(|F(A pred)|^2 + eps) - sqrt(|F(y)|^2 + eps) )^2.
Var dsp_magnitude_loss(Var pred, const degrade::Observation& obs, double eps = 1e-8,
                       spectral::Normalization normalization = spectral::Normalization::unitary);

/// sum_w ( log sqrt(|F(A pred)|^2 + eps) - log sqrt(|F(y)|^2 + eps) )^2.
Var dsp_log_magnitude_loss(Var pred, const degrade::Observation& obs, double eps = 1e-8,
                           spectral::Normalization normalization = spectral::Normalization::unitary);

/// || A pred - y ||^2.
Var dip_pixel_loss(Var pred, const degrade::Observation& obs);

/// Dispatch on spec.kind (and apply band weights when present).
Var loss(Var pred, const degrade::Observation& obs, const LossSpec& spec);

/// Evaluate a loss on a plain tensor.
double evaluate(const Tensor& pred, const degrade::Observation& obs, const LossSpec& spec);

/// Band-wise || F(A pred) - F(y) ||^2 under the unitary transform; sums to the
/// unitary dsp_complex_loss.
std::vector<double> per_band_residual(const Tensor& pred, const degrade::Observation& obs,
                                      const spectral::BandMask& bands);

}  // namespace spectralprior::objective
