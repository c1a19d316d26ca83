#include "spectralprior/objective.hpp"

#include <cmath>

#include "spectralprior/error.hpp"
#include "spectralprior/ops.hpp"

namespace spectralprior::objective {
namespace {

using spectral::Normalization;

Var measured_spectrum(Var pred, const degrade::Observation& obs, Normalization n) {
  return spectral::dft2(obs.op.apply(pred), n);
}

Tensor observed_spectrum(const degrade::Observation& obs, Normalization n) {
  return spectral::pack(spectral::dft2(obs.y, n));
}

// [C,H,W] weight per coefficient from equal-width radial band weights.
Tensor coefficient_weights(const Shape& measurement, const std::vector<double>& band_weights) {
  const auto bands = spectral::BandMask::radial(measurement[1], measurement[2], band_weights.size());
  Tensor w(measurement);
  for (std::size_t c = 0; c < measurement[0]; ++c)
    for (std::size_t u = 0; u < measurement[1]; ++u)
      for (std::size_t v = 0; v < measurement[2]; ++v) w.at(c, u, v) = band_weights[bands.band_of(u, v)];
  return w;
}

Var reduce(Var per_coefficient_diff, const std::vector<double>& band_weights, const Shape& measurement) {
  if (band_weights.empty()) return ops::sum_squares(per_coefficient_diff);
  Tape& tape = per_coefficient_diff.tape();
  Var sq = ops::square(per_coefficient_diff);
  return ops::sum(ops::mul(sq, tape.constant(coefficient_weights(measurement, band_weights))));
}

Var complex_impl(Var pred, const degrade::Observation& obs, Normalization n, const std::vector<double>& weights) {
  Tape& tape = pred.tape();
  Var diff = ops::sub(measured_spectrum(pred, obs, n), tape.constant(observed_spectrum(obs, n)));
  if (weights.empty()) return ops::sum_squares(diff);
  // Weight |diff|^2 per coefficient; the packed layout repeats the grid for re and im.
  return ops::sum(ops::mul(ops::complex_abs2(diff), tape.constant(coefficient_weights(obs.op.out_shape(), weights))));
}

Tensor smoothed_magnitude(const degrade::Observation& obs, Normalization n, double eps, bool take_log) {
  const auto s = spectral::dft2(obs.y, n);
  Tensor out(obs.y.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = std::sqrt(s.re[i] * s.re[i] + s.im[i] * s.im[i] + eps);
    out[i] = take_log ? std::log(m) : m;
  }
  return out;
}

Var magnitude_impl(Var pred, const degrade::Observation& obs, double eps, Normalization n, bool take_log,
                   const std::vector<double>& weights) {
  if (!(eps > 0.0)) throw ConfigError("magnitude loss: eps must be > 0");
  Tape& tape = pred.tape();
  Var mag = ops::sqrt_eps(ops::complex_abs2(measured_spectrum(pred, obs, n)), eps);
  if (take_log) mag = ops::log(mag);
  Var diff = ops::sub(mag, tape.constant(smoothed_magnitude(obs, n, eps, take_log)));
  return reduce(diff, weights, obs.op.out_shape());
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::dsp_complex: return "dsp_complex";
    case LossKind::dsp_magnitude: return "dsp_magnitude";
    case LossKind::dsp_log_magnitude: return "dsp_log_magnitude";
    case LossKind::dip_pixel: return "dip_pixel";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "dsp_complex") return LossKind::dsp_complex;
  if (s == "dsp_magnitude") return LossKind::dsp_magnitude;
  if (s == "dsp_log_magnitude") return LossKind::dsp_log_magnitude;
  if (s == "dip_pixel") return LossKind::dip_pixel;
  throw ConfigError("unknown loss kind '" + s + "' (expected dsp_complex|dsp_magnitude|dsp_log_magnitude|dip_pixel)");
}

void LossSpec::validate() const {
  const bool magnitude = kind == LossKind::dsp_magnitude || kind == LossKind::dsp_log_magnitude;
  if (magnitude && !(eps > 0.0)) throw ConfigError("loss: eps must be > 0 for magnitude losses");
  for (double w : band_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss: band weights must be finite and >= 0");
  }
}

Var dsp_complex_loss(Var pred, const degrade::Observation& obs, Normalization normalization) {
  return complex_impl(pred, obs, normalization, {});
}

Var dsp_magnitude_loss(Var pred, const degrade::Observation& obs, double eps, Normalization normalization) {
  return magnitude_impl(pred, obs, eps, normalization, false, {});
}

Var dsp_log_magnitude_loss(Var pred, const degrade::Observation& obs, double eps, Normalization normalization) {
  return magnitude_impl(pred, obs, eps, normalization, true, {});
}

Var dip_pixel_loss(Var pred, const degrade::Observation& obs) {
  Tape& tape = pred.tape();
  return ops::sum_squares(ops::sub(obs.op.apply(pred), tape.constant(obs.y)));
}

Var loss(Var pred, const degrade::Observation& obs, const LossSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LossKind::dsp_complex:
      return complex_impl(pred, obs, spec.normalization, spec.band_weights);
    case LossKind::dsp_magnitude:
      return magnitude_impl(pred, obs, spec.eps, spec.normalization, false, spec.band_weights);
    case LossKind::dsp_log_magnitude:
      return magnitude_impl(pred, obs, spec.eps, spec.normalization, true, spec.band_weights);
    case LossKind::dip_pixel:
      return dip_pixel_loss(pred, obs);
  }
  throw ConfigError("loss: unhandled kind");
}

double evaluate(const Tensor& pred, const degrade::Observation& obs, const LossSpec& spec) {
  Tape tape;
  return loss(tape.constant(pred), obs, spec).value().item();
}

std::vector<double> per_band_residual(const Tensor& pred, const degrade::Observation& obs,
                                      const spectral::BandMask& bands) {
  const Tensor ap = obs.op.apply(pred);
  Tensor diff(ap.shape());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = ap[i] - obs.y[i];
  return spectral::band_energy(spectral::dft2(diff, Normalization::unitary), bands);
}

}  // namespace spectralprior::objective
