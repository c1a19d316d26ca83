#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectralprior/degrade.hpp"
#include "spectralprior/metrics.hpp"
#include "spectralprior/optimize.hpp"
#include "spectralprior/spectral.hpp"

namespace spectralprior::diagnostics {

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

/// Trailing moving average over a logged series: the value at entry i is the
/// mean of all entries j <= i with iterations[j] > iterations[i] - window.
std::vector<double> moving_average(const std::vector<std::size_t>& iterations, const std::vector<double>& values,
                                   std::size_t window);

/// Least-squares slope of log(value) against log(iteration), negated, over
/// entries in the final decade [T/10, T] with positive iteration and value.
/// NaN when fewer than two such entries exist.
double fit_decay_exponent(const std::vector<std::size_t>& iterations, const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Spectral ordering of band residuals.

struct SpectralTrajectory {
  std::vector<std::size_t> iterations;
  std::vector<std::vector<double>> residuals;  ///< [band][entry], raw
  std::vector<double> t_half;                 ///< first iteration at half the initial residual; NaN if never
  std::vector<double> alpha;                  ///< per-band decay exponent over the last decade
  std::size_t bands_checked = 0;
  Verdict verdict = Verdict::inconclusive;
};

struct OrderingOptions {
  std::size_t smoothing_window = 50;
  /// How many of the lowest bands must have non-decreasing t_half.
  std::size_t bands_checked = 4;
  std::size_t min_entries = 4;
};

/// t_half is taken on the smoothed residual. A band that never halves counts
/// as +infinity; the verdict is INCONCLUSIVE when no checked band halves.
SpectralTrajectory spectral_ordering_report(const optimize::RunRecord& record, const OrderingOptions& options = {});

// ---------------------------------------------------------------------------
// Early stopping.

struct PsnrTrajectoryStats {
  double peak_psnr = 0.0;
  std::size_t peak_iteration = 0;
  double final_psnr = 0.0;
  double drop = 0.0;  ///< peak - final
};

PsnrTrajectoryStats psnr_trajectory_stats(const optimize::RunRecord& record);

struct EarlyStoppingReport {
  PsnrTrajectoryStats dip;
  PsnrTrajectoryStats dsp;
};

EarlyStoppingReport early_stopping_report(const optimize::RunRecord& dip, const optimize::RunRecord& dsp);

// ---------------------------------------------------------------------------
// Bias-variance decomposition of reconstruction spectra.

struct BiasVarianceReport {
  std::size_t realizations = 0;
  std::vector<double> bias2;      ///< || mean_i F(x_i) - F(x) ||^2 per band
  std::vector<double> variance;   ///< mean_i || F(x_i) - mean F ||^2 per band
  std::vector<double> total;      ///< bias2 + variance
  std::vector<double> direct_mse; ///< mean_i || F(x_i) - F(x) ||^2 per band
  std::vector<double> variance_share;  ///< variance / direct_mse
  double max_identity_error = 0.0;     ///< max relative |total - direct_mse|
};

/// Empirical decomposition over reconstructions of the same clean image
/// (unitary transform).
BiasVarianceReport bias_variance_decomposition(const std::vector<Tensor>& reconstructions, const Tensor& clean,
                                               const spectral::BandMask& bands);

struct BiasVarianceTask {
  Tensor clean;
  /// Operator used for every realization.
  degrade::DegradationOp op;
  double sigma = 25.0 / 255.0;
  /// Noise seeds, one per realization. Leave empty to derive n seeds from
  /// base_noise_seed.
  std::vector<std::uint64_t> noise_seeds;
  std::uint64_t base_noise_seed = 1;
  optimize::RunConfig run;
};

/// Runs n reconstructions that differ only in the noise seed (in parallel,
/// at most `threads` at a time) and decomposes their spectral error.
BiasVarianceReport bias_variance_experiment(const BiasVarianceTask& task, std::size_t n, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Frequency-consistency manifold.

/// || F(A x_hat) - F(y) || under the unitary transform.
double manifold_residual(const Tensor& x_hat, const degrade::Observation& obs);

// ---------------------------------------------------------------------------
// Stability to noise: clean-signal spectral error against the low-band noise energy.

struct NoiseStabilityReport {
  std::vector<std::size_t> iterations;
  std::vector<double> error;           ///< || F(A x_t) - F(A x) ||^2, raw
  std::vector<double> smoothed_excess; ///< smoothed error - bound
  double bound = 0.0;                  ///< || F(eta_<k) ||^2
  std::size_t k = 0;
  double final_error = 0.0;            ///< smoothed error at the last entry
  double alpha = 0.0;                  ///< decay exponent of the positive excess
  bool decreasing = false;
  bool within_bound = false;
  Verdict verdict = Verdict::inconclusive;
};

struct StabilityOptions {
  std::size_t smoothing_window = 50;
  double bound_factor = 2.0;
  std::size_t min_entries = 4;
};

/// `record` must come from a run on `obs` with ground truth, and `obs.noise`
/// must hold the realization. Bands are equal-width radial annuli, as many as
/// the record logged.
NoiseStabilityReport noise_stability_report(const optimize::RunRecord& record, const degrade::Observation& obs,
                                            std::size_t k, const StabilityOptions& options = {});

// ---------------------------------------------------------------------------
// Serialization: CSV tables and one-page text summaries.

std::string to_csv(const SpectralTrajectory& r);
std::string summary(const SpectralTrajectory& r);
std::string to_csv(const EarlyStoppingReport& r);
std::string summary(const EarlyStoppingReport& r);
std::string to_csv(const BiasVarianceReport& r);
std::string summary(const BiasVarianceReport& r);
std::string to_csv(const NoiseStabilityReport& r);
std::string summary(const NoiseStabilityReport& r);

}  // namespace spectralprior::diagnostics
