#include "spectralprior/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "spectralprior/kernels.hpp"
#include "spectralprior/rng.hpp"

namespace spectralprior::diagnostics {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::size_t> iterations_of(const optimize::RunRecord& r) {
  std::vector<std::size_t> out;
  out.reserve(r.entries.size());
  for (const auto& e : r.entries) out.push_back(e.iteration);
  return out;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

std::vector<double> moving_average(const std::vector<std::size_t>& iterations, const std::vector<double>& values,
                                   std::size_t window) {
  if (iterations.size() != values.size()) throw ConfigError("moving_average: length mismatch");
  std::vector<double> out(values.size());
  std::size_t lo = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    while (lo < i && iterations[lo] + window <= iterations[i]) ++lo;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += values[j];
    out[i] = s / static_cast<double>(i - lo + 1);
  }
  return out;
}

double fit_decay_exponent(const std::vector<std::size_t>& iterations, const std::vector<double>& values) {
  if (iterations.empty()) return kNaN;
  const double last = static_cast<double>(iterations.back());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < iterations.size(); ++i) {
    const double t = static_cast<double>(iterations[i]);
    if (t <= 0.0 || t < last / 10.0 || !(values[i] > 0.0)) continue;
    const double x = std::log(t), y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return kNaN;
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  if (denom == 0.0) return kNaN;
  return -(dn * sxy - sx * sy) / denom;
}

SpectralTrajectory spectral_ordering_report(const optimize::RunRecord& record, const OrderingOptions& options) {
  if (record.entries.size() < options.min_entries) {
    throw ConfigError("spectral ordering: record has " + std::to_string(record.entries.size()) +
                      " logged entries; need at least " + std::to_string(options.min_entries) +
                      " (lower log_every)");
  }
  const std::size_t B = record.entries.front().band_residuals.size();
  if (B == 0) throw ConfigError("spectral ordering: record carries no band residuals");
  if (record.entries.front().iteration != 0) throw ConfigError("spectral ordering: record lacks the initial entry");

  SpectralTrajectory r;
  r.iterations = iterations_of(record);
  r.residuals.assign(B, {});
  for (const auto& e : record.entries) {
    if (e.band_residuals.size() != B) throw ConfigError("spectral ordering: band count changes within the record");
    for (std::size_t b = 0; b < B; ++b) r.residuals[b].push_back(e.band_residuals[b]);
  }
  r.t_half.assign(B, kNaN);
  r.alpha.assign(B, kNaN);
  for (std::size_t b = 0; b < B; ++b) {
    const auto smooth = moving_average(r.iterations, r.residuals[b], options.smoothing_window);
    const double target = 0.5 * r.residuals[b][0];
    for (std::size_t i = 1; i < smooth.size(); ++i) {
      if (smooth[i] <= target && r.residuals[b][0] > 0.0) {
        r.t_half[b] = static_cast<double>(r.iterations[i]);
        break;
      }
    }
    r.alpha[b] = fit_decay_exponent(r.iterations, r.residuals[b]);
  }

  r.bands_checked = std::min(options.bands_checked, B);
  const auto as_time = [](double t) { return std::isnan(t) ? std::numeric_limits<double>::infinity() : t; };
  bool any_finite = false;
  bool ordered = true;
  for (std::size_t b = 0; b < r.bands_checked; ++b) {
    any_finite = any_finite || !std::isnan(r.t_half[b]);
    if (b > 0 && as_time(r.t_half[b]) < as_time(r.t_half[b - 1])) ordered = false;
  }
  r.verdict = !any_finite ? Verdict::inconclusive : (ordered ? Verdict::pass : Verdict::fail);
  return r;
}

PsnrTrajectoryStats psnr_trajectory_stats(const optimize::RunRecord& record) {
  if (record.entries.empty()) throw ConfigError("early stopping: empty record");
  PsnrTrajectoryStats s;
  s.peak_psnr = -std::numeric_limits<double>::infinity();
  for (const auto& e : record.entries) {
    if (std::isnan(e.psnr)) throw ConfigError("early stopping: record has no PSNR (ground truth missing)");
    if (e.psnr > s.peak_psnr) {
      s.peak_psnr = e.psnr;
      s.peak_iteration = e.iteration;
    }
  }
  s.final_psnr = record.entries.back().psnr;
  s.drop = s.peak_psnr - s.final_psnr;
  return s;
}

EarlyStoppingReport early_stopping_report(const optimize::RunRecord& dip, const optimize::RunRecord& dsp) {
  return {psnr_trajectory_stats(dip), psnr_trajectory_stats(dsp)};
}

BiasVarianceReport bias_variance_decomposition(const std::vector<Tensor>& reconstructions, const Tensor& clean,
                                               const spectral::BandMask& bands) {
  if (reconstructions.empty()) throw ConfigError("bias-variance: need at least one reconstruction");
  const std::size_t n = reconstructions.size();
  const std::size_t B = bands.band_count();
  const auto ref = spectral::dft2(clean, spectral::Normalization::unitary);
  std::vector<spectral::Spectrum> spectra;
  spectra.reserve(n);
  for (const auto& x : reconstructions) {
    if (x.shape() != clean.shape()) throw ShapeError("bias-variance: reconstruction shape differs from clean", "all axes");
    spectra.push_back(spectral::dft2(x, spectral::Normalization::unitary));
  }
  const std::size_t m = ref.size();
  std::vector<double> mean_re(m, 0.0), mean_im(m, 0.0);
  for (const auto& s : spectra) {
    for (std::size_t i = 0; i < m; ++i) {
      mean_re[i] += s.re[i];
      mean_im[i] += s.im[i];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < m; ++i) {
    mean_re[i] *= inv_n;
    mean_im[i] *= inv_n;
  }

  BiasVarianceReport r;
  r.realizations = n;
  r.bias2.assign(B, 0.0);
  r.variance.assign(B, 0.0);
  r.direct_mse.assign(B, 0.0);
  const std::size_t H = ref.height, W = ref.width;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = bands.band_of((i / W) % H, i % W);
    const double dr = mean_re[i] - ref.re[i], di = mean_im[i] - ref.im[i];
    r.bias2[b] += dr * dr + di * di;
    double var = 0.0, direct = 0.0;
    for (const auto& s : spectra) {
      const double vr = s.re[i] - mean_re[i], vi = s.im[i] - mean_im[i];
      var += vr * vr + vi * vi;
      const double er = s.re[i] - ref.re[i], ei = s.im[i] - ref.im[i];
      direct += er * er + ei * ei;
    }
    r.variance[b] += var * inv_n;
    r.direct_mse[b] += direct * inv_n;
  }
  r.total.resize(B);
  r.variance_share.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    r.total[b] = r.bias2[b] + r.variance[b];
    r.variance_share[b] = r.direct_mse[b] > 0.0 ? r.variance[b] / r.direct_mse[b] : kNaN;
    const double scale = std::max(std::abs(r.direct_mse[b]), std::numeric_limits<double>::min());
    r.max_identity_error = std::max(r.max_identity_error, std::abs(r.total[b] - r.direct_mse[b]) / scale);
  }
  return r;
}

BiasVarianceReport bias_variance_experiment(const BiasVarianceTask& task, std::size_t n, std::size_t threads) {
  if (n < 2) throw ConfigError("bias-variance: need n >= 2 realizations");
  std::vector<std::uint64_t> seeds = task.noise_seeds;
  if (seeds.empty()) {
    for (std::size_t i = 0; i < n; ++i) seeds.push_back(Rng::derive(task.base_noise_seed, i));
  }
  if (seeds.size() != n) throw ConfigError("bias-variance: noise_seeds has " + std::to_string(seeds.size()) + " entries, n = " + std::to_string(n));

  std::vector<Tensor> recon(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    if (threads > 1) kernels::set_thread_count(1);
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const auto obs = degrade::corrupt(task.clean, task.op, degrade::NoiseModel::gaussian(task.sigma, seeds[i]));
        recon[i] = optimize::run(task.run, obs).reconstruction;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t pool = std::max<std::size_t>(1, std::min(threads, n));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < pool; ++w) workers.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const auto bands = spectral::BandMask::radial(task.clean.dim(1), task.clean.dim(2), task.run.bands);
  return bias_variance_decomposition(recon, task.clean, bands);
}

double manifold_residual(const Tensor& x_hat, const degrade::Observation& obs) {
  const Tensor ax = obs.op.apply(x_hat);
  Tensor diff(ax.shape());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = ax[i] - obs.y[i];
  return std::sqrt(spectral::dft2(diff, spectral::Normalization::unitary).energy());
}

NoiseStabilityReport noise_stability_report(const optimize::RunRecord& record, const degrade::Observation& obs,
                                            std::size_t k, const StabilityOptions& options) {
  if (!obs.ground_truth) throw ConfigError("noise stability: observation has no ground truth");
  if (!obs.noise) throw ConfigError("noise stability: noise realization unknown");
  if (record.entries.size() < options.min_entries) {
    throw ConfigError("noise stability: record has too few logged entries");
  }
  const std::size_t B = record.entries.front().band_residuals.size();
  if (k > B) throw ConfigError("noise stability: k exceeds band count");

  NoiseStabilityReport r;
  r.k = k;
  r.iterations = iterations_of(record);
  for (const auto& e : record.entries) {
    if (std::isnan(e.clean_error)) throw ConfigError("noise stability: record has no clean-signal error");
    r.error.push_back(e.clean_error);
  }
  const Shape& meas = obs.op.out_shape();
  const auto bands = spectral::BandMask::radial(meas[1], meas[2], B);
  const auto noise_bands = spectral::band_energy(spectral::dft2(*obs.noise, spectral::Normalization::unitary), bands);
  for (std::size_t b = 0; b < k; ++b) r.bound += noise_bands[b];

  const auto smooth = moving_average(r.iterations, r.error, options.smoothing_window);
  r.smoothed_excess.resize(smooth.size());
  for (std::size_t i = 0; i < smooth.size(); ++i) r.smoothed_excess[i] = smooth[i] - r.bound;
  r.final_error = smooth.back();

  // Excess at the last entry against the excess at the midpoint of the run.
  const std::size_t half_iter = r.iterations.back() / 2;
  std::size_t mid = 0;
  while (mid + 1 < r.iterations.size() && r.iterations[mid + 1] <= half_iter) ++mid;
  const double end_excess = r.smoothed_excess.back();
  r.decreasing = end_excess <= 0.0 || end_excess < r.smoothed_excess[mid];

  std::vector<double> positive(r.smoothed_excess.size());
  for (std::size_t i = 0; i < positive.size(); ++i) positive[i] = std::max(r.smoothed_excess[i], 0.0);
  r.alpha = fit_decay_exponent(r.iterations, positive);

  r.within_bound = r.bound == 0.0 ? true : r.final_error <= options.bound_factor * r.bound;
  const bool flat = std::all_of(smooth.begin(), smooth.end(), [&](double v) { return v == smooth.front(); });
  if (flat) {
    r.verdict = Verdict::inconclusive;
  } else {
    r.verdict = (r.decreasing && r.within_bound) ? Verdict::pass : Verdict::fail;
  }
  return r;
}

std::string to_csv(const SpectralTrajectory& r) {
  std::ostringstream os;
  os << "band,t_half,alpha\n";
  for (std::size_t b = 0; b < r.t_half.size(); ++b) os << b << ',' << fmt(r.t_half[b]) << ',' << fmt(r.alpha[b]) << '\n';
  return os.str();
}

std::string summary(const SpectralTrajectory& r) {
  std::ostringstream os;
  os << "spectral ordering report\n";
  os << "  logged entries: " << r.iterations.size() << " (last iteration " << r.iterations.back() << ")\n";
  os << "  t_half per band (iterations to halve the smoothed residual):\n";
  for (std::size_t b = 0; b < r.t_half.size(); ++b) {
    os << "    band " << b << ": " << fmt(r.t_half[b]) << "  alpha " << fmt(r.alpha[b]) << '\n';
  }
  os << "  verdict over the lowest " << r.bands_checked << " bands: " << to_string(r.verdict) << '\n';
  return os.str();
}

std::string to_csv(const EarlyStoppingReport& r) {
  std::ostringstream os;
  os << "method,peak_psnr,peak_iteration,final_psnr,drop\n";
  auto row = [&](const char* name, const PsnrTrajectoryStats& s) {
    os << name << ',' << fmt(s.peak_psnr) << ',' << s.peak_iteration << ',' << fmt(s.final_psnr) << ',' << fmt(s.drop) << '\n';
  };
  row("dip", r.dip);
  row("dsp", r.dsp);
  return os.str();
}

std::string summary(const EarlyStoppingReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "early stopping report\n";
  os << "  DIP: peak " << r.dip.peak_psnr << " dB at iteration " << r.dip.peak_iteration << ", final "
     << r.dip.final_psnr << " dB, drop " << r.dip.drop << " dB\n";
  os << "  DSP: peak " << r.dsp.peak_psnr << " dB at iteration " << r.dsp.peak_iteration << ", final "
     << r.dsp.final_psnr << " dB, drop " << r.dsp.drop << " dB\n";
  return os.str();
}

std::string to_csv(const BiasVarianceReport& r) {
  std::ostringstream os;
  os << "band,bias2,variance,total,direct_mse,variance_share\n";
  for (std::size_t b = 0; b < r.bias2.size(); ++b) {
    os << b << ',' << fmt(r.bias2[b]) << ',' << fmt(r.variance[b]) << ',' << fmt(r.total[b]) << ','
       << fmt(r.direct_mse[b]) << ',' << fmt(r.variance_share[b]) << '\n';
  }
  return os.str();
}

std::string summary(const BiasVarianceReport& r) {
  std::ostringstream os;
  os << "bias-variance report (" << r.realizations << " noise realizations)\n";
  os << "  max relative |bias2 + variance - mse|: " << fmt(r.max_identity_error) << '\n';
  for (std::size_t b = 0; b < r.bias2.size(); ++b) {
    os << "  band " << b << ": bias2 " << fmt(r.bias2[b]) << ", variance " << fmt(r.variance[b])
       << ", variance share " << fmt(r.variance_share[b]) << '\n';
  }
  return os.str();
}

std::string to_csv(const NoiseStabilityReport& r) {
  std::ostringstream os;
  os << "iter,error,smoothed_excess\n";
  for (std::size_t i = 0; i < r.iterations.size(); ++i) {
    os << r.iterations[i] << ',' << fmt(r.error[i]) << ',' << fmt(r.smoothed_excess[i]) << '\n';
  }
  return os.str();
}

std::string summary(const NoiseStabilityReport& r) {
  std::ostringstream os;
  os << "noise stability report (k = " << r.k << ")\n";
  os << "  low-band noise energy bound: " << fmt(r.bound) << '\n';
  os << "  final smoothed error: " << fmt(r.final_error) << '\n';
  os << "  excess decreasing: " << (r.decreasing ? "yes" : "no") << ", alpha " << fmt(r.alpha) << '\n';
  os << "  within bound factor: " << (r.within_bound ? "yes" : "no") << '\n';
  os << "  verdict: " << to_string(r.verdict) << '\n';
  return os.str();
}

}  // namespace spectralprior::diagnostics
