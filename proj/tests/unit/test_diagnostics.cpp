#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "spectralprior/diagnostics.hpp"
#include "spectralprior/error.hpp"
#include "spectralprior/objective.hpp"

using namespace spectralprior;
using diagnostics::Verdict;

namespace {

// Residual of band b decays as exp(-rate_b t).
optimize::RunRecord decaying_record(const std::vector<double>& rates, std::size_t T, std::size_t every, double scale = 1.0) {
  optimize::RunRecord rec;
  for (std::size_t t = 0; t <= T; t += every) {
    optimize::LogEntry e;
    e.iteration = t;
    for (double r : rates) e.band_residuals.push_back(scale * std::exp(-r * static_cast<double>(t)));
    rec.entries.push_back(e);
  }
  return rec;
}

optimize::RunRecord psnr_record(const std::vector<double>& psnr) {
  optimize::RunRecord rec;
  for (std::size_t i = 0; i < psnr.size(); ++i) {
    optimize::LogEntry e;
    e.iteration = i * 10;
    e.psnr = psnr[i];
    rec.entries.push_back(e);
  }
  return rec;
}

}  // namespace

TEST_CASE("psnr examples") {
  Rng rng(1);
  const auto a = oracle::random_tensor({2, 8, 8}, rng, 0.0, 1.0);
  CHECK(std::isinf(diagnostics::psnr(a, a)));
  Tensor b = a;
  for (auto& v : b.storage()) v += 0.1;
  CHECK(diagnostics::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  const auto c = oracle::random_tensor({2, 8, 8}, rng, 0.0, 1.0);
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - c[i]) * (a[i] - c[i]);
  const double ref = 10.0 * std::log10(4.0 / (se / a.size()));
  CHECK(std::abs(diagnostics::psnr(a, c, 2.0) - ref) < 1e-10);
  CHECK(diagnostics::psnr(a, c) == diagnostics::psnr(c, a));
  Tensor a2 = a, c2 = c;
  for (auto& v : a2.storage()) v += 0.25;
  for (auto& v : c2.storage()) v += 0.25;
  CHECK(diagnostics::psnr(a2, c2) == doctest::Approx(diagnostics::psnr(a, c)).epsilon(1e-12));
  CHECK_THROWS_AS(diagnostics::psnr(a, Tensor({2, 8, 4})), ShapeError);
  CHECK(diagnostics::mse(a, b) == doctest::Approx(0.01));
}

TEST_CASE("masked psnr only sees the masked pixels") {
  Tensor a({1, 2, 2}, {0.0, 0.0, 0.0, 0.0});
  Tensor b({1, 2, 2}, {0.1, 0.1, 0.9, 0.9});
  Tensor mask({1, 2, 2}, {1.0, 1.0, 0.0, 0.0});
  CHECK(diagnostics::psnr(a, b, 1.0, mask) == doctest::Approx(20.0));
}

TEST_CASE("moving average and decay exponent") {
  const std::vector<std::size_t> it{0, 10, 20, 30, 40};
  const std::vector<double> v{4, 2, 6, 8, 0};
  const auto s = diagnostics::moving_average(it, v, 20);
  CHECK(s == std::vector<double>{4, 3, 4, 7, 4});
  std::vector<std::size_t> t;
  std::vector<double> y;
  for (std::size_t i = 1; i <= 1000; i += 7) {
    t.push_back(i);
    y.push_back(3.0 * std::pow(static_cast<double>(i), -1.5));
  }
  CHECK(diagnostics::fit_decay_exponent(t, y) == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(std::isnan(diagnostics::fit_decay_exponent({0, 1}, {1.0, 1.0})));
}

TEST_CASE("spectral ordering on constructed records") {
  const auto pass = diagnostics::spectral_ordering_report(decaying_record({0.02, 0.01, 0.005, 0.002, 0.001, 0.0, 0.0, 0.0}, 2000, 10));
  CHECK(pass.verdict == Verdict::pass);
  CHECK(pass.t_half[0] < pass.t_half[1]);
  CHECK(std::isnan(pass.t_half[7]));

  const auto fail = diagnostics::spectral_ordering_report(decaying_record({0.001, 0.01, 0.005, 0.002}, 2000, 10));
  CHECK(fail.verdict == Verdict::fail);

  const auto flat = diagnostics::spectral_ordering_report(decaying_record(std::vector<double>(8, 0.0), 2000, 10));
  CHECK(flat.verdict == Verdict::inconclusive);
  for (double t : flat.t_half) CHECK(std::isnan(t));

  // Only ratios matter.
  const auto scaled = diagnostics::spectral_ordering_report(
      decaying_record({0.02, 0.01, 0.005, 0.002, 0.001, 0.0, 0.0, 0.0}, 2000, 10, 1e6));
  CHECK(scaled.verdict == pass.verdict);
  for (std::size_t b = 0; b < 8; ++b) {
    if (std::isnan(pass.t_half[b])) {
      CHECK(std::isnan(scaled.t_half[b]));
    } else {
      CHECK(scaled.t_half[b] == pass.t_half[b]);
    }
  }

  CHECK_THROWS_AS(diagnostics::spectral_ordering_report(decaying_record({0.1}, 20, 10)), ConfigError);
  CHECK_FALSE(diagnostics::to_csv(pass).empty());
  CHECK(diagnostics::summary(pass).find("PASS") != std::string::npos);
}

TEST_CASE("early stopping arithmetic") {
  const auto s = diagnostics::psnr_trajectory_stats(psnr_record({20, 25, 22}));
  CHECK(s.peak_psnr == 25);
  CHECK(s.peak_iteration == 10);
  CHECK(s.final_psnr == 22);
  CHECK(s.drop == 3);
  CHECK(diagnostics::psnr_trajectory_stats(psnr_record({10, 11, 12, 13})).drop == 0.0);
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(diagnostics::psnr_trajectory_stats(psnr_record({nan, nan})), ConfigError);
  const auto r = diagnostics::early_stopping_report(psnr_record({20, 25, 22}), psnr_record({18, 19, 20}));
  CHECK(r.dip.drop == 3);
  CHECK(r.dsp.drop == 0);
  CHECK(diagnostics::to_csv(r).find("dip") != std::string::npos);
}

TEST_CASE("bias-variance identity on arbitrary samples") {
  Rng rng(2);
  const auto clean = oracle::random_tensor({2, 16, 16}, rng, 0.0, 1.0);
  const auto bands = spectral::BandMask::radial(16, 16, 8);
  for (std::size_t n : {2u, 3u, 8u}) {
    std::vector<Tensor> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(oracle::random_tensor(clean.shape(), rng, 0.0, 1.0));
    const auto r = diagnostics::bias_variance_decomposition(xs, clean, bands);
    CHECK(r.realizations == n);
    CHECK(r.max_identity_error < 1e-12);
    for (std::size_t b = 0; b < 8; ++b) {
      CHECK(r.total[b] == doctest::Approx(r.direct_mse[b]).epsilon(1e-12));
      CHECK(r.variance_share[b] == doctest::Approx(r.variance[b] / r.direct_mse[b]));
    }
  }
  const auto same = diagnostics::bias_variance_decomposition({clean, clean}, clean, bands);
  for (double v : same.variance) CHECK(v == 0.0);
  CHECK_THROWS_AS(diagnostics::bias_variance_decomposition({}, clean, bands), ConfigError);
}

TEST_CASE("identical noise seeds give zero variance") {
  diagnostics::BiasVarianceTask task{oracle::scene(16), degrade::DegradationOp::identity({1, 16, 16}), 0.1, {5, 5}, 1, {}};
  task.run.generator.depth = 2;
  task.run.generator.channels = {4, 4};
  task.run.generator.skip_channels = {2, 2};
  task.run.optimizer.iterations = 3;
  const auto r = diagnostics::bias_variance_experiment(task, 2, 2);
  for (double v : r.variance) CHECK(v == 0.0);
  CHECK(r.max_identity_error < 1e-9);
}

TEST_CASE("manifold residual is the root of the complex loss") {
  Rng rng(3);
  const auto clean = oracle::random_tensor({1, 16, 16}, rng, 0.0, 1.0);
  const auto op = degrade::DegradationOp::bernoulli_mask(clean.shape(), 0.5, 4);
  const auto obs = degrade::corrupt(clean, op, degrade::NoiseModel::gaussian(0.1, 5));
  const auto x = oracle::random_tensor(clean.shape(), rng, 0.0, 1.0);
  const double loss = objective::evaluate(x, obs, {objective::LossKind::dsp_complex});
  CHECK(diagnostics::manifold_residual(x, obs) * diagnostics::manifold_residual(x, obs) ==
        doctest::Approx(loss).epsilon(1e-12));
  const auto exact = degrade::corrupt(clean, op, degrade::NoiseModel::none());
  CHECK(diagnostics::manifold_residual(clean, exact) == 0.0);
}

TEST_CASE("noise stability on constructed trajectories") {
  const std::size_t n = 16;
  const auto clean = oracle::scene(n);
  const auto op = degrade::DegradationOp::identity(clean.shape());

  // Zero noise: the bound is zero, so only decay matters.
  {
    const auto obs = degrade::corrupt(clean, op, degrade::NoiseModel::none());
    optimize::RunRecord rec;
    for (std::size_t t = 0; t <= 1000; t += 10) {
      optimize::LogEntry e;
      e.iteration = t;
      e.clean_error = 5.0 / (1.0 + static_cast<double>(t));
      e.band_residuals.assign(8, 0.0);
      rec.entries.push_back(e);
    }
    const auto r = diagnostics::noise_stability_report(rec, obs, 2);
    CHECK(r.bound == 0.0);
    CHECK(r.decreasing);
    CHECK(r.within_bound);
    CHECK(r.verdict == Verdict::pass);
  }
  // Noise confined to band 0 with k = 2: the bound is the whole noise energy.
  {
    auto obs = degrade::corrupt(clean, op, degrade::NoiseModel::none());
    Tensor eta(clean.shape());
    for (auto& v : eta.storage()) v = 0.05;
    obs.noise = eta;
    for (std::size_t i = 0; i < eta.size(); ++i) obs.y[i] += eta[i];
    const double energy = oracle::dot(eta, eta);
    optimize::RunRecord rec;
    for (std::size_t t = 0; t <= 1000; t += 10) {
      optimize::LogEntry e;
      e.iteration = t;
      e.clean_error = energy * (1.0 + 10.0 / (1.0 + static_cast<double>(t)));
      e.band_residuals.assign(8, 0.0);
      rec.entries.push_back(e);
    }
    const auto r = diagnostics::noise_stability_report(rec, obs, 2);
    CHECK(r.bound == doctest::Approx(energy).epsilon(1e-12));
    CHECK(r.within_bound);
    CHECK(r.decreasing);
    CHECK(r.verdict == Verdict::pass);
  }
  // Error far above the bound.
  {
    const auto obs = degrade::corrupt(clean, op, degrade::NoiseModel::gaussian(0.1, 3));
    optimize::RunRecord rec;
    for (std::size_t t = 0; t <= 1000; t += 10) {
      optimize::LogEntry e;
      e.iteration = t;
      e.clean_error = 1e3 + 1.0 / (1.0 + static_cast<double>(t));
      e.band_residuals.assign(8, 0.0);
      rec.entries.push_back(e);
    }
    const auto r = diagnostics::noise_stability_report(rec, obs, 2);
    CHECK_FALSE(r.within_bound);
    CHECK(r.verdict == Verdict::fail);
  }
}
