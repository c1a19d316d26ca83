#include "spectralprior/optimize.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "spectralprior/metrics.hpp"

namespace spectralprior::optimize {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam|sgd)");
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("optimizer: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer: beta2 must be in [0, 1)");
  if (!(eps_adam > 0.0)) throw ConfigError("optimizer: eps_adam must be > 0");
  if (iterations < 1) throw ConfigError("optimizer: iterations must be >= 1");
  if (log_every < 1) throw ConfigError("optimizer: log_every must be >= 1");
  if (!(divergence_factor > 1.0)) throw ConfigError("optimizer: divergence_factor must be > 1");
}

void update(std::vector<Tensor*> params, const std::vector<Tensor>& grads, const OptimizerConfig& opt,
            Moments& moments) {
  if (params.size() != grads.size()) throw ConfigError("update: parameter/gradient count mismatch");
  if (opt.kind == OptimizerKind::sgd) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto w = params[p]->data();
      auto g = grads[p].data();
      if (w.size() != g.size()) throw ShapeError("update: gradient size mismatch", "param " + std::to_string(p));
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= opt.lr * g[i];
    }
    ++moments.t;
    return;
  }

  if (moments.first.empty()) {
    for (const auto* p : params) {
      moments.first.emplace_back(p->size(), 0.0);
      moments.second.emplace_back(p->size(), 0.0);
    }
  }
  ++moments.t;
  const double t = static_cast<double>(moments.t);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p]->data();
    auto g = grads[p].data();
    if (w.size() != g.size() || moments.first[p].size() != w.size()) {
      throw ShapeError("update: gradient size mismatch", "param " + std::to_string(p));
    }
    double* __restrict wp = w.data();
    const double* __restrict gp = g.data();
    double* __restrict m = moments.first[p].data();
    double* __restrict v = moments.second[p].data();
    const double b1 = opt.beta1, b2 = opt.beta2, lr = opt.lr, eps = opt.eps_adam;
    const double inv_bc1 = 1.0 / bc1, inv_bc2 = 1.0 / bc2;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * gp[i];
      v[i] = b2 * v[i] + (1.0 - b2) * gp[i] * gp[i];
      wp[i] -= lr * (m[i] * inv_bc1) / (std::sqrt(v[i] * inv_bc2) + eps);
    }
  }
}

namespace {

struct Evaluation {
  double loss;
  Tensor output;
};

// Forward at the current parameters; when `train` is set, also backward and update.
Evaluation evaluate_and_update(generator::GeneratorState& state, const objective::LossSpec& loss_spec,
                               const degrade::Observation& obs, const OptimizerConfig& opt, Moments& moments,
                               bool train) {
  Tape tape;
  auto fwd = generator::forward(state, tape);
  Var loss = objective::loss(fwd.output, obs, loss_spec);
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw NumericalError("non-finite loss");
  if (train) {
    auto grads = tape.backward(loss);
    std::vector<Tensor*> params;
    std::vector<Tensor> g;
    params.reserve(state.params.size());
    g.reserve(state.params.size());
    for (std::size_t i = 0; i < state.params.size(); ++i) {
      params.push_back(&state.params[i].value);
      g.push_back(std::move(grads.at(fwd.params[i].id())));
    }
    update(std::move(params), g, opt, moments);
  }
  return {value, fwd.output.value()};
}

}  // namespace

double step(generator::GeneratorState& state, const objective::LossSpec& loss_spec, const degrade::Observation& obs,
            const OptimizerConfig& opt, Moments& moments) {
  return evaluate_and_update(state, loss_spec, obs, opt, moments, true).loss;
}

RunRecord run(const RunConfig& config, const degrade::Observation& obs, const Progress& progress) {
  const Shape& in = obs.op.in_shape();
  auto gen_config = config.generator;
  if (gen_config.output_channels != in[0]) {
    throw ConfigError("run: generator produces " + std::to_string(gen_config.output_channels) +
                      " channels but the operator expects " + std::to_string(in[0]));
  }
  auto state = generator::init(gen_config, config.optimizer.seed, in[1], in[2]);
  return run(state, config, obs, progress);
}

RunRecord run(generator::GeneratorState& state, const RunConfig& config, const degrade::Observation& obs,
              const Progress& progress) {
  const auto& opt = config.optimizer;
  opt.validate();
  config.loss.validate();

  const Shape& meas = obs.op.out_shape();
  const auto bands = spectral::BandMask::radial(meas[1], meas[2], config.bands);

  RunRecord record;
  record.band_edges = bands.upper_edges();
  record.loss_kind = objective::to_string(config.loss.kind);

  std::optional<Tensor> clean_measurement;
  if (obs.ground_truth) clean_measurement = obs.op.apply(*obs.ground_truth);

  const auto start = std::chrono::steady_clock::now();
  Moments moments;
  double initial = std::numeric_limits<double>::quiet_NaN();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t t = 0;; ++t) {
    const bool last = t == opt.iterations;
    Evaluation ev{0.0, {}};
    try {
      ev = evaluate_and_update(state, config.loss, obs, opt, moments, !last);
    } catch (const NumericalError& e) {
      record.status = "non_finite";
      throw RunAborted(std::string(e.what()) + " at iteration " + std::to_string(t), std::move(record));
    }
    if (t == 0) {
      initial = ev.loss;
    } else if (initial > 0.0 && ev.loss > opt.divergence_factor * initial) {
      record.status = "diverged";
      throw RunAborted("loss " + std::to_string(ev.loss) + " exceeded " + std::to_string(opt.divergence_factor) +
                           "x its initial value " + std::to_string(initial) + " at iteration " + std::to_string(t),
                       std::move(record));
    }

    if (t == 0 || t % opt.log_every == 0 || last) {
      LogEntry e;
      e.iteration = t;
      e.loss = ev.loss;
      e.psnr = nan;
      e.clean_error = nan;
      if (obs.ground_truth) {
        e.psnr = config.metric_mask
                     ? diagnostics::psnr(ev.output, *obs.ground_truth, config.psnr_peak, *config.metric_mask)
                     : diagnostics::psnr(ev.output, *obs.ground_truth, config.psnr_peak);
        const Tensor ax = obs.op.apply(ev.output);
        Tensor diff(ax.shape());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = ax[i] - (*clean_measurement)[i];
        e.clean_error = spectral::dft2(diff, spectral::Normalization::unitary).energy();
      }
      e.band_residuals = objective::per_band_residual(ev.output, obs, bands);
      e.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      record.entries.push_back(e);
      if (progress) progress(record.entries.back());
    }
    if (last) {
      record.reconstruction = std::move(ev.output);
      break;
    }
  }
  return record;
}

}  // namespace spectralprior::optimize
