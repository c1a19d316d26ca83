#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spectralprior/degrade.hpp"
#include "spectralprior/error.hpp"
#include "spectralprior/generator.hpp"
#include "spectralprior/objective.hpp"
#include "spectralprior/spectral.hpp"

namespace spectralprior::optimize {

enum class OptimizerKind { adam, sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t iterations = 3000;
  std::size_t log_every = 50;
  std::uint64_t seed = 0;
  /// Abort when the loss exceeds this multiple of its initial value.
  double divergence_factor = 10.0;

  void validate() const;
};

/// First and second moment buffers, one per parameter tensor.
struct Moments {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::size_t t = 0;
};

/// Apply one update in place. Adam uses bias-corrected moments; moments are
/// lazily sized to zero on the first call.
void update(std::vector<Tensor*> params, const std::vector<Tensor>& grads, const OptimizerConfig& opt,
            Moments& moments);

/// One forward + backward + parameter update at theta_t. Returns the loss at
/// theta_t (before the update). Throws NumericalError on a non-finite loss.
double step(generator::GeneratorState& state, const objective::LossSpec& loss_spec,
            const degrade::Observation& obs, const OptimizerConfig& opt, Moments& moments);

struct LogEntry {
  std::size_t iteration = 0;
  double loss = 0.0;
  /// PSNR of the reconstruction against ground truth; NaN when unavailable.
  double psnr = 0.0;
  /// || F(A x_hat) - F(A x) ||^2 against the clean image (unitary); NaN when
  /// no ground truth is available.
  double clean_error = 0.0;
  std::vector<double> band_residuals;
  double ms = 0.0;
};

struct RunRecord {
  std::vector<LogEntry> entries;
  Tensor reconstruction;
  std::vector<double> band_edges;
  std::string loss_kind;
  std::string status = "ok";
};

/// Raised when a run cannot continue; carries everything logged so far.
class RunAborted : public NumericalError {
 public:
  RunAborted(const std::string& what, RunRecord partial) : NumericalError(what), partial_(std::move(partial)) {}
  const RunRecord& partial() const noexcept { return partial_; }

 private:
  RunRecord partial_;
};

struct RunConfig {
  generator::GeneratorConfig generator;
  objective::LossSpec loss;
  OptimizerConfig optimizer;
  std::size_t bands = 8;
  /// Image-space 0/1 region [1,H,W] over which PSNR is measured; whole image if absent.
  std::optional<Tensor> metric_mask;
  double psnr_peak = 1.0;
};

/// Called after every logged entry.
using Progress = std::function<void(const LogEntry&)>;

/// Runs `iterations` steps from a fresh generator seeded with
/// `optimizer.seed`. Entry 0 is the initial state; further entries every
/// `log_every` iterations plus the last one. Entry t describes theta_t.
RunRecord run(const RunConfig& config, const degrade::Observation& obs, const Progress& progress = {});

/// Same loop on an existing state (which is updated in place).
RunRecord run(generator::GeneratorState& state, const RunConfig& config, const degrade::Observation& obs,
              const Progress& progress = {});

}  // namespace spectralprior::optimize
