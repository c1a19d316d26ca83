#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spectralprior/tensor.hpp"

namespace spectralprior::generator {

/// Hourglass encoder/decoder with skip connections.
///
/// Level i of the encoder halves the resolution with a stride-2 conv followed
/// by a stride-1 conv, each followed by instance norm, a per-channel affine and
/// leaky ReLU. The skip branch of level i is a 1x1 conv on the level input.
/// The decoder walks back up: nearest-neighbour upsample, concatenate the
/// skip, k x k conv, 1x1 conv (both normalized). A final 1x1 conv with bias
/// and a sigmoid produces the image.
struct GeneratorConfig {
  std::size_t depth = 5;
  std::vector<std::size_t> channels{16, 32, 64, 128, 128};
  std::vector<std::size_t> skip_channels{4, 4, 4, 4, 4};
  std::size_t kernel_size = 3;
  std::size_t input_channels = 32;
  double input_noise_std = 0.1;
  std::size_t output_channels = 1;
  double leaky_slope = 0.2;
  double norm_eps = 1e-5;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

struct NamedParam {
  std::string name;
  Tensor value;
};

struct GeneratorState {
  std::vector<NamedParam> params;
  Tensor z;
  GeneratorConfig config;
  std::uint64_t seed = 0;

  std::size_t parameter_count() const;
  std::size_t height() const { return z.dim(1); }
  std::size_t width() const { return z.dim(2); }
};

/// Deterministic initialization: He-uniform weights (bound sqrt(6 / fan_in)),
/// unit norm scales, zero shifts and biases, z ~ U(0, input_noise_std).
GeneratorState init(const GeneratorConfig& config, std::uint64_t seed, std::size_t out_h, std::size_t out_w);

/// Closed-form parameter count for a configuration.
std::size_t parameter_count(const GeneratorConfig& config);

struct ForwardResult {
  Var output;               ///< [output_channels, H, W], values in (0, 1)
  std::vector<Var> params;  ///< tape leaves, same order as state.params
};

/// Build f_theta(z) on `tape`. Parameters are registered as gradient leaves; z
/// is a constant.
ForwardResult forward(const GeneratorState& state, Tape& tape);

/// Convenience: evaluate the network without keeping a tape around.
Tensor evaluate(const GeneratorState& state);

/// FNV-1a hash over the bytes of a tensor's data.
std::uint64_t hash(const Tensor& t);

/// Checkpoint: text header of (name, shape) pairs, then the raw little-endian
/// f64 payload in header order. z is stored as the last entry.
void save_checkpoint(const GeneratorState& state, const std::filesystem::path& path);
/// Restores params and z into `state`, which must have a matching layout.
void load_checkpoint(GeneratorState& state, const std::filesystem::path& path);

}  // namespace spectralprior::generator
