#pragma once

#include <span>
#include <string>

#include "spectralprior/config.hpp"
#include "spectralprior/degrade.hpp"
#include "spectralprior/optimize.hpp"

namespace spectralprior::io {

/// A configured task turned into an observation and a run configuration.
struct PreparedTask {
  degrade::Observation obs;
  optimize::RunConfig run;
  /// Clean image on the padded grid when known (ground truth).
  std::optional<Tensor> clean;
  /// Size of the reconstruction once padding is cropped away.
  std::size_t out_height = 0;
  std::size_t out_width = 0;
  bool padded = false;
  /// FNV-1a hashes of every input file, keyed "hash.<role>".
  KeyValues hashes;
};

/// Loads images, pads to powers of two and builds the degradation.
///
/// denoise, restore and inpaint degrade the input synthetically; the input is
/// also the ground truth unless one is given. superres treats the input as the
/// low-resolution observation of an image `factor` times larger.
PreparedTask prepare(const TaskConfig& config);

/// Manifest: every configuration value plus the input hashes.
KeyValues manifest(const TaskConfig& config, const PreparedTask& prepared);

/// Throws ConfigError when a manifest's hash.* entries disagree with the files.
void verify_hashes(const KeyValues& manifest, const PreparedTask& prepared);

std::string hex64(std::uint64_t v);
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);

}  // namespace spectralprior::io
