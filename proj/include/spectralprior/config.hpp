#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spectralprior/generator.hpp"
#include "spectralprior/objective.hpp"
#include "spectralprior/optimize.hpp"

namespace spectralprior::io {

/// Flat key=value configuration.
///
/// Grammar, one entry per line:
///   line    := blank | comment | entry
///   comment := optional spaces, '#', anything
///   entry   := key '=' value
///   key     := [A-Za-z0-9_.-]+ (surrounding spaces ignored)
///   value   := rest of the line, surrounding spaces ignored
/// Lists are comma-separated. A key may appear once.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& source = "<config>");
std::string format_key_values(const KeyValues& kv);
KeyValues load_key_values(const std::filesystem::path& path);

std::string format_double(double v);
double parse_double(const std::string& key, const std::string& value);
std::uint64_t parse_uint(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

enum class Task { denoise, restore, inpaint, superres };
std::string to_string(Task t);
Task parse_task(const std::string& s);

struct TaskConfig {
  Task task = Task::denoise;
  std::filesystem::path input;
  std::optional<std::filesystem::path> ground_truth;
  std::filesystem::path output_dir = "out";

  objective::LossSpec loss;
  generator::GeneratorConfig generator;
  optimize::OptimizerConfig optimizer;

  /// Generator seed; the noise seed defaults to it.
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;
  /// Noise level in 8-bit units; defaults to 25 for denoise and 0 otherwise.
  std::optional<double> sigma;
  /// Fraction of observed pixels for restore.
  double keep_probability = 0.5;
  std::optional<std::filesystem::path> mask;
  std::size_t factor = 4;
  bool antialias = true;
  std::size_t bands = 8;
  bool record_timing = false;

  double resolved_sigma() const;
  std::uint64_t resolved_noise_seed() const;

  /// Throws ConfigError when task-specific parameters are missing or invalid.
  void validate() const;
};

/// Unknown keys are rejected.
TaskConfig task_config_from(const KeyValues& kv);
/// Every value, with defaults resolved.
KeyValues to_key_values(const TaskConfig& config);

}  // namespace spectralprior::io
