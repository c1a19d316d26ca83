#include "spectralprior/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "spectralprior/error.hpp"
#include "spectralprior/image.hpp"
#include "spectralprior/spectral.hpp"

namespace spectralprior::io {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
  }
  return true;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(value)) out.push_back(parse_uint(key, item));
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(parse_double(key, item));
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const auto where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const auto key = trim(t.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (!kv.emplace(key, trim(t.substr(eq + 1))).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_key_values(std::string(bytes.begin(), bytes.end()), path.string());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto* end = value.data() + value.size();
  const auto [p, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a finite number, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  const auto [p, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string to_string(Task t) {
  switch (t) {
    case Task::denoise: return "denoise";
    case Task::restore: return "restore";
    case Task::inpaint: return "inpaint";
    case Task::superres: return "superres";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  if (s == "denoise") return Task::denoise;
  if (s == "restore") return Task::restore;
  if (s == "inpaint") return Task::inpaint;
  if (s == "superres") return Task::superres;
  throw ConfigError("unknown task '" + s + "' (expected denoise|restore|inpaint|superres)");
}

double TaskConfig::resolved_sigma() const { return sigma ? *sigma : (task == Task::denoise ? 25.0 : 0.0); }

std::uint64_t TaskConfig::resolved_noise_seed() const { return noise_seed ? *noise_seed : seed; }

void TaskConfig::validate() const {
  if (input.empty()) throw ConfigError("input: path is required");
  if (output_dir.empty()) throw ConfigError("output_dir: path is required");
  if (!(resolved_sigma() >= 0.0)) throw ConfigError("sigma: must be >= 0");
  if (task == Task::restore && !(keep_probability > 0.0 && keep_probability <= 1.0)) {
    throw ConfigError("keep_probability: must be in (0, 1]");
  }
  if (task == Task::inpaint && !mask) throw ConfigError("inpaint: a mask path is required");
  if (task != Task::inpaint && mask) throw ConfigError("mask: only valid for inpaint");
  if (task == Task::superres && (factor < 2 || !spectral::is_power_of_two(factor))) {
    throw ConfigError("factor: must be a power of two >= 2");
  }
  if (bands < 1) throw ConfigError("bands: must be >= 1");
  loss.validate();
  optimizer.validate();
  generator.validate();
}

TaskConfig task_config_from(const KeyValues& kv) {
  TaskConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"task", [&](auto&, auto& v) { c.task = parse_task(v); }},
      {"input", [&](auto&, auto& v) { c.input = v; }},
      {"ground_truth", [&](auto&, auto& v) { c.ground_truth = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v); }},
      {"output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
      {"seed", [&](auto& k, auto& v) { c.seed = parse_uint(k, v); }},
      {"noise_seed", [&](auto& k, auto& v) { c.noise_seed = v.empty() ? std::nullopt : std::optional(parse_uint(k, v)); }},
      {"sigma", [&](auto& k, auto& v) { c.sigma = v.empty() ? std::nullopt : std::optional(parse_double(k, v)); }},
      {"keep_probability", [&](auto& k, auto& v) { c.keep_probability = parse_double(k, v); }},
      {"mask", [&](auto&, auto& v) { c.mask = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v); }},
      {"factor", [&](auto& k, auto& v) { c.factor = parse_uint(k, v); }},
      {"antialias", [&](auto& k, auto& v) { c.antialias = parse_bool(k, v); }},
      {"bands", [&](auto& k, auto& v) { c.bands = parse_uint(k, v); }},
      {"record_timing", [&](auto& k, auto& v) { c.record_timing = parse_bool(k, v); }},
      {"loss.kind", [&](auto&, auto& v) { c.loss.kind = objective::parse_loss_kind(v); }},
      {"loss.normalization", [&](auto&, auto& v) { c.loss.normalization = spectral::parse_normalization(v); }},
      {"loss.eps", [&](auto& k, auto& v) { c.loss.eps = parse_double(k, v); }},
      {"loss.band_weights", [&](auto& k, auto& v) { c.loss.band_weights = parse_double_list(k, v); }},
      {"generator.depth", [&](auto& k, auto& v) { c.generator.depth = parse_uint(k, v); }},
      {"generator.channels", [&](auto& k, auto& v) { c.generator.channels = parse_size_list(k, v); }},
      {"generator.skip_channels", [&](auto& k, auto& v) { c.generator.skip_channels = parse_size_list(k, v); }},
      {"generator.kernel_size", [&](auto& k, auto& v) { c.generator.kernel_size = parse_uint(k, v); }},
      {"generator.input_channels", [&](auto& k, auto& v) { c.generator.input_channels = parse_uint(k, v); }},
      {"generator.input_noise_std", [&](auto& k, auto& v) { c.generator.input_noise_std = parse_double(k, v); }},
      {"generator.leaky_slope", [&](auto& k, auto& v) { c.generator.leaky_slope = parse_double(k, v); }},
      {"generator.norm_eps", [&](auto& k, auto& v) { c.generator.norm_eps = parse_double(k, v); }},
      {"optimizer.kind", [&](auto&, auto& v) { c.optimizer.kind = optimize::parse_optimizer_kind(v); }},
      {"optimizer.lr", [&](auto& k, auto& v) { c.optimizer.lr = parse_double(k, v); }},
      {"optimizer.beta1", [&](auto& k, auto& v) { c.optimizer.beta1 = parse_double(k, v); }},
      {"optimizer.beta2", [&](auto& k, auto& v) { c.optimizer.beta2 = parse_double(k, v); }},
      {"optimizer.eps_adam", [&](auto& k, auto& v) { c.optimizer.eps_adam = parse_double(k, v); }},
      {"optimizer.iterations", [&](auto& k, auto& v) { c.optimizer.iterations = parse_uint(k, v); }},
      {"optimizer.log_every", [&](auto& k, auto& v) { c.optimizer.log_every = parse_uint(k, v); }},
      {"optimizer.divergence_factor", [&](auto& k, auto& v) { c.optimizer.divergence_factor = parse_double(k, v); }},
  };
  for (const auto& [key, value] : kv) {
    if (key.starts_with("hash.")) continue;
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second(key, value);
  }
  return c;
}

KeyValues to_key_values(const TaskConfig& c) {
  const auto num = [](std::size_t v) { return std::to_string(v); };
  KeyValues kv;
  kv["task"] = to_string(c.task);
  kv["input"] = c.input.string();
  kv["ground_truth"] = c.ground_truth ? c.ground_truth->string() : "";
  kv["output_dir"] = c.output_dir.string();
  kv["seed"] = std::to_string(c.seed);
  kv["noise_seed"] = std::to_string(c.resolved_noise_seed());
  kv["sigma"] = format_double(c.resolved_sigma());
  kv["keep_probability"] = format_double(c.keep_probability);
  kv["mask"] = c.mask ? c.mask->string() : "";
  kv["factor"] = num(c.factor);
  kv["antialias"] = c.antialias ? "true" : "false";
  kv["bands"] = num(c.bands);
  kv["record_timing"] = c.record_timing ? "true" : "false";
  kv["loss.kind"] = objective::to_string(c.loss.kind);
  kv["loss.normalization"] = spectral::to_string(c.loss.normalization);
  kv["loss.eps"] = format_double(c.loss.eps);
  kv["loss.band_weights"] = join(c.loss.band_weights, format_double);
  kv["generator.depth"] = num(c.generator.depth);
  kv["generator.channels"] = join(c.generator.channels, num);
  kv["generator.skip_channels"] = join(c.generator.skip_channels, num);
  kv["generator.kernel_size"] = num(c.generator.kernel_size);
  kv["generator.input_channels"] = num(c.generator.input_channels);
  kv["generator.input_noise_std"] = format_double(c.generator.input_noise_std);
  kv["generator.leaky_slope"] = format_double(c.generator.leaky_slope);
  kv["generator.norm_eps"] = format_double(c.generator.norm_eps);
  kv["optimizer.kind"] = optimize::to_string(c.optimizer.kind);
  kv["optimizer.lr"] = format_double(c.optimizer.lr);
  kv["optimizer.beta1"] = format_double(c.optimizer.beta1);
  kv["optimizer.beta2"] = format_double(c.optimizer.beta2);
  kv["optimizer.eps_adam"] = format_double(c.optimizer.eps_adam);
  kv["optimizer.iterations"] = num(c.optimizer.iterations);
  kv["optimizer.log_every"] = num(c.optimizer.log_every);
  kv["optimizer.divergence_factor"] = format_double(c.optimizer.divergence_factor);
  return kv;
}

}  // namespace spectralprior::io
