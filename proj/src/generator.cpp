#include "spectralprior/generator.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spectralprior/error.hpp"
#include "spectralprior/ops.hpp"
#include "spectralprior/rng.hpp"
#include "spectralprior/spectral.hpp"

namespace spectralprior::generator {
namespace {

enum class Init { he_uniform, ones, zeros };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
  std::size_t fan_in = 0;
};

void add_conv(std::vector<ParamSpec>& out, const std::string& name, std::size_t c_out, std::size_t c_in,
              std::size_t k) {
  out.push_back({name + ".weight", {c_out, c_in, k, k}, Init::he_uniform, c_in * k * k});
}

void add_norm(std::vector<ParamSpec>& out, const std::string& name, std::size_t c) {
  out.push_back({name + ".scale", {c}, Init::ones});
  out.push_back({name + ".shift", {c}, Init::zeros});
}

std::size_t level_input_channels(const GeneratorConfig& c, std::size_t level) {
  return level == 0 ? c.input_channels : c.channels[level - 1];
}

std::size_t decoder_input_channels(const GeneratorConfig& c, std::size_t level) {
  return level + 1 == c.depth ? c.channels[c.depth - 1] : c.channels[level + 1];
}

// Order in which forward() consumes parameters.
std::vector<ParamSpec> layout(const GeneratorConfig& c) {
  std::vector<ParamSpec> out;
  const std::size_t k = c.kernel_size;
  for (std::size_t i = 0; i < c.depth; ++i) {
    const std::string lvl = std::to_string(i);
    const std::size_t cin = level_input_channels(c, i);
    if (c.skip_channels[i] > 0) {
      add_conv(out, "skip" + lvl + ".conv", c.skip_channels[i], cin, 1);
      add_norm(out, "skip" + lvl + ".norm", c.skip_channels[i]);
    }
    add_conv(out, "enc" + lvl + ".conv1", c.channels[i], cin, k);
    add_norm(out, "enc" + lvl + ".norm1", c.channels[i]);
    add_conv(out, "enc" + lvl + ".conv2", c.channels[i], c.channels[i], k);
    add_norm(out, "enc" + lvl + ".norm2", c.channels[i]);
  }
  for (std::size_t i = c.depth; i-- > 0;) {
    const std::string lvl = std::to_string(i);
    add_conv(out, "dec" + lvl + ".conv1", c.channels[i], decoder_input_channels(c, i) + c.skip_channels[i], k);
    add_norm(out, "dec" + lvl + ".norm1", c.channels[i]);
    add_conv(out, "dec" + lvl + ".conv2", c.channels[i], c.channels[i], 1);
    add_norm(out, "dec" + lvl + ".norm2", c.channels[i]);
  }
  add_conv(out, "out.conv", c.output_channels, c.channels[0], 1);
  out.push_back({"out.bias", {c.output_channels}, Init::zeros});
  return out;
}

class ParamCursor {
 public:
  ParamCursor(const std::vector<Var>& params, const std::vector<NamedParam>& named)
      : params_(params), named_(named) {}

  Var next(const std::string& expected) {
    if (pos_ >= params_.size() || named_[pos_].name != expected) {
      throw ConfigError("generator: parameter layout mismatch at '" + expected + "'");
    }
    return params_[pos_++];
  }

 private:
  const std::vector<Var>& params_;
  const std::vector<NamedParam>& named_;
  std::size_t pos_ = 0;
};

}  // namespace

void GeneratorConfig::validate() const {
  if (depth < 1) throw ConfigError("generator: depth must be >= 1");
  if (channels.size() != depth) {
    throw ConfigError("generator: channels has " + std::to_string(channels.size()) + " entries, depth is " +
                      std::to_string(depth));
  }
  if (skip_channels.size() != depth) {
    throw ConfigError("generator: skip_channels has " + std::to_string(skip_channels.size()) +
                      " entries, depth is " + std::to_string(depth));
  }
  for (auto c : channels) {
    if (c == 0) throw ConfigError("generator: channel counts must be positive");
  }
  if (kernel_size % 2 == 0) throw ConfigError("generator: kernel_size must be odd");
  if (input_channels == 0) throw ConfigError("generator: input_channels must be positive");
  if (output_channels == 0) throw ConfigError("generator: output_channels must be positive");
  if (!(input_noise_std > 0.0)) throw ConfigError("generator: input_noise_std must be > 0");
  if (!(norm_eps > 0.0)) throw ConfigError("generator: norm_eps must be > 0");
}

std::size_t GeneratorState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

std::size_t parameter_count(const GeneratorConfig& config) {
  config.validate();
  const std::size_t k2 = config.kernel_size * config.kernel_size;
  std::size_t n = 0;
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::size_t cin = level_input_channels(config, i);
    const std::size_t c = config.channels[i], s = config.skip_channels[i];
    n += s * cin + 2 * s;
    n += c * cin * k2 + 2 * c + c * c * k2 + 2 * c;
    n += c * (decoder_input_channels(config, i) + s) * k2 + 2 * c + c * c + 2 * c;
  }
  n += config.output_channels * config.channels[0] + config.output_channels;
  return n;
}

GeneratorState init(const GeneratorConfig& config, std::uint64_t seed, std::size_t out_h, std::size_t out_w) {
  config.validate();
  const std::size_t min_side = std::size_t{1} << config.depth;
  if (!spectral::is_power_of_two(out_h) || !spectral::is_power_of_two(out_w)) {
    throw ConfigError("generator: output size " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                      " must be powers of two");
  }
  if (out_h < min_side || out_w < min_side) {
    throw ConfigError("generator: output size " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                      " is not divisible by 2^depth = " + std::to_string(min_side));
  }

  GeneratorState state;
  state.config = config;
  state.seed = seed;
  Rng param_rng(Rng::derive(seed, 1));
  for (auto& spec : layout(config)) {
    Tensor t(spec.shape);
    switch (spec.init) {
      case Init::he_uniform: {
        const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
        for (auto& v : t.data()) v = param_rng.uniform(-bound, bound);
        break;
      }
      case Init::ones:
        for (auto& v : t.data()) v = 1.0;
        break;
      case Init::zeros:
        break;
    }
    state.params.push_back({std::move(spec.name), std::move(t)});
  }
  Rng z_rng(Rng::derive(seed, 2));
  state.z = Tensor(Shape{config.input_channels, out_h, out_w});
  for (auto& v : state.z.data()) v = z_rng.uniform(0.0, config.input_noise_std);
  return state;
}

ForwardResult forward(const GeneratorState& state, Tape& tape) {
  const GeneratorConfig& c = state.config;
  ForwardResult result;
  result.params.reserve(state.params.size());
  for (const auto& p : state.params) result.params.push_back(tape.leaf(p.value, true));
  ParamCursor cur(result.params, state.params);

  const std::size_t k = c.kernel_size;
  auto block = [&](Var x, const std::string& conv, const std::string& norm, std::size_t stride, std::size_t ksize) {
    Var w = cur.next(conv + ".weight");
    Var h = ops::conv2d(x, w, stride, ops::same_padding(ksize));
    h = ops::instance_norm(h, c.norm_eps);
    Var scale = cur.next(norm + ".scale");
    Var shift = cur.next(norm + ".shift");
    h = ops::channel_affine(h, scale, shift);
    return ops::leaky_relu(h, c.leaky_slope);
  };

  std::vector<Var> skips(c.depth);
  Var h = tape.constant(state.z);
  for (std::size_t i = 0; i < c.depth; ++i) {
    const std::string lvl = std::to_string(i);
    if (c.skip_channels[i] > 0) skips[i] = block(h, "skip" + lvl + ".conv", "skip" + lvl + ".norm", 1, 1);
    h = block(h, "enc" + lvl + ".conv1", "enc" + lvl + ".norm1", 2, k);
    h = block(h, "enc" + lvl + ".conv2", "enc" + lvl + ".norm2", 1, k);
  }
  for (std::size_t i = c.depth; i-- > 0;) {
    const std::string lvl = std::to_string(i);
    h = ops::upsample_nearest(h, 2);
    if (c.skip_channels[i] > 0) h = ops::concat_channels(h, skips[i]);
    h = block(h, "dec" + lvl + ".conv1", "dec" + lvl + ".norm1", 1, k);
    h = block(h, "dec" + lvl + ".conv2", "dec" + lvl + ".norm2", 1, 1);
  }
  Var w = cur.next("out.conv.weight");
  h = ops::conv2d(h, w, 1, 0);
  h = ops::add_channel_bias(h, cur.next("out.bias"));
  result.output = ops::sigmoid(h);
  return result;
}

Tensor evaluate(const GeneratorState& state) {
  Tape tape;
  return forward(state, tape).output.value();
}

std::uint64_t hash(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : t.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

constexpr const char* kMagic = "spectralprior-checkpoint 1";

void write_entry_header(std::ostream& os, const std::string& name, const Shape& shape) {
  os << name << ' ' << shape.size();
  for (auto d : shape) os << ' ' << d;
  os << '\n';
}

void write_payload(std::ostream& os, const Tensor& t) {
  for (double v : t.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    os.write(bytes, 8);
  }
}

void read_payload(std::istream& is, Tensor& t, const std::filesystem::path& path) {
  for (auto& v : t.data()) {
    unsigned char bytes[8];
    const auto offset = static_cast<std::size_t>(is.tellg());
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("checkpoint " + path.string() + ": truncated payload", offset);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
}

}  // namespace

void save_checkpoint(const GeneratorState& state, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kMagic << '\n' << "entries " << state.params.size() + 1 << '\n';
  for (const auto& p : state.params) write_entry_header(os, p.name, p.value.shape());
  write_entry_header(os, "z", state.z.shape());
  os << "payload\n";
  for (const auto& p : state.params) write_payload(os, p.value);
  write_payload(os, state.z);
  if (!os) throw IoError("write failed for " + path.string());
}

void load_checkpoint(GeneratorState& state, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != kMagic) throw IoError("checkpoint " + path.string() + ": bad magic line", 0);
  std::size_t offset = static_cast<std::size_t>(is.tellg());
  std::getline(is, line);
  std::istringstream head(line);
  std::string word;
  std::size_t entries = 0;
  if (!(head >> word >> entries) || word != "entries") throw IoError("checkpoint: malformed entry count", offset);
  if (entries != state.params.size() + 1) {
    throw IoError("checkpoint: " + std::to_string(entries) + " entries, state expects " +
                      std::to_string(state.params.size() + 1),
                  offset);
  }
  for (std::size_t i = 0; i < entries; ++i) {
    offset = static_cast<std::size_t>(is.tellg());
    std::getline(is, line);
    std::istringstream es(line);
    std::string name;
    std::size_t rank = 0;
    if (!(es >> name >> rank)) throw IoError("checkpoint: malformed entry header", offset);
    Shape shape(rank);
    for (auto& d : shape) {
      if (!(es >> d)) throw IoError("checkpoint: malformed shape for " + name, offset);
    }
    const bool is_z = i + 1 == entries;
    const std::string& expected = is_z ? std::string("z") : state.params[i].name;
    const Shape& expected_shape = is_z ? state.z.shape() : state.params[i].value.shape();
    if (name != expected || shape != expected_shape) {
      throw IoError("checkpoint: entry '" + name + "' " + to_string(shape) + " does not match '" + expected + "' " +
                        to_string(expected_shape),
                    offset);
    }
  }
  offset = static_cast<std::size_t>(is.tellg());
  std::getline(is, line);
  if (line != "payload") throw IoError("checkpoint: missing payload marker", offset);
  for (auto& p : state.params) read_payload(is, p.value, path);
  read_payload(is, state.z, path);
}

}  // namespace spectralprior::generator
