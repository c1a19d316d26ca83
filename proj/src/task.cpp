#include "spectralprior/task.hpp"

#include <cstdio>

#include "spectralprior/error.hpp"
#include "spectralprior/image.hpp"
#include "spectralprior/rng.hpp"

namespace spectralprior::io {
namespace {

Tensor load_tensor(const std::filesystem::path& path, const std::string& role, KeyValues& hashes) {
  const auto bytes = read_file(path);
  hashes["hash." + role] = hex64(fnv1a(bytes));
  try {
    return decode_image(bytes).to_tensor();
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what(), e.offset());
  }
}

Tensor zero_pad_plane(const Tensor& m, std::size_t h, std::size_t w) {
  Tensor out({1, h, w});
  const std::size_t mh = m.dim(1), mw = m.dim(2);
  for (std::size_t y = 0; y < mh; ++y)
    for (std::size_t x = 0; x < mw; ++x) out[y * w + x] = m[y * mw + x];
  return out;
}

struct Scratch {
  std::optional<degrade::Observation> obs;
  std::optional<Tensor> clean;
  std::size_t out_height = 0;
  std::size_t out_width = 0;
  bool padded = false;
  KeyValues hashes;
};

}  // namespace

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

PreparedTask prepare(const TaskConfig& config) {
  config.validate();
  Scratch p;
  const Tensor input = load_tensor(config.input, "input", p.hashes);
  const std::size_t C = input.dim(0);
  std::optional<Tensor> truth;
  if (config.ground_truth) truth = load_tensor(*config.ground_truth, "ground_truth", p.hashes);

  const double sigma = config.resolved_sigma() / 255.0;
  const std::uint64_t noise_seed = config.resolved_noise_seed();
  const auto noise = sigma > 0.0 ? degrade::NoiseModel::gaussian(sigma, noise_seed) : degrade::NoiseModel::none();

  std::optional<Tensor> metric_mask;
  if (config.task == Task::superres) {
    const std::size_t f = config.factor;
    const auto lr = pad_to_power_of_two(input);
    p.padded = lr.image.shape() != input.shape();
    p.out_height = input.dim(1) * f;
    p.out_width = input.dim(2) * f;
    const Shape hr{C, lr.image.dim(1) * f, lr.image.dim(2) * f};
    auto op = degrade::DegradationOp::downsample(hr, f, config.antialias);
    if (p.padded) op = op.with_valid_region(lr.mask);
    if (truth) {
      if (truth->shape() != Shape{C, p.out_height, p.out_width}) {
        throw ShapeError("superres: ground truth " + spectralprior::to_string(truth->shape()) + " is not " +
                             std::to_string(f) + "x the input " + spectralprior::to_string(input.shape()),
                         "H/W");
      }
      const auto gt = pad_to_power_of_two(*truth);
      p.clean = gt.image;
      if (p.padded) metric_mask = gt.mask;
    }
    Tensor y = lr.image;
    std::optional<Tensor> eta;
    if (noise.kind != degrade::NoiseKind::none) {
      eta = noise.sample(y.shape());
      if (p.padded) {
        const std::size_t n = y.dim(1) * y.dim(2);
        for (std::size_t i = 0; i < eta->size(); ++i) (*eta)[i] *= lr.mask[i % n];
      }
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += (*eta)[i];
    }
    p.obs.emplace(degrade::Observation{std::move(y), std::move(op), p.clean, std::move(eta)});
  } else {
    const Tensor& clean = truth ? *truth : input;
    if (clean.shape() != input.shape()) {
      throw ShapeError("ground truth " + spectralprior::to_string(clean.shape()) + " does not match input " +
                           spectralprior::to_string(input.shape()),
                       "all axes");
    }
    const auto padded = pad_to_power_of_two(input);
    p.padded = padded.image.shape() != input.shape();
    p.out_height = input.dim(1);
    p.out_width = input.dim(2);
    const Shape shape = padded.image.shape();
    std::optional<degrade::DegradationOp> op;
    switch (config.task) {
      case Task::denoise: op = degrade::DegradationOp::identity(shape); break;
      case Task::restore:
        op = degrade::DegradationOp::bernoulli_mask(shape, config.keep_probability, Rng::derive(noise_seed, 0x6d61736b));
        break;
      case Task::inpaint: {
        const auto bytes = read_file(*config.mask);
        p.hashes["hash.mask"] = hex64(fnv1a(bytes));
        const Tensor m = load_mask(*config.mask);
        if (m.dim(1) != input.dim(1) || m.dim(2) != input.dim(2)) {
          throw ShapeError("inpaint: mask is " + std::to_string(m.dim(1)) + "x" + std::to_string(m.dim(2)) +
                               ", image is " + std::to_string(input.dim(1)) + "x" + std::to_string(input.dim(2)),
                           "H/W");
        }
        op = degrade::DegradationOp::region_mask(shape, zero_pad_plane(m, shape[1], shape[2]));
        break;
      }
      case Task::superres: break;
    }
    if (p.padded) {
      op = op->with_valid_region(padded.mask);
      metric_mask = padded.mask;
    }
    p.clean = truth ? pad_to_power_of_two(*truth).image : padded.image;
    p.obs.emplace(degrade::corrupt(padded.image, *op, noise));
    p.obs->ground_truth = p.clean;
  }

  optimize::RunConfig run;
  run.generator = config.generator;
  run.generator.output_channels = C;
  run.loss = config.loss;
  run.optimizer = config.optimizer;
  run.optimizer.seed = config.seed;
  run.bands = config.bands;
  run.metric_mask = metric_mask;
  return PreparedTask{std::move(*p.obs), std::move(run), std::move(p.clean), p.out_height, p.out_width, p.padded,
                      std::move(p.hashes)};
}

KeyValues manifest(const TaskConfig& config, const PreparedTask& prepared) {
  auto kv = to_key_values(config);
  for (const auto& [k, v] : prepared.hashes) kv[k] = v;
  return kv;
}

void verify_hashes(const KeyValues& manifest, const PreparedTask& prepared) {
  for (const auto& [k, v] : manifest) {
    if (!k.starts_with("hash.")) continue;
    const auto it = prepared.hashes.find(k);
    if (it == prepared.hashes.end() || it->second != v) {
      throw ConfigError(k + ": input file differs from the one recorded in the manifest");
    }
  }
}

}  // namespace spectralprior::io
