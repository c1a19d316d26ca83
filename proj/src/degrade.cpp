#include "spectralprior/degrade.hpp"

#include "spectralprior/error.hpp"
#include "spectralprior/rng.hpp"

namespace spectralprior::degrade {
namespace {

void require_image_shape(const Shape& s, const char* op) {
  if (s.size() != 3) throw ShapeError(std::string(op) + ": expected [C,H,W], got " + spectralprior::to_string(s), "rank");
}

// Multiply [C,H,W] by a [1,H,W] mask, broadcasting over channels.
Tensor mask_channels(const Tensor& x, const Tensor& mask) {
  Tensor out(x.shape());
  const std::size_t C = x.dim(0), n = x.dim(1) * x.dim(2);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < n; ++i) out[c * n + i] = x[c * n + i] * mask[i];
  return out;
}

Tensor as_plane_mask(const Tensor& m, std::size_t h, std::size_t w, const char* op) {
  if (!(m.rank() == 2 || (m.rank() == 3 && m.dim(0) == 1)) || m.dim(m.rank() - 2) != h || m.dim(m.rank() - 1) != w) {
    throw ShapeError(std::string(op) + ": mask " + spectralprior::to_string(m.shape()) + " does not cover a " + std::to_string(h) +
                         "x" + std::to_string(w) + " grid",
                     "H/W");
  }
  Tensor out(Shape{1, h, w});
  for (std::size_t i = 0; i < h * w; ++i) out[i] = m[i] != 0.0 ? 1.0 : 0.0;
  return out;
}

}  // namespace

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::identity: return "identity";
    case OpKind::bernoulli_mask: return "bernoulli_mask";
    case OpKind::region_mask: return "region_mask";
    case OpKind::downsample: return "downsample";
  }
  return "unknown";
}

DegradationOp DegradationOp::identity(Shape shape) {
  require_image_shape(shape, "identity");
  DegradationOp op;
  op.kind_ = OpKind::identity;
  op.in_shape_ = shape;
  op.out_shape_ = std::move(shape);
  return op;
}

DegradationOp DegradationOp::bernoulli_mask(Shape shape, double keep_probability, std::uint64_t seed) {
  require_image_shape(shape, "bernoulli_mask");
  if (!(keep_probability >= 0.0 && keep_probability <= 1.0)) {
    throw ConfigError("bernoulli_mask: keep probability must be in [0, 1]");
  }
  DegradationOp op;
  op.kind_ = OpKind::bernoulli_mask;
  op.keep_probability_ = keep_probability;
  op.seed_ = seed;
  op.in_shape_ = shape;
  op.out_shape_ = shape;
  op.mask_ = Tensor(Shape{1, shape[1], shape[2]});
  Rng rng(seed);
  for (auto& v : op.mask_.data()) v = rng.bernoulli(keep_probability) ? 1.0 : 0.0;
  return op;
}

DegradationOp DegradationOp::region_mask(Shape shape, const Tensor& mask) {
  require_image_shape(shape, "region_mask");
  DegradationOp op;
  op.kind_ = OpKind::region_mask;
  op.mask_ = as_plane_mask(mask, shape[1], shape[2], "region_mask");
  op.in_shape_ = shape;
  op.out_shape_ = std::move(shape);
  return op;
}

DegradationOp DegradationOp::downsample(Shape shape, std::size_t factor, bool antialias) {
  require_image_shape(shape, "downsample");
  if (factor == 0) throw ConfigError("downsample: factor must be >= 1");
  if (shape[1] % factor != 0) throw ShapeError("downsample: height not divisible by factor", "H");
  if (shape[2] % factor != 0) throw ShapeError("downsample: width not divisible by factor", "W");
  DegradationOp op;
  op.kind_ = OpKind::downsample;
  op.factor_ = factor;
  op.antialias_ = antialias;
  op.in_shape_ = shape;
  op.out_shape_ = {shape[0], shape[1] / factor, shape[2] / factor};
  return op;
}

DegradationOp DegradationOp::with_valid_region(const Tensor& valid) const {
  DegradationOp op = *this;
  op.valid_ = as_plane_mask(valid, out_shape_[1], out_shape_[2], "with_valid_region");
  return op;
}

void DegradationOp::check_in(const Shape& s) const {
  if (s != in_shape_) {
    throw ShapeError(to_string(kind_) + ": input " + spectralprior::to_string(s) + " != operator domain " +
                         spectralprior::to_string(in_shape_),
                     "in_shape");
  }
}

void DegradationOp::check_out(const Shape& s) const {
  if (s != out_shape_) {
    throw ShapeError(to_string(kind_) + ": measurement " + spectralprior::to_string(s) + " != operator range " +
                         spectralprior::to_string(out_shape_),
                     "out_shape");
  }
}

Tensor DegradationOp::apply_core(const Tensor& x) const {
  switch (kind_) {
    case OpKind::identity:
      return x;
    case OpKind::bernoulli_mask:
    case OpKind::region_mask:
      return mask_channels(x, mask_);
    case OpKind::downsample: {
      Tensor out(out_shape_);
      const std::size_t f = factor_;
      const double inv = 1.0 / static_cast<double>(f * f);
      for (std::size_t c = 0; c < out_shape_[0]; ++c) {
        for (std::size_t y = 0; y < out_shape_[1]; ++y) {
          for (std::size_t xx = 0; xx < out_shape_[2]; ++xx) {
            if (!antialias_) {
              out.at(c, y, xx) = x.at(c, y * f, xx * f);
              continue;
            }
            double acc = 0.0;
            for (std::size_t dy = 0; dy < f; ++dy)
              for (std::size_t dx = 0; dx < f; ++dx) acc += x.at(c, y * f + dy, xx * f + dx);
            out.at(c, y, xx) = acc * inv;
          }
        }
      }
      return out;
    }
  }
  return x;
}

Tensor DegradationOp::adjoint_core(const Tensor& y) const {
  switch (kind_) {
    case OpKind::identity:
      return y;
    case OpKind::bernoulli_mask:
    case OpKind::region_mask:
      return mask_channels(y, mask_);
    case OpKind::downsample: {
      Tensor out(in_shape_);
      const std::size_t f = factor_;
      const double inv = 1.0 / static_cast<double>(f * f);
      for (std::size_t c = 0; c < out_shape_[0]; ++c) {
        for (std::size_t yy = 0; yy < out_shape_[1]; ++yy) {
          for (std::size_t xx = 0; xx < out_shape_[2]; ++xx) {
            const double v = y.at(c, yy, xx);
            if (!antialias_) {
              out.at(c, yy * f, xx * f) = v;
              continue;
            }
            for (std::size_t dy = 0; dy < f; ++dy)
              for (std::size_t dx = 0; dx < f; ++dx) out.at(c, yy * f + dy, xx * f + dx) = v * inv;
          }
        }
      }
      return out;
    }
  }
  return y;
}

Tensor DegradationOp::apply(const Tensor& x) const {
  check_in(x.shape());
  Tensor out = apply_core(x);
  return valid_ ? mask_channels(out, *valid_) : out;
}

Tensor DegradationOp::adjoint(const Tensor& y) const {
  check_out(y.shape());
  return adjoint_core(valid_ ? mask_channels(y, *valid_) : y);
}

Var DegradationOp::apply(Var x) const {
  Tensor out = apply(x.value());
  // The op is copied into the closure so the tape does not depend on its lifetime.
  return x.tape().record(std::move(out), {x}, [op = *this](const BackwardContext& ctx) {
    const Tensor g = op.adjoint(Tensor(op.out_shape(), std::vector<double>(ctx.grad_out.begin(), ctx.grad_out.end())));
    auto gi = ctx.grad_in[0];
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
  }, "degrade");
}

NoiseModel NoiseModel::gaussian(double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian noise: sigma must be >= 0");
  return {NoiseKind::gaussian, sigma, seed};
}

Tensor NoiseModel::sample(const Shape& shape) const {
  Tensor out(shape);
  if (kind == NoiseKind::none || sigma == 0.0) return out;
  Rng rng(seed);
  for (auto& v : out.data()) v = sigma * rng.normal();
  return out;
}

Observation corrupt(const Tensor& x_clean, const DegradationOp& op, const NoiseModel& noise) {
  const Tensor ax = op.apply(x_clean);
  Tensor eta = noise.sample(op.out_shape());
  if (!op.mask().storage().empty()) eta = mask_channels(eta, op.mask());
  if (op.valid_region()) eta = mask_channels(eta, *op.valid_region());
  Tensor y(ax.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ax[i] + eta[i];
  return Observation{std::move(y), op, x_clean, std::move(eta)};
}

}  // namespace spectralprior::degrade
