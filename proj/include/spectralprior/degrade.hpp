#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spectralprior/tensor.hpp"

namespace spectralprior::degrade {

enum class OpKind { identity, bernoulli_mask, region_mask, downsample };

std::string to_string(OpKind kind);

/// Linear forward operator A with its adjoint. Masks act on the full image
/// grid (dropped pixels become zero) so measurements stay rectangular.
/// An optional validity mask V on the measurement grid (padding) turns A into
/// V * A; the adjoint is then A^T V.
class DegradationOp {
 public:
  static DegradationOp identity(Shape shape);
  /// Keep each pixel with probability `keep_probability`; the same draw is
  /// shared by all channels of a pixel.
  static DegradationOp bernoulli_mask(Shape shape, double keep_probability, std::uint64_t seed);
  /// `mask` is [H,W] or [1,H,W]; nonzero entries are observed.
  static DegradationOp region_mask(Shape shape, const Tensor& mask);
  /// Average (antialias) or pick every factor-th pixel (no antialias).
  static DegradationOp downsample(Shape shape, std::size_t factor, bool antialias = true);

  OpKind kind() const noexcept { return kind_; }
  const Shape& in_shape() const noexcept { return in_shape_; }
  const Shape& out_shape() const noexcept { return out_shape_; }
  double keep_probability() const noexcept { return keep_probability_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t factor() const noexcept { return factor_; }
  bool antialias() const noexcept { return antialias_; }
  /// Per-pixel 0/1 mask [1,H,W] for mask kinds; empty otherwise.
  const Tensor& mask() const noexcept { return mask_; }

  /// Restrict measurements to a region (typically the unpadded part of the
  /// grid). `valid` is [1,H',W'] over the measurement grid.
  DegradationOp with_valid_region(const Tensor& valid) const;
  const std::optional<Tensor>& valid_region() const noexcept { return valid_; }

  Tensor apply(const Tensor& x) const;
  Tensor adjoint(const Tensor& y) const;
  /// Differentiable apply; the backward rule is the adjoint.
  Var apply(Var x) const;

 private:
  DegradationOp() = default;
  void check_in(const Shape& s) const;
  void check_out(const Shape& s) const;
  Tensor apply_core(const Tensor& x) const;
  Tensor adjoint_core(const Tensor& y) const;

  OpKind kind_ = OpKind::identity;
  Shape in_shape_, out_shape_;
  double keep_probability_ = 1.0;
  std::uint64_t seed_ = 0;
  std::size_t factor_ = 1;
  bool antialias_ = true;
  Tensor mask_;
  std::optional<Tensor> valid_;
};

enum class NoiseKind { none, gaussian };

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma, std::uint64_t seed);

  /// One realization on the given measurement shape.
  Tensor sample(const Shape& shape) const;
};

struct Observation {
  Tensor y;
  DegradationOp op;
  /// Clean image; used for metrics only, never by a loss.
  std::optional<Tensor> ground_truth;
  /// The noise realization eta = y - A x, when known.
  std::optional<Tensor> noise;
};

/// y = A x + eta. For mask kinds the noise is restricted to observed pixels so
/// dropped pixels stay exactly zero.
Observation corrupt(const Tensor& x_clean, const DegradationOp& op, const NoiseModel& noise);

}  // namespace spectralprior::degrade
