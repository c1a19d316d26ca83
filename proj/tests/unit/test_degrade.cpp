#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spectralprior/degrade.hpp"
#include "spectralprior/error.hpp"

using namespace spectralprior;
using degrade::DegradationOp;

namespace {

std::vector<DegradationOp> operators(Rng& rng) {
  const Shape s{3, 16, 8};
  Tensor region({16, 8});
  for (std::size_t i = 0; i < region.size(); ++i) region[i] = rng.bernoulli(0.3) ? 0.0 : 1.0;
  Tensor valid({1, 4, 2});
  valid[3] = 0.0;
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = i == 3 ? 0.0 : 1.0;
  Tensor full_valid({1, 16, 8});
  for (std::size_t i = 0; i < full_valid.size(); ++i) full_valid[i] = i % 8 < 6 ? 1.0 : 0.0;
  return {DegradationOp::identity(s),
          DegradationOp::bernoulli_mask(s, 0.5, 3),
          DegradationOp::region_mask(s, region),
          DegradationOp::downsample(s, 4, true),
          DegradationOp::downsample(s, 2, false),
          DegradationOp::identity(s).with_valid_region(full_valid),
          DegradationOp::downsample(s, 4, true).with_valid_region(valid)};
}

}  // namespace

TEST_CASE("adjoint identity for every operator") {
  Rng rng(1);
  for (const auto& op : operators(rng)) {
    CAPTURE(degrade::to_string(op.kind()));
    for (int probe = 0; probe < 20; ++probe) {
      const auto x = oracle::normal_tensor(op.in_shape(), rng);
      const auto y = oracle::normal_tensor(op.out_shape(), rng);
      const double lhs = oracle::dot(op.apply(x), y);
      const double rhs = oracle::dot(x, op.adjoint(y));
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), std::abs(rhs)));
    }
  }
}

TEST_CASE("mask draws are shared by channels and follow the keep probability") {
  const auto op = DegradationOp::bernoulli_mask({3, 64, 64}, 0.3, 9);
  double kept = 0.0;
  for (double v : op.mask().storage()) kept += v;
  CHECK(kept / 4096 == doctest::Approx(0.3).epsilon(0.1));
  Rng rng(2);
  const auto x = oracle::random_tensor({3, 64, 64}, rng, 0.1, 1.0);
  const auto y = op.apply(x);
  for (std::size_t i = 0; i < 4096; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK((y[c * 4096 + i] == 0.0) == (op.mask()[i] == 0.0));
  CHECK(DegradationOp::bernoulli_mask({1, 8, 8}, 0.5, 4).mask() == DegradationOp::bernoulli_mask({1, 8, 8}, 0.5, 4).mask());
}

TEST_CASE("downsampling values") {
  Tensor x({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(DegradationOp::downsample(x.shape(), 2, true).apply(x).storage() == std::vector<double>{3.5, 5.5});
  CHECK(DegradationOp::downsample(x.shape(), 2, false).apply(x).storage() == std::vector<double>{1, 3});
  CHECK(DegradationOp::downsample({1, 8, 8}, 4).out_shape() == Shape{1, 2, 2});
}

TEST_CASE("corruption keeps unobserved measurements at zero") {
  Rng rng(3);
  const auto clean = oracle::random_tensor({2, 32, 32}, rng, 0.0, 1.0);
  const auto op = DegradationOp::bernoulli_mask(clean.shape(), 0.5, 1);
  const auto obs = degrade::corrupt(clean, op, degrade::NoiseModel::gaussian(0.1, 5));
  for (std::size_t i = 0; i < obs.y.size(); ++i) {
    if (op.mask()[i % 1024] == 0.0) CHECK(obs.y[i] == 0.0);
    CHECK(obs.y[i] == doctest::Approx(op.apply(clean)[i] + (*obs.noise)[i]));
  }
  const auto again = degrade::corrupt(clean, op, degrade::NoiseModel::gaussian(0.1, 5));
  CHECK(again.y == obs.y);
}

TEST_CASE("noise statistics") {
  const auto eta = degrade::NoiseModel::gaussian(0.2, 8).sample({1, 128, 128});
  double mean = 0.0, sq = 0.0;
  for (double v : eta.storage()) {
    mean += v;
    sq += v * v;
  }
  mean /= eta.size();
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::sqrt(sq / eta.size()) == doctest::Approx(0.2).epsilon(0.02));
  CHECK(degrade::NoiseModel::none().sample({1, 4, 4}) == Tensor({1, 4, 4}));
  CHECK_THROWS_AS(degrade::NoiseModel::gaussian(-1.0, 1), ConfigError);
}

TEST_CASE("operator preconditions") {
  CHECK_THROWS_AS(DegradationOp::identity({8, 8}), ShapeError);
  CHECK_THROWS_AS(DegradationOp::downsample({1, 6, 8}, 4), ShapeError);
  CHECK_THROWS_AS(DegradationOp::bernoulli_mask({1, 4, 4}, 1.5, 1), ConfigError);
  CHECK_THROWS_AS(DegradationOp::region_mask({1, 4, 4}, Tensor({1, 4, 5})), ShapeError);
  const auto op = DegradationOp::downsample({1, 8, 8}, 2);
  CHECK_THROWS_AS(op.apply(Tensor({1, 4, 4})), ShapeError);
  CHECK_THROWS_AS(op.adjoint(Tensor({1, 8, 8})), ShapeError);
  CHECK_THROWS_AS(op.with_valid_region(Tensor({1, 8, 8})), ShapeError);
}
