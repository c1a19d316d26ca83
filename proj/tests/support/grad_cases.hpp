#pragma once

#include <vector>

#include "oracles.hpp"
#include "spectralprior/degrade.hpp"
#include "spectralprior/objective.hpp"
#include "spectralprior/ops.hpp"
#include "spectralprior/spectral.hpp"

namespace oracle {

// One case per differentiable primitive, plus every loss.
inline std::vector<GradCheck> gradient_cases(std::uint64_t seed) {
  namespace ops = spectralprior::ops;
  namespace sp = spectralprior::spectral;
  namespace dg = spectralprior::degrade;
  namespace obj = spectralprior::objective;
  Rng rng(seed);
  const Shape img{2, 8, 8};
  auto r = [&](const Shape& s, double lo = -1.0, double hi = 1.0) { return random_tensor(s, rng, lo, hi); };
  using V = const std::vector<Var>&;
  std::vector<GradCheck> cases;
  cases.push_back({"add", {r(img), r(img)}, [](Tape&, V v) { return ops::add(v[0], v[1]); }});
  cases.push_back({"sub", {r(img), r(img)}, [](Tape&, V v) { return ops::sub(v[0], v[1]); }});
  cases.push_back({"mul", {r(img), r(img)}, [](Tape&, V v) { return ops::mul(v[0], v[1]); }});
  cases.push_back({"scale", {r(img)}, [](Tape&, V v) { return ops::scale(v[0], -1.7); }});
  cases.push_back({"add_scalar", {r(img)}, [](Tape&, V v) { return ops::add_scalar(v[0], 0.3); }});
  cases.push_back({"square", {r(img)}, [](Tape&, V v) { return ops::square(v[0]); }});
  cases.push_back({"sqrt_eps", {r(img, 0.05, 1.0)}, [](Tape&, V v) { return ops::sqrt_eps(v[0], 1e-3); }});
  cases.push_back({"log", {r(img, 0.2, 2.0)}, [](Tape&, V v) { return ops::log(v[0]); }});
  cases.push_back({"sum", {r(img)}, [](Tape&, V v) { return ops::sum(v[0]); }});
  cases.push_back({"sum_squares", {r(img)}, [](Tape&, V v) { return ops::sum_squares(v[0]); }});
  cases.push_back({"leaky_relu", {r(img)}, [](Tape&, V v) { return ops::leaky_relu(v[0], 0.2); }});
  cases.push_back({"sigmoid", {r(img, -3.0, 3.0)}, [](Tape&, V v) { return ops::sigmoid(v[0]); }});
  cases.push_back({"instance_norm", {r({3, 6, 5})}, [](Tape&, V v) { return ops::instance_norm(v[0], 1e-5); }});
  cases.push_back({"channel_affine", {r({3, 4, 5}), r({3}), r({3})},
                   [](Tape&, V v) { return ops::channel_affine(v[0], v[1], v[2]); }});
  cases.push_back({"add_channel_bias", {r({3, 4, 5}), r({3})},
                   [](Tape&, V v) { return ops::add_channel_bias(v[0], v[1]); }});
  cases.push_back({"conv2d_k3_s1", {r({3, 7, 6}), r({4, 3, 3, 3})},
                   [](Tape&, V v) { return ops::conv2d(v[0], v[1], 1, 1); }});
  cases.push_back({"conv2d_k3_s2", {r({3, 8, 8}), r({5, 3, 3, 3})},
                   [](Tape&, V v) { return ops::conv2d(v[0], v[1], 2, 1); }});
  cases.push_back({"conv2d_k1", {r({6, 5, 4}), r({3, 6, 1, 1})},
                   [](Tape&, V v) { return ops::conv2d(v[0], v[1], 1, 0); }});
  cases.push_back({"conv2d_k5_s1", {r({2, 9, 9}), r({3, 2, 5, 5})},
                   [](Tape&, V v) { return ops::conv2d(v[0], v[1], 1, 2); }});
  cases.push_back({"upsample_nearest", {r({2, 3, 4})}, [](Tape&, V v) { return ops::upsample_nearest(v[0], 2); }});
  cases.push_back({"concat_channels", {r({2, 4, 4}), r({3, 4, 4})},
                   [](Tape&, V v) { return ops::concat_channels(v[0], v[1]); }});
  cases.push_back({"complex_abs2", {r({2, 2, 4, 4})}, [](Tape&, V v) { return ops::complex_abs2(v[0]); }});
  cases.push_back({"dft2_unitary", {r(img)}, [](Tape&, V v) { return sp::dft2(v[0], sp::Normalization::unitary); }});
  cases.push_back({"dft2_unnormalized", {r({1, 4, 8})},
                   [](Tape&, V v) { return sp::dft2(v[0], sp::Normalization::unnormalized); }});

  const Shape op_shape{2, 8, 8};
  const auto valid = [&] {
    Tensor m({1, 4, 4});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = i % 5 == 0 ? 0.0 : 1.0;
    return m;
  }();
  Tensor region({1, 8, 8});
  for (std::size_t i = 0; i < region.size(); ++i) region[i] = rng.bernoulli(0.6) ? 1.0 : 0.0;
  const std::vector<dg::DegradationOp> operators{
      dg::DegradationOp::identity(op_shape), dg::DegradationOp::bernoulli_mask(op_shape, 0.5, 7),
      dg::DegradationOp::region_mask(op_shape, region), dg::DegradationOp::downsample(op_shape, 2, true),
      dg::DegradationOp::downsample(op_shape, 2, false).with_valid_region(valid)};
  for (const auto& op : operators) {
    cases.push_back({"apply_" + dg::to_string(op.kind()), {r(op_shape)},
                     [op](Tape&, V v) { return op.apply(v[0]); }});
  }

  // Losses against a noisy observation of a random image.
  for (const auto& op : {operators[0], operators[1], operators[3]}) {
    const Tensor clean = r(op_shape, 0.0, 1.0);
    const auto obs = dg::corrupt(clean, op, dg::NoiseModel::gaussian(0.1, rng.next_u64()));
    const std::string tag = "_" + dg::to_string(op.kind());
    const Tensor start = r(op_shape, 0.0, 1.0);
    cases.push_back({"dsp_complex" + tag, {start}, [obs](Tape&, V v) { return obj::dsp_complex_loss(v[0], obs); }});
    cases.push_back({"dsp_complex_unnormalized" + tag, {start}, [obs](Tape&, V v) {
                       return obj::dsp_complex_loss(v[0], obs, sp::Normalization::unnormalized);
                     }});
    cases.push_back({"dsp_magnitude" + tag, {start}, [obs](Tape&, V v) { return obj::dsp_magnitude_loss(v[0], obs); }});
    cases.push_back({"dsp_log_magnitude" + tag, {start},
                     [obs](Tape&, V v) { return obj::dsp_log_magnitude_loss(v[0], obs); }});
    cases.push_back({"dip_pixel" + tag, {start}, [obs](Tape&, V v) { return obj::dip_pixel_loss(v[0], obs); }});
    obj::LossSpec weighted;
    weighted.band_weights = {2.0, 1.0, 0.5, 0.25};
    cases.push_back({"dsp_magnitude_band_weighted" + tag, {start},
                     [obs, weighted](Tape&, V v) { return obj::loss(v[0], obs, weighted); }});
  }
  return cases;
}

}  // namespace oracle
