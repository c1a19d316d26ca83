#pragma once

#include <cstddef>

#include "spectralprior/tensor.hpp"

namespace spectralprior::ops {

// Elementwise arithmetic. Binary ops require identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);
Var square(Var a);

/// sqrt(a + eps), elementwise; smooth for a >= 0 when eps > 0.
Var sqrt_eps(Var a, double eps);

/// Natural log, elementwise; requires positive input.
Var log(Var a);

/// Sum of all elements into a {1} scalar.
Var sum(Var a);
/// Sum of squares into a {1} scalar.
Var sum_squares(Var a);

Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);

/// Per-channel normalization of a [C,H,W] tensor to zero mean and unit
/// (biased) variance: (x - mean) / sqrt(var + eps).
Var instance_norm(Var a, double eps);

/// out[c] = a[c] * scale[c] + shift[c] for [C,H,W] input and [C] parameters.
Var channel_affine(Var a, Var scale, Var shift);

/// out[c] = a[c] + bias[c].
Var add_channel_bias(Var a, Var bias);

/// Cross-correlation of [C_in,H,W] input with a [C_out,C_in,k,k] kernel and
/// zero padding. Output extent is (H + 2*padding - k) / stride + 1.
Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t padding);

/// Padding that gives ceil(H / stride) output rows for an odd kernel.
constexpr std::size_t same_padding(std::size_t kernel) { return kernel / 2; }

/// Replicate each pixel factor x factor times.
Var upsample_nearest(Var input, std::size_t factor);

/// Stack [Ca,H,W] and [Cb,H,W] into [Ca+Cb,H,W].
Var concat_channels(Var a, Var b);

/// Squared modulus |re|^2 + |im|^2 of a packed complex tensor [2,...] whose
/// first axis holds the real and imaginary blocks.
Var complex_abs2(Var z);

/// Dense-tensor conv2d used by the graph op; dispatches to the parallel
/// kernels when available.
Tensor conv2d_value(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);

}  // namespace spectralprior::ops
