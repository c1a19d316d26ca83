#include "spectralprior/ops.hpp"

#include <cmath>
#include <string>

#include "spectralprior/error.hpp"
#include "spectralprior/kernels.hpp"

namespace spectralprior::ops {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " differ",
                     "all axes");
  }
}

void require_rank3(const Shape& s, const char* op, const char* what) {
  if (s.size() != 3) {
    throw ShapeError(std::string(op) + ": " + what + " must be [C,H,W], got " + to_string(s), "rank");
  }
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    for (int k = 0; k < 2; ++k) {
      auto gi = ctx.grad_in[k];
      if (gi.empty()) continue;
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += ctx.grad_out[i];
    }
  }, "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    if (auto g = ctx.grad_in[0]; !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i];
    }
    if (auto g = ctx.grad_in[1]; !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= ctx.grad_out[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    auto x = ctx.input(0).data(), y = ctx.input(1).data();
    if (auto g = ctx.grad_in[0]; !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i] * y[i];
    }
    if (auto g = ctx.grad_in[1]; !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i] * x[i];
    }
  }, "mul");
}

Var scale(Var a, double factor) {
  Tensor out = map_unary(a.value(), [factor](double v) { return v * factor; });
  return a.tape().record(std::move(out), {a}, [factor](const BackwardContext& ctx) {
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * ctx.grad_out[i];
  }, "scale");
}

Var add_scalar(Var a, double value) {
  Tensor out = map_unary(a.value(), [value](double v) { return v + value; });
  return a.tape().record(std::move(out), {a}, [](const BackwardContext& ctx) {
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i];
  }, "add_scalar");
}

Var square(Var a) {
  Tensor out = map_unary(a.value(), [](double v) { return v * v; });
  return a.tape().record(std::move(out), {a}, [](const BackwardContext& ctx) {
    auto x = ctx.input(0).data();
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * ctx.grad_out[i];
  }, "square");
}

Var sqrt_eps(Var a, double eps) {
  if (!(eps > 0.0)) throw ConfigError("sqrt_eps: eps must be > 0");
  for (double v : a.value().data()) {
    if (v + eps <= 0.0) throw ConfigError("sqrt_eps: argument + eps must be positive");
  }
  Tensor out = map_unary(a.value(), [eps](double v) { return std::sqrt(v + eps); });
  return a.tape().record(std::move(out), {a}, [](const BackwardContext& ctx) {
    auto r = ctx.result().data();
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 0.5 * ctx.grad_out[i] / r[i];
  }, "sqrt_eps");
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw ConfigError("log: argument must be positive");
  }
  Tensor out = map_unary(a.value(), [](double v) { return std::log(v); });
  return a.tape().record(std::move(out), {a}, [](const BackwardContext& ctx) {
    auto x = ctx.input(0).data();
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i] / x[i];
  }, "log");
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.tape().record(Tensor::scalar(acc), {a}, [](const BackwardContext& ctx) {
    auto g = ctx.grad_in[0];
    const double go = ctx.grad_out[0];
    for (auto& v : g) v += go;
  }, "sum");
}

Var sum_squares(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v * v;
  return a.tape().record(Tensor::scalar(acc), {a}, [](const BackwardContext& ctx) {
    auto x = ctx.input(0).data();
    auto g = ctx.grad_in[0];
    const double go2 = 2.0 * ctx.grad_out[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go2 * x[i];
  }, "sum_squares");
}

Var leaky_relu(Var a, double slope) {
  Tensor out = map_unary(a.value(), [slope](double v) { return v > 0.0 ? v : slope * v; });
  return a.tape().record(std::move(out), {a}, [slope](const BackwardContext& ctx) {
    auto x = ctx.input(0).data();
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (x[i] > 0.0 ? 1.0 : slope) * ctx.grad_out[i];
  }, "leaky_relu");
}

Var sigmoid(Var a) {
  Tensor out = map_unary(a.value(), stable_sigmoid);
  return a.tape().record(std::move(out), {a}, [](const BackwardContext& ctx) {
    auto s = ctx.result().data();
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] * (1.0 - s[i]) * ctx.grad_out[i];
  }, "sigmoid");
}

Var instance_norm(Var a, double eps) {
  if (!(eps > 0.0)) throw ConfigError("instance_norm: eps must be > 0");
  require_rank3(a.shape(), "instance_norm", "input");
  const std::size_t C = a.shape()[0], n = a.shape()[1] * a.shape()[2];
  const auto x = a.value().data();
  Tensor out(a.shape());
  auto o = out.data();
  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) {
    const double* xc = x.data() + c * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += xc[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (xc[i] - mean) * (xc[i] - mean);
    var /= static_cast<double>(n);
    inv_std[c] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) o[c * n + i] = (xc[i] - mean) * inv_std[c];
  }
  return a.tape().record(std::move(out), {a}, [C, n, inv_std = std::move(inv_std)](const BackwardContext& ctx) {
    auto y = ctx.result().data();
    auto g = ctx.grad_in[0];
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < C; ++c) {
      const double* go = ctx.grad_out.data() + c * n;
      const double* yc = y.data() + c * n;
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mean_g += go[i];
        mean_gy += go[i] * yc[i];
      }
      mean_g *= inv_n;
      mean_gy *= inv_n;
      for (std::size_t i = 0; i < n; ++i) g[c * n + i] += inv_std[c] * (go[i] - mean_g - yc[i] * mean_gy);
    }
  }, "instance_norm");
}

Var channel_affine(Var a, Var scale_v, Var shift_v) {
  require_rank3(a.shape(), "channel_affine", "input");
  const std::size_t C = a.shape()[0], n = a.shape()[1] * a.shape()[2];
  if (scale_v.value().size() != C) throw ShapeError("channel_affine: scale length != channels", "C");
  if (shift_v.value().size() != C) throw ShapeError("channel_affine: shift length != channels", "C");
  const auto x = a.value().data(), sc = scale_v.value().data(), sh = shift_v.value().data();
  Tensor out(a.shape());
  auto o = out.data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < n; ++i) o[c * n + i] = x[c * n + i] * sc[c] + sh[c];
  }
  return a.tape().record(std::move(out), {a, scale_v, shift_v}, [C, n](const BackwardContext& ctx) {
    auto x = ctx.input(0).data(), sc = ctx.input(1).data();
    auto go = ctx.grad_out;
    if (auto g = ctx.grad_in[0]; !g.empty()) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < n; ++i) g[c * n + i] += go[c * n + i] * sc[c];
    }
    if (auto g = ctx.grad_in[1]; !g.empty()) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += go[c * n + i] * x[c * n + i];
        g[c] += acc;
      }
    }
    if (auto g = ctx.grad_in[2]; !g.empty()) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += go[c * n + i];
        g[c] += acc;
      }
    }
  }, "channel_affine");
}

Var add_channel_bias(Var a, Var bias) {
  require_rank3(a.shape(), "add_channel_bias", "input");
  const std::size_t C = a.shape()[0], n = a.shape()[1] * a.shape()[2];
  if (bias.value().size() != C) throw ShapeError("add_channel_bias: bias length != channels", "C");
  const auto x = a.value().data(), b = bias.value().data();
  Tensor out(a.shape());
  auto o = out.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < n; ++i) o[c * n + i] = x[c * n + i] + b[c];
  return a.tape().record(std::move(out), {a, bias}, [C, n](const BackwardContext& ctx) {
    auto go = ctx.grad_out;
    if (auto g = ctx.grad_in[0]; !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    }
    if (auto g = ctx.grad_in[1]; !g.empty()) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += go[c * n + i];
        g[c] += acc;
      }
    }
  }, "add_channel_bias");
}

namespace {

kernels::ConvGeometry conv_geometry(const Shape& in, const Shape& k, std::size_t stride, std::size_t padding) {
  require_rank3(in, "conv2d", "input");
  if (k.size() != 4) throw ShapeError("conv2d: kernel must be [C_out,C_in,k,k], got " + to_string(k), "kernel rank");
  if (k[1] != in[0]) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(k[1]) + " input channels, input has " +
                         std::to_string(in[0]),
                     "C_in");
  }
  if (k[2] != k[3]) throw ShapeError("conv2d: kernel must be square, got " + to_string(k), "kernel width");
  if (k[2] % 2 == 0) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(k[2]), "kernel size");
  if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  if (in[1] + 2 * padding < k[2]) throw ShapeError("conv2d: input height smaller than kernel", "H");
  if (in[2] + 2 * padding < k[2]) throw ShapeError("conv2d: input width smaller than kernel", "W");
  return {in[0], k[0], in[1], in[2], k[2], stride, padding};
}

}  // namespace

Tensor conv2d_value(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  const auto g = conv_geometry(input.shape(), kernel.shape(), stride, padding);
  Tensor out(Shape{g.out_channels, g.out_h(), g.out_w()});
  kernels::parallel::conv2d_forward(g, input.data(), kernel.data(), out.data());
  return out;
}

Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t padding) {
  const auto g = conv_geometry(input.shape(), kernel.shape(), stride, padding);
  Tensor out(Shape{g.out_channels, g.out_h(), g.out_w()});
  kernels::parallel::conv2d_forward(g, input.value().data(), kernel.value().data(), out.data());
  return input.tape().record(std::move(out), {input, kernel}, [g](const BackwardContext& ctx) {
    if (auto gi = ctx.grad_in[0]; !gi.empty()) {
      kernels::parallel::conv2d_backward_input(g, ctx.grad_out, ctx.input(1).data(), gi);
    }
    if (auto gk = ctx.grad_in[1]; !gk.empty()) {
      kernels::parallel::conv2d_backward_weight(g, ctx.grad_out, ctx.input(0).data(), gk);
    }
  }, "conv2d");
}

Var upsample_nearest(Var input, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsample_nearest: factor must be >= 1");
  require_rank3(input.shape(), "upsample_nearest", "input");
  const std::size_t C = input.shape()[0], H = input.shape()[1], W = input.shape()[2];
  const std::size_t OH = H * factor, OW = W * factor;
  Tensor out(Shape{C, OH, OW});
  const auto& x = input.value();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < OH; ++y)
      for (std::size_t xx = 0; xx < OW; ++xx) out.at(c, y, xx) = x.at(c, y / factor, xx / factor);
  return input.tape().record(std::move(out), {input}, [C, H, W, factor](const BackwardContext& ctx) {
    auto g = ctx.grad_in[0];
    const std::size_t OW = W * factor;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H * factor; ++y)
        for (std::size_t xx = 0; xx < OW; ++xx)
          g[(c * H + y / factor) * W + xx / factor] += ctx.grad_out[(c * H * factor + y) * OW + xx];
  }, "upsample_nearest");
}

Var concat_channels(Var a, Var b) {
  require_rank3(a.shape(), "concat_channels", "first input");
  require_rank3(b.shape(), "concat_channels", "second input");
  if (a.shape()[1] != b.shape()[1]) throw ShapeError("concat_channels: heights differ", "H");
  if (a.shape()[2] != b.shape()[2]) throw ShapeError("concat_channels: widths differ", "W");
  const std::size_t na = a.value().size();
  Tensor out(Shape{a.shape()[0] + b.shape()[0], a.shape()[1], a.shape()[2]});
  auto o = out.data();
  std::copy(a.value().data().begin(), a.value().data().end(), o.begin());
  std::copy(b.value().data().begin(), b.value().data().end(), o.begin() + static_cast<std::ptrdiff_t>(na));
  return a.tape().record(std::move(out), {a, b}, [na](const BackwardContext& ctx) {
    if (auto g = ctx.grad_in[0]; !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i];
    }
    if (auto g = ctx.grad_in[1]; !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[na + i];
    }
  }, "concat_channels");
}

Var complex_abs2(Var z) {
  const Shape& s = z.shape();
  if (s.empty() || s[0] != 2) throw ShapeError("complex_abs2: expected packed [2,...] tensor, got " + to_string(s), "axis 0");
  Shape out_shape(s.begin() + 1, s.end());
  if (out_shape.empty()) out_shape = {1};
  const std::size_t n = z.value().size() / 2;
  Tensor out(out_shape);
  auto v = z.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < n; ++i) o[i] = v[i] * v[i] + v[n + i] * v[n + i];
  return z.tape().record(std::move(out), {z}, [n](const BackwardContext& ctx) {
    auto v = ctx.input(0).data();
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < n; ++i) {
      g[i] += 2.0 * v[i] * ctx.grad_out[i];
      g[n + i] += 2.0 * v[n + i] * ctx.grad_out[i];
    }
  }, "complex_abs2");
}

}  // namespace spectralprior::ops
