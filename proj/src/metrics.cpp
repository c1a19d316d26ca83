#include "spectralprior/metrics.hpp"

#include <cmath>
#include <limits>

#include "spectralprior/error.hpp"

namespace spectralprior::diagnostics {
namespace {

double to_psnr(double mse_value, double peak) {
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse_value);
}

void check(const Tensor& a, const Tensor& b, double peak) {
  if (a.shape() != b.shape()) {
    throw ShapeError("psnr: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ", "all axes");
  }
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be > 0");
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse: shapes differ", "all axes");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  check(a, b, peak);
  return to_psnr(mse(a, b), peak);
}

double psnr(const Tensor& a, const Tensor& b, double peak, const Tensor& mask) {
  check(a, b, peak);
  if (a.rank() != 3) throw ShapeError("psnr: masked form needs [C,H,W] inputs", "rank");
  const std::size_t C = a.dim(0), n = a.dim(1) * a.dim(2);
  if (mask.size() != n) throw ShapeError("psnr: mask does not match image grid", "H/W");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i] == 0.0) continue;
      const double d = a[c * n + i] - b[c * n + i];
      acc += d * d;
      ++count;
    }
  }
  if (count == 0) throw ConfigError("psnr: mask selects no pixels");
  return to_psnr(acc / static_cast<double>(count), peak);
}

}  // namespace spectralprior::diagnostics
