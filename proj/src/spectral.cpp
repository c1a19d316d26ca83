#include "spectralprior/spectral.hpp"

#include <cmath>
#include <numbers>

#include "spectralprior/error.hpp"

namespace spectralprior::spectral {

std::string to_string(Normalization n) { return n == Normalization::unitary ? "unitary" : "unnormalized"; }

Normalization parse_normalization(const std::string& s) {
  if (s == "unitary") return Normalization::unitary;
  if (s == "unnormalized") return Normalization::unnormalized;
  throw ConfigError("unknown normalization '" + s + "' (expected unitary|unnormalized)");
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::span<std::complex<double>> data, bool inverse) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw ShapeError("fft: length " + std::to_string(n) + " is not a power of two", "length");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const std::complex<double> w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        const std::complex<double> a = data[start + k];
        const std::complex<double> b = data[start + k + half] * w;
        data[start + k] = a + b;
        data[start + k + half] = a - b;
      }
    }
  }
}

double Spectrum::energy() const {
  double e = 0.0;
  for (std::size_t i = 0; i < re.size(); ++i) e += re[i] * re[i] + im[i] * im[i];
  return e;
}

namespace {

void require_pow2_grid(std::size_t h, std::size_t w, const char* op) {
  if (!is_power_of_two(h)) {
    throw ShapeError(std::string(op) + ": height " + std::to_string(h) +
                         " is not a power of two; zero-pad the image to the next power of two",
                     "H");
  }
  if (!is_power_of_two(w)) {
    throw ShapeError(std::string(op) + ": width " + std::to_string(w) +
                         " is not a power of two; zero-pad the image to the next power of two",
                     "W");
  }
}

// Unscaled 2D transform of each channel plane, in place.
void transform_planes(std::size_t channels, std::size_t h, std::size_t w, std::vector<std::complex<double>>& buf,
                      bool inverse) {
  std::vector<std::complex<double>> column(h);
  for (std::size_t c = 0; c < channels; ++c) {
    std::complex<double>* plane = buf.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) fft(std::span(plane + y * w, w), inverse);
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t y = 0; y < h; ++y) column[y] = plane[y * w + x];
      fft(column, inverse);
      for (std::size_t y = 0; y < h; ++y) plane[y * w + x] = column[y];
    }
  }
}

double forward_scale(Normalization n, std::size_t h, std::size_t w) {
  return n == Normalization::unitary ? 1.0 / std::sqrt(static_cast<double>(h * w)) : 1.0;
}

double inverse_scale(Normalization n, std::size_t h, std::size_t w) {
  return n == Normalization::unitary ? 1.0 / std::sqrt(static_cast<double>(h * w))
                                     : 1.0 / static_cast<double>(h * w);
}

}  // namespace

Spectrum dft2_complex(std::size_t channels, std::size_t height, std::size_t width, std::span<const double> re,
                      std::span<const double> im, Normalization normalization) {
  require_pow2_grid(height, width, "dft2");
  const std::size_t n = channels * height * width;
  if (re.size() != n || im.size() != n) throw ShapeError("dft2: plane sizes do not match [C,H,W]", "data length");
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = {re[i], im[i]};
  transform_planes(channels, height, width, buf, false);
  const double s = forward_scale(normalization, height, width);
  Spectrum out{channels, height, width, std::vector<double>(n), std::vector<double>(n), normalization};
  for (std::size_t i = 0; i < n; ++i) {
    out.re[i] = buf[i].real() * s;
    out.im[i] = buf[i].imag() * s;
  }
  return out;
}

Spectrum dft2(const Tensor& x, Normalization normalization) {
  if (x.rank() != 3) throw ShapeError("dft2: input must be [C,H,W], got " + spectralprior::to_string(x.shape()), "rank");
  const std::vector<double> zeros(x.size(), 0.0);
  return dft2_complex(x.dim(0), x.dim(1), x.dim(2), x.data(), zeros, normalization);
}

Tensor idft2(const Spectrum& s) {
  require_pow2_grid(s.height, s.width, "idft2");
  const std::size_t n = s.channels * s.height * s.width;
  if (s.re.size() != n || s.im.size() != n) throw ShapeError("idft2: malformed spectrum", "data length");
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = {s.re[i], s.im[i]};
  transform_planes(s.channels, s.height, s.width, buf, true);
  const double scale = inverse_scale(s.normalization, s.height, s.width);
  Tensor out(Shape{s.channels, s.height, s.width});
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real() * scale;
  return out;
}

Tensor idft2(const Spectrum& s, Normalization expected) {
  if (s.normalization != expected) {
    throw ConfigError("idft2: spectrum is " + to_string(s.normalization) + " but caller expects " +
                      to_string(expected));
  }
  return idft2(s);
}

Tensor pack(const Spectrum& s) {
  Tensor out(Shape{2, s.channels, s.height, s.width});
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = s.re[i];
    out[n + i] = s.im[i];
  }
  return out;
}

Var dft2(Var x, Normalization normalization) {
  const Spectrum s = dft2(x.value(), normalization);
  const std::size_t C = s.channels, H = s.height, W = s.width;
  // d/dx of <G, F x> is Re(F^H G), and F^H = scale * (unscaled inverse DFT).
  const double scale = forward_scale(normalization, H, W);
  return x.tape().record(pack(s), {x}, [C, H, W, scale](const BackwardContext& ctx) {
    const std::size_t n = C * H * W;
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = {ctx.grad_out[i], ctx.grad_out[n + i]};
    transform_planes(C, H, W, buf, true);
    auto g = ctx.grad_in[0];
    for (std::size_t i = 0; i < n; ++i) g[i] += scale * buf[i].real();
  }, "dft2");
}

double BandMask::radius(std::size_t u, std::size_t v, std::size_t height, std::size_t width) {
  const double fu = static_cast<double>(u <= height / 2 ? u : height - u) / static_cast<double>(height);
  const double fv = static_cast<double>(v <= width / 2 ? v : width - v) / static_cast<double>(width);
  return std::sqrt(fu * fu + fv * fv);
}

BandMask::BandMask(std::size_t height, std::size_t width, std::vector<double> upper_edges)
    : height_(height), width_(width), edges_(std::move(upper_edges)), membership_(height * width) {
  if (edges_.empty()) throw ConfigError("BandMask: need at least one band");
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!(edges_[i] > 0.0) || (i > 0 && !(edges_[i] > edges_[i - 1]))) {
      throw ConfigError("BandMask: edges must be positive and strictly increasing");
    }
  }
  if (edges_.back() > std::sqrt(0.5) * (1.0 + 1e-12)) throw ConfigError("BandMask: edge beyond sqrt(0.5)");
  for (std::size_t u = 0; u < height; ++u) {
    for (std::size_t v = 0; v < width; ++v) {
      const double r = radius(u, v, height, width);
      std::size_t b = 0;
      while (b + 1 < edges_.size() && r >= edges_[b]) ++b;
      membership_[u * width + v] = b;
    }
  }
}

BandMask BandMask::radial(std::size_t height, std::size_t width, std::size_t bands) {
  if (bands == 0) throw ConfigError("BandMask::radial: bands must be >= 1");
  const double max_r = std::sqrt(0.5);
  std::vector<double> edges(bands);
  for (std::size_t b = 0; b < bands; ++b) edges[b] = max_r * static_cast<double>(b + 1) / static_cast<double>(bands);
  edges.back() = max_r;
  return BandMask(height, width, std::move(edges));
}

std::vector<std::size_t> BandMask::counts() const {
  std::vector<std::size_t> out(edges_.size(), 0);
  for (auto b : membership_) ++out[b];
  return out;
}

std::vector<double> band_energy(const Spectrum& s, const BandMask& bands) {
  if (s.height != bands.height() || s.width != bands.width()) {
    throw ShapeError("band_energy: band mask is " + std::to_string(bands.height()) + "x" +
                         std::to_string(bands.width()) + " but spectrum is " + std::to_string(s.height) + "x" +
                         std::to_string(s.width),
                     "H/W");
  }
  std::vector<double> out(bands.band_count(), 0.0);
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t u = 0; u < s.height; ++u) {
      for (std::size_t v = 0; v < s.width; ++v) {
        const std::size_t i = (c * s.height + u) * s.width + v;
        out[bands.band_of(u, v)] += s.re[i] * s.re[i] + s.im[i] * s.im[i];
      }
    }
  }
  return out;
}

Tensor band_project(const Tensor& x, const BandMask& bands, const std::set<std::size_t>& keep) {
  for (auto b : keep) {
    if (b >= bands.band_count()) throw ConfigError("band_project: band index " + std::to_string(b) + " out of range");
  }
  Spectrum s = dft2(x, Normalization::unitary);
  if (s.height != bands.height() || s.width != bands.width()) {
    throw ShapeError("band_project: band mask does not match image grid", "H/W");
  }
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t u = 0; u < s.height; ++u) {
      for (std::size_t v = 0; v < s.width; ++v) {
        if (keep.contains(bands.band_of(u, v))) continue;
        const std::size_t i = (c * s.height + u) * s.width + v;
        s.re[i] = 0.0;
        s.im[i] = 0.0;
      }
    }
  }
  return idft2(s);
}

std::set<std::size_t> bands_below(std::size_t k) {
  std::set<std::size_t> out;
  for (std::size_t b = 0; b < k; ++b) out.insert(b);
  return out;
}

}  // namespace spectralprior::spectral
