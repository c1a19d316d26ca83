#pragma once

#include <complex>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "spectralprior/tensor.hpp"

namespace spectralprior::spectral {

enum class Normalization {
  unitary,       ///< 1/sqrt(HW) on both directions; Parseval holds.
  unnormalized,  ///< forward unscaled, inverse scaled by 1/(HW).
};

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place iterative radix-2 FFT of length 2^m. Unscaled in both directions;
/// `inverse` flips the sign of the exponent.
void fft(std::span<std::complex<double>> data, bool inverse);

/// Complex [C,H,W] array in the frequency domain.
struct Spectrum {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> re;
  std::vector<double> im;
  Normalization normalization = Normalization::unitary;

  std::size_t size() const noexcept { return re.size(); }
  std::complex<double> at(std::size_t c, std::size_t u, std::size_t v) const {
    const std::size_t i = (c * height + u) * width + v;
    return {re[i], im[i]};
  }
  /// Sum of squared magnitudes over all coefficients.
  double energy() const;
};

/// 2D DFT of each channel of a real [C,H,W] tensor. H and W must be powers of
/// two; pad at the I/O layer otherwise.
Spectrum dft2(const Tensor& x, Normalization normalization = Normalization::unitary);

/// 2D DFT of a complex [C,H,W] array given as separate planes.
Spectrum dft2_complex(std::size_t channels, std::size_t height, std::size_t width, std::span<const double> re,
                      std::span<const double> im, Normalization normalization);

/// Inverse of dft2 under the spectrum's own normalization; returns the real part.
Tensor idft2(const Spectrum& s);
/// As idft2, but rejects spectra produced under a different convention.
Tensor idft2(const Spectrum& s, Normalization expected);

/// Packed [2,C,H,W] tensor (real block then imaginary block).
Tensor pack(const Spectrum& s);

/// Differentiable dft2 recorded on the tape; result is packed [2,C,H,W].
Var dft2(Var x, Normalization normalization);

/// Partition of the coefficients of an H x W grid into radial annuli by
/// normalized frequency ||w|| = sqrt((u/H)^2 + (v/W)^2), with u, v folded to
/// the signed range. Band b covers [edge[b-1], edge[b]); the last band is
/// closed at the maximum radius sqrt(0.5).
class BandMask {
 public:
  BandMask(std::size_t height, std::size_t width, std::vector<double> upper_edges);

  /// `bands` equal-width annuli over (0, sqrt(0.5)].
  static BandMask radial(std::size_t height, std::size_t width, std::size_t bands = 8);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t band_count() const noexcept { return edges_.size(); }
  const std::vector<double>& upper_edges() const noexcept { return edges_; }

  std::size_t band_of(std::size_t u, std::size_t v) const { return membership_[u * width_ + v]; }
  /// Number of coefficients of one channel in each band.
  std::vector<std::size_t> counts() const;

  static double radius(std::size_t u, std::size_t v, std::size_t height, std::size_t width);

 private:
  std::size_t height_, width_;
  std::vector<double> edges_;
  std::vector<std::size_t> membership_;
};

/// Per-band sum of squared magnitudes, accumulated over all channels.
std::vector<double> band_energy(const Spectrum& s, const BandMask& bands);

/// Keep only the listed bands of x (per channel) and transform back. Output is
/// real because band membership is symmetric under (u,v) -> (-u,-v).
Tensor band_project(const Tensor& x, const BandMask& bands, const std::set<std::size_t>& keep);

/// Bands {0, ..., k-1}: the low-frequency part below band k.
std::set<std::size_t> bands_below(std::size_t k);

}  // namespace spectralprior::spectral
