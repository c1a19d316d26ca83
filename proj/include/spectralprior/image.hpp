#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "spectralprior/tensor.hpp"

namespace spectralprior::io {

/// 8-bit image, samples interleaved row-major (HWC).
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  ///< 1 or 3
  std::vector<std::uint8_t> samples;

  /// [C,H,W] tensor with values sample / 255.
  Tensor to_tensor() const;
  /// Clamps to [0,1] and rounds to the nearest 8-bit level.
  static ImageBuffer from_tensor(const Tensor& t);

  bool operator==(const ImageBuffer&) const = default;
};

enum class ImageFormat { pgm, ppm, png };

/// Decodes P5, P6 or 8-bit non-interlaced PNG (grey, grey+alpha, RGB, RGBA,
/// palette; alpha is dropped). Malformed input throws IoError with the byte
/// offset of the problem.
ImageBuffer decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_image(const ImageBuffer& image, ImageFormat format);

ImageBuffer load_image(const std::filesystem::path& path);
/// Format follows the extension (.pgm, .ppm, .png).
void save_image(const ImageBuffer& image, const std::filesystem::path& path);
ImageFormat format_for(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Power-of-two padded image and the mask of original pixels.
struct PaddedImage {
  Tensor image;  ///< [C,H',W']
  Tensor mask;   ///< [1,H',W'], 1 on the original pixels
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Mirror-pads bottom and right up to the next powers of two.
PaddedImage pad_to_power_of_two(const Tensor& image);
/// Top-left height x width window of a [C,H,W] tensor.
Tensor crop(const Tensor& image, std::size_t height, std::size_t width);

void write_pad_sidecar(const std::filesystem::path& path, const PaddedImage& padded);
/// Returns {original height, original width}.
std::pair<std::size_t, std::size_t> read_pad_sidecar(const std::filesystem::path& path);

/// Greyscale image thresholded at 0.5 into a [1,H,W] mask of ones and zeros.
Tensor load_mask(const std::filesystem::path& path);

}  // namespace spectralprior::io
