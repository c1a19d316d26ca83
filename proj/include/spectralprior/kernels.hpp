#pragma once

#include <cstddef>
#include <span>

namespace spectralprior::kernels {

/// Geometry of a 2D cross-correlation with zero padding on [C,H,W] planes.
struct ConvGeometry {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t in_h, in_w;
  std::size_t kernel;
  std::size_t stride;
  std::size_t padding;

  std::size_t out_h() const { return (in_h + 2 * padding - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * padding - kernel) / stride + 1; }
};

// Both variants run a packed-panel product over a zero-padded copy of the
// input and share the register tiles. Each output element belongs to exactly
// one tile, so only the scheduling differs and the results are bit-identical.

namespace serial {
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight);
}  // namespace serial

namespace parallel {
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight);
}  // namespace parallel

/// True when the library was built with OpenMP.
bool parallel_enabled();

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

/// Sets the thread count for subsequent parallel kernel calls on this thread.
void set_thread_count(int n);

}  // namespace spectralprior::kernels
