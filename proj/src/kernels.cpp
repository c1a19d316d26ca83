#include "spectralprior/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef SPECTRALPRIOR_HAVE_OPENMP
#include <omp.h>
#endif

namespace spectralprior::kernels {
namespace {

constexpr std::size_t kLanes = 8;

using v8d = double __attribute__((vector_size(kLanes * sizeof(double)), aligned(alignof(double))));

inline v8d load(const double* p) { return *reinterpret_cast<const v8d*>(p); }

bool pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1 && g.padding == 0; }
std::size_t patch_rows(const ConvGeometry& g) { return g.in_channels * g.kernel * g.kernel; }
std::size_t columns(const ConvGeometry& g) { return g.out_h() * g.out_w(); }

// C[m * ldc + n] (+)= sum_t A(t, m) * b[base[n] + off[t]], t ascending.
//
// A is packed per tile of mr rows as [T][mr], zero beyond M. Every element
// of C is owned by exactly one tile.
struct Product {
  std::size_t M, N, T;
  const double* b;
  const std::size_t* base;
  const std::size_t* off;
  double* c;
  std::size_t ldc;
  bool accumulate;
  std::size_t mr = 0, nr = 0;
  const double* a = nullptr;

  std::size_t m_tiles() const { return (M + mr - 1) / mr; }
  std::size_t n_tiles() const { return (N + nr - 1) / nr; }
  std::size_t tiles() const { return m_tiles() * n_tiles(); }
};

template <std::size_t V, std::size_t NR>
void tile(const Product& pr, std::size_t item) {
  constexpr std::size_t MR = V * kLanes;
  const std::size_t im = item / pr.n_tiles(), in = item % pr.n_tiles();
  const double* ap = pr.a + im * pr.T * MR;
  const double* bp[NR];
  for (std::size_t j = 0; j < NR; ++j) bp[j] = pr.b + pr.base[std::min(in * NR + j, pr.N - 1)];
  v8d acc[NR][V] = {};
  for (std::size_t t = 0; t < pr.T; ++t) {
    const std::size_t o = pr.off[t];
    v8d a[V];
#pragma GCC unroll 4
    for (std::size_t v = 0; v < V; ++v) a[v] = load(ap + t * MR + v * kLanes);
#pragma GCC unroll 16
    for (std::size_t j = 0; j < NR; ++j) {
      const double x = bp[j][o];
#pragma GCC unroll 4
      for (std::size_t v = 0; v < V; ++v) acc[j][v] += x * a[v];
    }
  }
  double res[NR][MR];
#pragma GCC unroll 16
  for (std::size_t j = 0; j < NR; ++j)
#pragma GCC unroll 4
    for (std::size_t v = 0; v < V; ++v) *reinterpret_cast<v8d*>(res[j] + v * kLanes) = acc[j][v];
  const std::size_t n_end = std::min(NR, pr.N - in * NR);
  const std::size_t m0 = im * MR;
  const std::size_t m_end = std::min(MR, pr.M - m0);
  for (std::size_t i = 0; i < m_end; ++i) {
    double* row = pr.c + (m0 + i) * pr.ldc + in * NR;
    if (pr.accumulate) {
      for (std::size_t j = 0; j < n_end; ++j) row[j] += res[j][i];
    } else {
      for (std::size_t j = 0; j < n_end; ++j) row[j] = res[j][i];
    }
  }
}

// Tile height for a block of rows: the fewest padded rows, ties to the
// taller tile. Narrow tiles get more columns.
void shape(Product& pr) {
  pr.mr = 4 * kLanes, pr.nr = 6;
  auto padded = [&](std::size_t mr) { return (pr.M + mr - 1) / mr * mr; };
  for (std::size_t mr : {2 * kLanes, kLanes}) {
    if (padded(mr) < padded(pr.mr)) pr.mr = mr, pr.nr = 12;
  }
}

void run_tile(const Product& pr, std::size_t item) {
  switch (pr.mr / kLanes) {
    case 1: tile<1, 12>(pr, item); break;
    case 2: tile<2, 12>(pr, item); break;
    default: tile<4, 6>(pr, item); break;
  }
}

// Scheduling policy for the independent work items of one kernel call.
template <bool Parallel, class F>
void for_each(std::size_t n, F&& f) {
  if constexpr (Parallel) {
    const auto m = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) f(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) f(i);
  }
}

// Per-thread buffers reused across calls; contents are not preserved.
enum Slot { kPanel, kPadded, kColumns, kSlots };

double* scratch(std::size_t n, Slot slot) {
  thread_local std::vector<double> buf[kSlots];
  if (buf[slot].size() < n) buf[slot].resize(n);
  return buf[slot].data();
}

std::size_t* table(std::size_t n, std::size_t which) {
  thread_local std::vector<std::size_t> buf[2];
  if (buf[which].size() < n) buf[which].resize(n);
  return buf[which].data();
}

// Packs A(t, m) for the tiles of pr and runs the product.
template <bool Parallel, class A>
void multiply_block(Product pr, A&& at) {
  shape(pr);
  const std::size_t mr = pr.mr, tiles_m = pr.m_tiles();
  double* panel = scratch(tiles_m * pr.T * mr, kPanel);
  for_each<Parallel>(tiles_m, [&](std::size_t im) {
    double* dst = panel + im * pr.T * mr;
    const std::size_t m0 = im * mr, m_end = std::min(mr, pr.M - m0);
    for (std::size_t t = 0; t < pr.T; ++t) {
      double* row = dst + t * mr;
      for (std::size_t i = 0; i < m_end; ++i) row[i] = at(t, m0 + i);
      std::fill(row + m_end, row + mr, 0.0);
    }
  });
  pr.a = panel;
  for_each<Parallel>(pr.tiles(), [&](std::size_t item) { run_tile(pr, item); });
}

// Rows in multiples of the tallest tile first, the remainder separately.
template <bool Parallel, class A>
void multiply(const Product& pr, A&& at) {
  constexpr std::size_t tall = 4 * kLanes;
  const std::size_t bulk = pr.M / tall * tall;
  if (bulk == 0 || bulk == pr.M) {
    multiply_block<Parallel>(pr, at);
    return;
  }
  Product head = pr;
  head.M = bulk;
  multiply_block<Parallel>(head, at);
  Product rest = pr;
  rest.M = pr.M - bulk;
  rest.c = pr.c + bulk * pr.ldc;
  multiply_block<Parallel>(rest, [&](std::size_t t, std::size_t m) { return at(t, bulk + m); });
}

// Channels of `in` surrounded by `pad` zeros on every side.
struct Padded {
  const double* data;
  std::size_t h, w;
};

template <bool Parallel>
Padded pad_planes(const double* in, std::size_t channels, std::size_t h, std::size_t w, std::size_t pad) {
  if (pad == 0) return {in, h, w};
  const std::size_t hp = h + 2 * pad, wp = w + 2 * pad;
  double* out = scratch(channels * hp * wp, kPadded);
  for_each<Parallel>(channels, [&](std::size_t c) {
    double* plane = out + c * hp * wp;
    std::fill(plane, plane + hp * wp, 0.0);
    for (std::size_t y = 0; y < h; ++y) std::copy_n(in + (c * h + y) * w, w, plane + (y + pad) * wp + pad);
  });
  return {out, hp, wp};
}

// Offsets of the patch taps (ci, ky, kx) and of the output positions in a
// padded input, so that a patch sample is data[position + tap].
void patch_tables(const ConvGeometry& g, const Padded& p, std::size_t* taps, std::size_t* positions) {
  const std::size_t k = g.kernel;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) taps[(ci * k + ky) * k + kx] = (ci * p.h + ky) * p.w + kx;
  const std::size_t ow = g.out_w();
  for (std::size_t oy = 0; oy < g.out_h(); ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) positions[oy * ow + ox] = oy * g.stride * p.w + ox * g.stride;
}

// Dense [rows, P] operand.
void dense_tables(std::size_t rows, std::size_t P, std::size_t* offsets, std::size_t* positions) {
  for (std::size_t r = 0; r < rows; ++r) offsets[r] = r * P;
  for (std::size_t p = 0; p < P; ++p) positions[p] = p;
}

// Scatter-add of the patch matrix rows that belong to input channel ci.
void col2im_channel(const ConvGeometry& g, std::size_t ci, const double* col, double* gin) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel, s = g.stride, P = oh * ow;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto H = static_cast<std::ptrdiff_t>(g.in_h), W = static_cast<std::ptrdiff_t>(g.in_w);
  double* plane = gin + ci * g.in_h * g.in_w;
  for (std::size_t ky = 0; ky < k; ++ky)
    for (std::size_t kx = 0; kx < k; ++kx) {
      const double* row = col + ((ci * k + ky) * k + kx) * P;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - pad;
        if (iy < 0 || iy >= H) continue;
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - pad;
          if (ix >= 0 && ix < W) plane[iy * W + ix] += row[oy * ow + ox];
        }
      }
    }
}

template <bool Parallel>
void forward_impl(const ConvGeometry& g, const double* in, const double* w, double* out) {
  const std::size_t K = patch_rows(g), P = columns(g);
  std::size_t* taps = table(K, 0);
  std::size_t* positions = table(P, 1);
  const Padded p = pad_planes<Parallel>(in, g.in_channels, g.in_h, g.in_w, g.padding);
  if (pointwise(g)) {
    dense_tables(K, P, taps, positions);
  } else {
    patch_tables(g, p, taps, positions);
  }
  multiply<Parallel>(Product{g.out_channels, P, K, p.data, positions, taps, out, P, false},
                     [&](std::size_t r, std::size_t co) { return w[co * K + r]; });
}

template <bool Parallel>
void backward_input_impl(const ConvGeometry& g, const double* gout, const double* w, double* gin) {
  const std::size_t K = patch_rows(g), P = columns(g), k = g.kernel, kk = k * k, cin = g.in_channels;
  const std::size_t cout = g.out_channels;
  if (pointwise(g)) {
    std::size_t* offsets = table(cout, 0);
    std::size_t* positions = table(P, 1);
    dense_tables(cout, P, offsets, positions);
    multiply<Parallel>(Product{cin, P, cout, gout, positions, offsets, gin, P, true},
                       [&](std::size_t co, std::size_t ci) { return w[co * cin + ci]; });
    return;
  }
  if (g.stride == 1 && g.padding < k) {
    // Correlation of the output gradient with the flipped, transposed kernel.
    const ConvGeometry t{cout, cin, g.out_h(), g.out_w(), k, 1, k - 1 - g.padding};
    const std::size_t KT = patch_rows(t), PT = g.in_h * g.in_w;
    std::size_t* taps = table(KT, 0);
    std::size_t* positions = table(PT, 1);
    const Padded p = pad_planes<Parallel>(gout, cout, t.in_h, t.in_w, t.padding);
    patch_tables(t, p, taps, positions);
    multiply<Parallel>(Product{cin, PT, KT, p.data, positions, taps, gin, PT, true},
                       [&](std::size_t r, std::size_t ci) { return w[((r / kk) * cin + ci) * kk + kk - 1 - r % kk]; });
    return;
  }
  double* gcol = scratch(K * P, kColumns);
  std::size_t* offsets = table(cout, 0);
  std::size_t* positions = table(P, 1);
  dense_tables(cout, P, offsets, positions);
  multiply<Parallel>(Product{K, P, cout, gout, positions, offsets, gcol, P, false},
                     [&](std::size_t co, std::size_t r) { return w[co * K + r]; });
  for_each<Parallel>(cin, [&](std::size_t ci) { col2im_channel(g, ci, gcol, gin); });
}

template <bool Parallel>
void backward_weight_impl(const ConvGeometry& g, const double* gout, const double* in, double* gw) {
  const std::size_t K = patch_rows(g), P = columns(g);
  std::size_t* taps = table(K, 0);
  std::size_t* positions = table(P, 1);
  const Padded p = pad_planes<Parallel>(in, g.in_channels, g.in_h, g.in_w, g.padding);
  if (pointwise(g)) {
    dense_tables(K, P, taps, positions);
  } else {
    patch_tables(g, p, taps, positions);
  }
  // Output positions are the summation index here.
  multiply<Parallel>(Product{g.out_channels, K, P, p.data, taps, positions, gw, K, true},
                     [&](std::size_t q, std::size_t co) { return gout[co * P + q]; });
}

}  // namespace

namespace serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output) {
  forward_impl<false>(g, input.data(), weight.data(), output.data());
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
  backward_input_impl<false>(g, grad_output.data(), weight.data(), grad_input.data());
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight) {
  backward_weight_impl<false>(g, grad_output.data(), input.data(), grad_weight.data());
}

}  // namespace serial

namespace parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output) {
  forward_impl<true>(g, input.data(), weight.data(), output.data());
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
  backward_input_impl<true>(g, grad_output.data(), weight.data(), grad_input.data());
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight) {
  backward_weight_impl<true>(g, grad_output.data(), input.data(), grad_weight.data());
}

}  // namespace parallel

bool parallel_enabled() {
#ifdef SPECTRALPRIOR_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef SPECTRALPRIOR_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int n) {
#ifdef SPECTRALPRIOR_HAVE_OPENMP
  omp_set_num_threads(n < 1 ? 1 : n);
#else
  (void)n;
#endif
}

}  // namespace spectralprior::kernels
