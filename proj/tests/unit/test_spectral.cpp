#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>

#include "oracles.hpp"
#include "spectralprior/error.hpp"
#include "spectralprior/spectral.hpp"

using namespace spectralprior;
using spectral::Normalization;

TEST_CASE("power-of-two helpers") {
  CHECK(spectral::is_power_of_two(1));
  CHECK(spectral::is_power_of_two(64));
  CHECK_FALSE(spectral::is_power_of_two(0));
  CHECK_FALSE(spectral::is_power_of_two(96));
  CHECK(spectral::next_power_of_two(100) == 128);
  CHECK(spectral::next_power_of_two(80) == 128);
  CHECK(spectral::next_power_of_two(64) == 64);
  CHECK(spectral::next_power_of_two(1) == 1);
}

TEST_CASE("1D fft matches direct summation") {
  Rng rng(3);
  for (std::size_t n : {1u, 2u, 8u, 64u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto want = oracle::dft2(x, 1, n, -1, 1.0);
    auto got = x;
    spectral::fft(got, false);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
    spectral::fft(got, true);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got[i] / static_cast<double>(n) - x[i]) < 1e-13);
  }
  std::vector<std::complex<double>> bad(6);
  CHECK_THROWS_AS(spectral::fft(bad, false), ShapeError);
}

TEST_CASE("dft2 matches the direct transform under both normalizations") {
  Rng rng(4);
  for (auto norm : {Normalization::unitary, Normalization::unnormalized}) {
    for (std::size_t h : {4u, 8u}) {
      for (std::size_t w : {4u, 16u}) {
        const auto x = oracle::random_tensor({2, h, w}, rng);
        const auto s = spectral::dft2(x, norm);
        const double scale = norm == Normalization::unitary ? 1.0 / std::sqrt(double(h * w)) : 1.0;
        for (std::size_t c = 0; c < 2; ++c) {
          std::vector<std::complex<double>> plane(h * w);
          for (std::size_t i = 0; i < h * w; ++i) plane[i] = x[c * h * w + i];
          const auto want = oracle::dft2(plane, h, w, -1, scale);
          for (std::size_t u = 0; u < h; ++u)
            for (std::size_t v = 0; v < w; ++v) CHECK(std::abs(s.at(c, u, v) - want[u * w + v]) < 1e-12);
        }
        const auto back = spectral::idft2(s);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-13);
      }
    }
  }
}

TEST_CASE("Parseval under the unitary transform") {
  Rng rng(5);
  const auto x = oracle::random_tensor({3, 16, 8}, rng);
  const double e = spectral::dft2(x).energy();
  CHECK(e == doctest::Approx(oracle::dot(x, x)).epsilon(1e-13));
  CHECK(spectral::dft2(x, Normalization::unnormalized).energy() == doctest::Approx(128 * e).epsilon(1e-13));
}

TEST_CASE("complex input transform") {
  Rng rng(6);
  const std::size_t h = 8, w = 4;
  std::vector<double> re(h * w), im(h * w);
  std::vector<std::complex<double>> z(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    re[i] = rng.uniform(-1, 1);
    im[i] = rng.uniform(-1, 1);
    z[i] = {re[i], im[i]};
  }
  const auto s = spectral::dft2_complex(1, h, w, re, im, Normalization::unitary);
  const auto want = oracle::dft2(z, h, w, -1, 1.0 / std::sqrt(double(h * w)));
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) CHECK(std::abs(s.at(0, u, v) - want[u * w + v]) < 1e-12);
}

TEST_CASE("transform preconditions") {
  CHECK_THROWS_AS(spectral::dft2(Tensor({1, 6, 8})), ShapeError);
  CHECK_THROWS_AS(spectral::dft2(Tensor({8, 8})), ShapeError);
  const auto s = spectral::dft2(Tensor({1, 4, 4}), Normalization::unnormalized);
  CHECK_THROWS_AS(spectral::idft2(s, Normalization::unitary), Error);
  CHECK_THROWS_AS(spectral::parse_normalization("ortho"), ConfigError);
  CHECK(spectral::parse_normalization(spectral::to_string(Normalization::unnormalized)) == Normalization::unnormalized);
}

TEST_CASE("differentiable dft2 packs real then imaginary blocks") {
  Rng rng(7);
  const auto x = oracle::random_tensor({2, 4, 8}, rng);
  Tape tape;
  const auto packed = spectral::dft2(tape.constant(x), Normalization::unitary).value();
  const auto s = spectral::dft2(x);
  CHECK(packed.shape() == Shape{2, 2, 4, 8});
  CHECK(packed == spectral::pack(s));
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(packed[i] == s.re[i]);
    CHECK(packed[s.size() + i] == s.im[i]);
  }
}

TEST_CASE("radial band mask") {
  const auto bands = spectral::BandMask::radial(16, 8, 8);
  CHECK(bands.band_count() == 8);
  CHECK(bands.upper_edges().back() == std::sqrt(0.5));
  const auto counts = bands.counts();
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 16 * 8);
  CHECK(bands.band_of(0, 0) == 0);
  CHECK(bands.band_of(8, 4) == 7);
  for (std::size_t u = 0; u < 16; ++u)
    for (std::size_t v = 0; v < 8; ++v) CHECK(bands.band_of(u, v) == bands.band_of((16 - u) % 16, (8 - v) % 8));
  // Band index never decreases with radius.
  for (std::size_t u = 0; u < 16; ++u)
    for (std::size_t v = 0; v < 8; ++v)
      for (std::size_t u2 = 0; u2 < 16; ++u2)
        for (std::size_t v2 = 0; v2 < 8; ++v2)
          if (spectral::BandMask::radius(u, v, 16, 8) < spectral::BandMask::radius(u2, v2, 16, 8))
            CHECK(bands.band_of(u, v) <= bands.band_of(u2, v2));
  CHECK_THROWS_AS(spectral::BandMask(4, 4, {0.3, 0.2}), ConfigError);
  CHECK_THROWS_AS(spectral::BandMask(4, 4, {0.2, 0.9}), ConfigError);
}

TEST_CASE("band energies and projections partition the spectrum") {
  Rng rng(8);
  const auto x = oracle::random_tensor({2, 16, 16}, rng);
  const auto bands = spectral::BandMask::radial(16, 16, 8);
  const auto s = spectral::dft2(x);
  const auto e = spectral::band_energy(s, bands);
  CHECK(std::accumulate(e.begin(), e.end(), 0.0) == doctest::Approx(s.energy()).epsilon(1e-13));

  const auto all = spectral::band_project(x, bands, spectral::bands_below(8));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(all[i] == doctest::Approx(x[i]).epsilon(1e-12));

  const auto low = spectral::band_project(x, bands, spectral::bands_below(3));
  const auto le = spectral::band_energy(spectral::dft2(low), bands);
  for (std::size_t b = 0; b < 8; ++b) {
    if (b < 3) {
      CHECK(le[b] == doctest::Approx(e[b]).epsilon(1e-12));
    } else {
      CHECK(le[b] < 1e-24);
    }
  }
  CHECK(spectral::bands_below(2) == std::set<std::size_t>{0, 1});
  CHECK_THROWS_AS(spectral::band_project(x, bands, {8}), ConfigError);
}
