#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ffc/linops.hpp"
#include "ffc/rng.hpp"

using namespace ffc;

namespace {
ChannelStack random_stack(int n_ch, int ny, int nx, uint64_t seed) {
  ChannelStack s(n_ch, Grid(ny, nx));
  uint64_t ctr = 0;
  for (auto &g : s)
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
  return s;
}

GradientField random_grad(int n_ch, int ny, int nx, uint64_t seed) {
  GradientField f;
  f.c.assign(n_ch, {Grid(ny, nx), Grid(ny, nx)});
  uint64_t ctr = 0;
  for (auto &ch : f.c)
    for (auto &g : ch)
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
  return f;
}

SymGradField random_sym(int n_ch, int ny, int nx, uint64_t seed) {
  SymGradField f;
  f.c.assign(n_ch, {Grid(ny, nx), Grid(ny, nx), Grid(ny, nx)});
  uint64_t ctr = 0;
  for (auto &ch : f.c)
    for (auto &g : ch)
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
  return f;
}
}  // namespace

TEST_CASE("grad / div1 adjointness") {
  for (int n : {8, 16, 32, 128})
    for (int n_ch : {1, 3, 7})
      for (int trial = 0; trial < 5; ++trial) {
        auto u = random_stack(n_ch, n, n, 7 * n + n_ch + trial);
        auto v = random_grad(n_ch, n, n, 13 * n + n_ch + trial);
        // <grad u, v> = <u, grad^H v> = -<u, div1 v>
        cplx lhs = dot(grad(u), v);
        cplx rhs = -dot(u, div1(v));
        CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
      }
}

TEST_CASE("symgrad / div2 adjointness under the weighted pairing") {
  for (int n : {8, 16, 32, 128})
    for (int n_ch : {1, 3, 7})
      for (int trial = 0; trial < 5; ++trial) {
        auto v = random_grad(n_ch, n, n, 17 * n + n_ch + trial);
        auto z = random_sym(n_ch, n, n, 19 * n + n_ch + trial);
        cplx lhs = dot(symgrad(v), z);  // weighted pairing, factor 2 on x3
        cplx rhs = -dot(v, div2(z));
        CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
      }
}

TEST_CASE("degenerate sizes") {
  auto u = random_stack(1, 1, 6, 3);
  auto g = grad(u);
  for (size_t i = 0; i < g.c[0][1].size(); ++i) CHECK(g.c[0][1][i] == cplx{});
  auto v = random_grad(1, 1, 6, 4);
  cplx lhs = dot(grad(u), v);
  cplx rhs = -dot(u, div1(v));
  CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + 1));
}

TEST_CASE("fft2c is unitary and centered") {
  Grid x(16, 16);
  uint64_t ctr = 0;
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = cplx(counter_uniform(8, ctr++) - 0.5, counter_uniform(8, ctr++) - 0.5);

  auto k = fft2c(x);
  CHECK(norm2sq(k) == doctest::Approx(norm2sq(x)).epsilon(1e-12));  // Parseval
  auto back = ifft2c(k);
  double err = 0;
  for (size_t i = 0; i < x.size(); ++i) err += std::norm(back[i] - x[i]);
  CHECK(std::sqrt(err / norm2sq(x)) < 1e-13);

  // impulse at the centered origin -> constant positive spectrum
  Grid imp(8, 8);
  imp(4, 4) = 1.0;
  auto spec = fft2c(imp);
  for (size_t i = 0; i < spec.size(); ++i) {
    CHECK(spec[i].real() == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
    CHECK(spec[i].imag() == doctest::Approx(0.0).epsilon(1e-12));
  }

  // adjoint of fft2c is ifft2c
  Grid y(16, 16);
  for (size_t i = 0; i < y.size(); ++i)
    y[i] = cplx(counter_uniform(9, ctr++) - 0.5, counter_uniform(9, ctr++) - 0.5);
  cplx lhs = dot(fft2c(x), y);
  cplx rhs = dot(x, ifft2c(y));
  CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
}

TEST_CASE("masked fourier sampling is self-adjoint in the mask") {
  auto p = preset_sim3field(16);
  p.mask = std::vector<uint8_t>(256, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; x += 3) (*p.mask)[y * 16 + x] = 1;

  ImageSeries a;
  a.protocol = p;
  KSpaceSeries b;
  b.protocol = p;
  uint64_t ctr = 0;
  for (int n = 0; n < p.n_meas(); ++n) {
    Grid ga(16, 16), gb(16, 16);
    for (size_t i = 0; i < ga.size(); ++i) {
      ga[i] = cplx(counter_uniform(31, ctr++) - 0.5, counter_uniform(31, ctr++) - 0.5);
      gb[i] = cplx(counter_uniform(32, ctr++) - 0.5, counter_uniform(32, ctr++) - 0.5);
    }
    a.data.push_back(std::move(ga));
    b.data.push_back(std::move(gb));
  }
  auto fa = fourier_sample(a, p.mask);
  auto fb = fourier_adjoint(b, p.mask);
  cplx lhs{}, rhs{};
  for (int n = 0; n < p.n_meas(); ++n) {
    lhs += dot(b.data[n], fa.data[n]);
    rhs += dot(fb.data[n], a.data[n]);
  }
  CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
  // masked-out lines are zero
  for (size_t i = 0; i < fa.data[0].size(); ++i)
    if (!(*p.mask)[i]) CHECK(fa.data[0][i] == cplx{});
}

TEST_CASE("arctan filter gains") {
  FilterConfig cfg;  // k_c = 30, slope = 100
  CHECK(filter_gain(0, cfg) == doctest::Approx(0.9968170072350918).epsilon(1e-12));
  CHECK(filter_gain(30, cfg) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(filter_gain(60, cfg) == doctest::Approx(0.003182992764908188).epsilon(1e-12));
  CHECK(filter_gain(15, cfg) > filter_gain(45, cfg));

  // grid version applies the gain at the centered radius
  Grid k(64, 64, 1.0);
  auto f = kspace_filter_grid(k, cfg);
  CHECK(f(32, 32).real() == doctest::Approx(0.9968170072350918).epsilon(1e-12));
  CHECK(f(32, 32 + 30).real() == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("finite-difference operator norm stays below 8") {
  // lambda_max(grad^H grad) <= 8 on a 2D grid
  auto x = random_stack(1, 32, 32, 77);
  double lambda = 0;
  for (int it = 0; it < 50; ++it) {
    double nrm = std::sqrt(norm2sq(x));
    for (size_t i = 0; i < x[0].size(); ++i) x[0][i] /= nrm;
    auto y = div1(grad(x));
    for (size_t i = 0; i < x[0].size(); ++i) x[0][i] = -y[0][i];
    lambda = std::sqrt(norm2sq(x));
  }
  CHECK(lambda <= 8.0 + 1e-9);
  CHECK(lambda > 6.0);  // tight-ish on a 32x32 grid
}
