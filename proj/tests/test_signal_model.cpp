#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ffc/rng.hpp"
#include "ffc/signal_model.hpp"

using namespace ffc;

namespace {
UnknownMaps random_maps(int n_e, int ny, int nx, uint64_t seed) {
  UnknownMaps m = UnknownMaps::zeros(n_e, ny, nx);
  uint64_t ctr = 0;
  for (size_t i = 0; i < m.C.size(); ++i)
    m.C[i] = cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
  for (auto &a : m.alpha)
    for (size_t i = 0; i < a.size(); ++i)
      a[i] = cplx(0.5 + counter_uniform(seed, ctr++), counter_uniform(seed, ctr++) - 0.5);
  for (auto &t : m.t1)
    for (size_t i = 0; i < t.size(); ++i) t[i] = 0.02 + 0.3 * counter_uniform(seed, ctr++);
  return m;
}

ChannelStack random_stack(int n_ch, int ny, int nx, uint64_t seed) {
  ChannelStack s(n_ch, Grid(ny, nx));
  uint64_t ctr = 0;
  for (auto &g : s)
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
  return s;
}
}  // namespace

TEST_CASE("scalar signal oracle values") {
  // T1 from the power law at 0.2 T with (a, b) = (5.6, -0.1)
  double t1 = 0.15202498616442583;
  cplx alpha = std::polar(1.0, 0.5236);
  cplx s = signal_scalar(1.0, alpha, t1, 0.455, 0.2, 0.2);
  CHECK(s.real() == doctest::Approx(0.9064368508516696).epsilon(1e-12));
  CHECK(s.imag() == doctest::Approx(-0.02507023164753613).epsilon(1e-12));

  cplx s2 = signal_scalar(1.0 / 3.0, std::polar(0.75, 0.6981), 0.12731518357930394, 0.150, 0.2,
                          0.021);
  CHECK(s2.real() == doctest::Approx(-0.03473051881713089).epsilon(1e-10));
  CHECK(s2.imag() == doctest::Approx(-0.04946690255337349).epsilon(1e-10));

  // t -> 0: s -> -C*alpha; t -> inf: s -> C*rho
  cplx s0 = signal_scalar(0.7, alpha, 0.1, 1e-12, 0.2, 0.021);
  CHECK(std::abs(s0 - (-0.7 * alpha)) < 1e-9);
  cplx sinf = signal_scalar(0.7, alpha, 0.1, 100.0, 0.2, 0.021);
  CHECK(std::abs(sinf - cplx(0.7 * 0.105)) < 1e-12);
}

TEST_CASE("partials match central finite differences") {
  const double h = 1e-6;
  uint64_t ctr = 0;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    cplx C(counter_uniform(11, ctr++) - 0.5, counter_uniform(11, ctr++) - 0.5);
    cplx al(0.4 + counter_uniform(11, ctr++), counter_uniform(11, ctr++) - 0.5);
    double T1 = 0.02 + 0.4 * counter_uniform(11, ctr++);
    double t = 0.005 + 0.5 * counter_uniform(11, ctr++);
    double B0 = 0.2, B0E = 0.002 + 0.2 * counter_uniform(11, ctr++);
    auto p = signal_partials(C, al, T1, t, B0, B0E);

    auto sig = [&](cplx c, cplx a, double tt) { return signal_scalar(c, a, tt, t, B0, B0E); };
    cplx fd_C = (sig(C + h, al, T1) - sig(C - h, al, T1)) / (2 * h);
    cplx fd_A = (sig(C, al + h, T1) - sig(C, al - h, T1)) / (2 * h);
    cplx fd_T = (sig(C, al, T1 + h * T1) - sig(C, al, T1 - h * T1)) / (2 * h * T1);
    CHECK(std::abs(p.d_C - fd_C) / (std::abs(fd_C) + 1e-12) < 1e-4);
    CHECK(std::abs(p.d_alpha - fd_A) / (std::abs(fd_A) + 1e-12) < 1e-4);
    CHECK(std::abs(p.d_T1 - fd_T) / (std::abs(fd_T) + 1e-12) < 1e-4);
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("jacobian_apply matches finite-difference directional derivative") {
  auto p = preset_sim3field(8);
  auto m = random_maps(3, 8, 8, 21);
  auto delta = random_stack(7, 8, 8, 22);
  const double h = 1e-6;

  UnknownMaps mp = m, mm = m;
  for (size_t i = 0; i < m.C.size(); ++i) {
    mp.C[i] += h * delta[0][i];
    mm.C[i] -= h * delta[0][i];
    for (int f = 0; f < 3; ++f) {
      mp.alpha[f][i] += h * delta[1 + f][i];
      mm.alpha[f][i] -= h * delta[1 + f][i];
      mp.t1[f][i] += h * delta[4 + f][i].real();
      mm.t1[f][i] -= h * delta[4 + f][i].real();
    }
  }
  auto sp = forward_image(mp, p);
  auto sm = forward_image(mm, p);
  // jacobian_apply is complex-linear; compare against the real-direction FD
  ChannelStack dre = delta;
  for (int f = 0; f < 3; ++f)
    for (size_t i = 0; i < dre[4 + f].size(); ++i) dre[4 + f][i] = dre[4 + f][i].real();
  auto js = jacobian_apply(m, dre, p);
  double num = 0, den = 0;
  for (size_t n = 0; n < js.data.size(); ++n)
    for (size_t i = 0; i < js.data[n].size(); ++i) {
      cplx fd = (sp.data[n][i] - sm.data[n][i]) / (2 * h);
      num += std::norm(js.data[n][i] - fd);
      den += std::norm(fd);
    }
  CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("jacobian adjointness") {
  auto p = preset_sim3field(16);
  auto m = random_maps(3, 16, 16, 31);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_stack(7, 16, 16, 100 + trial);
    ImageSeries y;
    y.protocol = p;
    uint64_t ctr = 0;
    for (int n = 0; n < p.n_meas(); ++n) {
      Grid g(16, 16);
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = cplx(counter_uniform(200 + trial, ctr++) - 0.5,
                    counter_uniform(200 + trial, ctr++) - 0.5);
      y.data.push_back(std::move(g));
    }
    auto jx = jacobian_apply(m, x, p);
    auto jty = jacobian_adjoint_apply(m, y);
    cplx lhs{}, rhs{};
    for (size_t n = 0; n < jx.data.size(); ++n) lhs += dot(y.data[n], jx.data[n]);
    rhs = dot(jty, x);
    CHECK(std::abs(lhs - rhs) / (std::abs(lhs) + 1e-300) < 1e-10);
  }
}

TEST_CASE("diag of the normal operator matches column norms") {
  auto p = preset_sim3field(8);
  auto m = random_maps(3, 8, 8, 41);
  auto d = jacobian_diag_normal(m, p);
  // apply J to a unit impulse in channel l at pixel q and compare
  for (int l : {0, 2, 5}) {
    size_t q = 13;
    ChannelStack e(7, Grid(8, 8));
    e[l][q] = 1.0;
    auto je = jacobian_apply(m, e, p);
    double s = 0;
    for (const auto &g : je.data) s += norm2sq(g);
    CHECK(s == doctest::Approx(d[l][q]).epsilon(1e-12));
  }
}

TEST_CASE("T1 floor keeps partials finite") {
  auto p = signal_partials(1.0, 1.0, 0.0, 0.1, 0.2, 0.02);
  CHECK(std::isfinite(p.d_T1.real()));
  CHECK(std::isfinite(p.s.real()));
}
