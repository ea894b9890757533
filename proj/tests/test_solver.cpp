#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ffc/linops.hpp"
#include "ffc/rng.hpp"
#include "ffc/tgv_solver.hpp"

using namespace ffc;

namespace {

GradientField random_grad(int n_ch, int ny, int nx, uint64_t seed, double scale = 1.0) {
  GradientField f;
  f.c.assign(n_ch, {Grid(ny, nx), Grid(ny, nx)});
  uint64_t ctr = 0;
  for (auto &ch : f.c)
    for (auto &g : ch)
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = scale * cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
  return f;
}

SymGradField random_sym(int n_ch, int ny, int nx, uint64_t seed, double scale = 1.0) {
  SymGradField f;
  f.c.assign(n_ch, {Grid(ny, nx), Grid(ny, nx), Grid(ny, nx)});
  uint64_t ctr = 0;
  for (auto &ch : f.c)
    for (auto &g : ch)
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = scale * cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
  return f;
}

Grid noisy_piecewise(int n, uint64_t seed) {
  Grid d(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double v = (x > 10 && x < 25 && y > 8 && y < 27) ? 1.0 + 0.02 * x : 0.2;
      double g0, g1;
      counter_gauss_pair(seed, static_cast<uint64_t>(y) * n + x, g0, g1);
      d(y, x) = v + 0.05 * g0;
    }
  return d;
}

DsOp identity_op() {
  return DsOp{[](const ChannelStack &x) { return std::vector<Grid>{x[0]}; },
              [](const std::vector<Grid> &r) { return ChannelStack{r[0]}; }};
}

}  // namespace

TEST_CASE("IRGN schedule closed form") {
  SolverConfig cfg;
  for (int k = 0; k < 12; ++k) {
    auto s = irgn_schedule(k, cfg);
    CHECK(s.gamma == std::max(1e-3 * std::pow(0.5, k), 4e-6));
    CHECK(s.delta == std::max(1.0 * std::pow(0.1, k), 1e-3));
    CHECK(s.iters == std::min(10 * (1 << k), 2000));
  }
  auto s0 = irgn_schedule(0, cfg);
  CHECK(s0.gamma == 1e-3);
  CHECK(s0.delta == 1.0);
  CHECK(s0.iters == 10);
  auto s3 = irgn_schedule(3, cfg);
  CHECK(s3.gamma == doctest::Approx(1.25e-4));
  CHECK(s3.delta == doctest::Approx(1e-3));
  CHECK(s3.iters == 80);
  auto s8 = irgn_schedule(8, cfg);
  CHECK(s8.gamma == doctest::Approx(4e-6));
  CHECK(s8.iters == 2000);
  CHECK_THROWS_AS(irgn_schedule(-1, cfg), std::invalid_argument);
  CHECK_THROWS_AS(irgn_schedule(12, cfg), std::invalid_argument);
}

TEST_CASE("config validation") {
  SolverConfig cfg;
  cfg.validate();
  cfg.gamma_decay = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.mu = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  auto w = cfg.per_channel_weights(3);
  REQUIRE(w.size() == 7);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 10.0);
  CHECK(w[3] == 10.0);
  CHECK(w[4] == 1.0);
}

TEST_CASE("dual projections are idempotent and nonexpansive") {
  for (int trial = 0; trial < 20; ++trial) {
    double bound = 0.01 + counter_uniform(50, trial);
    auto z = random_grad(3, 12, 12, 60 + trial, 4.0);
    auto z2 = z;
    prox_dual_z0(z, bound);
    // pointwise magnitude respects the bound
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) {
        double m = 0;
        for (auto &ch : z.c) m += std::norm(ch[0](y, x)) + std::norm(ch[1](y, x));
        CHECK(std::sqrt(m) <= bound * (1 + 1e-12));
      }
    auto zi = z;
    prox_dual_z0(zi, bound);  // idempotence
    CHECK(std::sqrt(norm2sq(zi)) == doctest::Approx(std::sqrt(norm2sq(z))).epsilon(1e-14));

    // nonexpansiveness against a second point
    auto w = random_grad(3, 12, 12, 90 + trial, 4.0);
    auto wp = w;
    prox_dual_z0(wp, bound);
    double before = 0, after = 0;
    for (size_t l = 0; l < 3; ++l)
      for (int k = 0; k < 2; ++k)
        for (size_t i = 0; i < z.c[l][k].size(); ++i) {
          before += std::norm(z2.c[l][k][i] - w.c[l][k][i]);
          after += std::norm(z.c[l][k][i] - wp.c[l][k][i]);
        }
    CHECK(after <= before * (1 + 1e-12));
  }
}

TEST_CASE("symmetric dual projection respects the weighted magnitude") {
  for (int trial = 0; trial < 20; ++trial) {
    double bound = 0.01 + counter_uniform(51, trial);
    auto z = random_sym(2, 10, 10, 70 + trial, 4.0);
    prox_dual_z1(z, bound);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        double m = 0;
        for (auto &ch : z.c)
          m += std::norm(ch[0](y, x)) + std::norm(ch[1](y, x)) + 2.0 * std::norm(ch[2](y, x));
        CHECK(std::sqrt(m) <= bound * (1 + 1e-12));
      }
    auto zi = z;
    prox_dual_z1(zi, bound);
    double d = 0;
    for (size_t l = 0; l < 2; ++l)
      for (int k = 0; k < 3; ++k)
        for (size_t i = 0; i < z.c[l][k].size(); ++i) d += std::norm(zi.c[l][k][i] - z.c[l][k][i]);
    CHECK(d == 0.0);
  }
}

TEST_CASE("residual prox solves its resolvent equation") {
  std::vector<Grid> d{Grid(6, 6)}, xi{Grid(6, 6)};
  uint64_t ctr = 0;
  for (size_t i = 0; i < 36; ++i) {
    d[0][i] = cplx(counter_uniform(80, ctr++) - 0.5, counter_uniform(80, ctr++) - 0.5);
    xi[0][i] = cplx(counter_uniform(81, ctr++) - 0.5, counter_uniform(81, ctr++) - 0.5);
  }
  double sigma = 0.7;
  auto r = xi;
  prox_dual_r(r, sigma, d);
  // r + sigma * (r + d) = xi  (resolvent of F*(r) = 1/2|r|^2 + <d, r>)
  for (size_t i = 0; i < 36; ++i) {
    cplx lhs = r[0][i] + sigma * (r[0][i] + d[0][i]);
    CHECK(std::abs(lhs - xi[0][i]) < 1e-14);
  }
}

TEST_CASE("primal prox fixes the linearization point") {
  ChannelStack uk{Grid(5, 5)};
  std::vector<RealGrid> mk{RealGrid(5, 5)};
  uint64_t ctr = 0;
  for (size_t i = 0; i < 25; ++i) {
    uk[0][i] = cplx(counter_uniform(82, ctr++), counter_uniform(82, ctr++));
    mk[0][i] = counter_uniform(83, ctr++);
  }
  auto u = prox_primal_u(uk, 0.3, 2.0, mk, uk);
  for (size_t i = 0; i < 25; ++i) CHECK(std::abs(u[0][i] - uk[0][i]) < 1e-14);
}

TEST_CASE("TGV denoising matches a long fixed-step PDHG reference") {
  const int n = 32;
  const double gamma = 0.05, delta = 1e-3;
  SolverConfig cfg;
  cfg.tau0 = 0.2;
  cfg.tol = 1e-14;  // run to the iteration budget

  Grid d = noisy_piecewise(n, 7);
  ChannelStack uk{Grid(n, n)};
  std::vector<RealGrid> mk{RealGrid(n, n, 1.0)};
  auto id = identity_op();

  auto res = pd_linesearch_solve(id, {d}, uk, mk, gamma, delta, 20000, cfg);

  // reference: vanilla PDHG, fixed steps, theta = 1, 50k iterations
  const double L2 = 20.0;  // conservative bound for ||K||^2 of [I; grad - I; symgrad]
  const double tau = 1.0 / std::sqrt(L2), sigma = 1.0 / std::sqrt(L2);
  ChannelStack u{Grid(n, n)}, ubar{Grid(n, n)};
  GradientField v, vbar;
  v.c.assign(1, {Grid(n, n), Grid(n, n)});
  vbar = v;
  GradientField z0 = v;
  SymGradField z1;
  z1.c.assign(1, {Grid(n, n), Grid(n, n), Grid(n, n)});
  std::vector<Grid> r{Grid(n, n)};

  for (int it = 0; it < 50000; ++it) {
    // dual ascent at the extrapolated primal
    auto gu = grad(ubar);
    for (int k = 0; k < 2; ++k)
      for (size_t i = 0; i < gu.c[0][k].size(); ++i)
        z0.c[0][k][i] += sigma * (gu.c[0][k][i] - vbar.c[0][k][i]);
    prox_dual_z0(z0, cfg.beta0 * gamma);
    auto sv = symgrad(vbar);
    for (int k = 0; k < 3; ++k)
      for (size_t i = 0; i < sv.c[0][k].size(); ++i) z1.c[0][k][i] += sigma * sv.c[0][k][i];
    prox_dual_z1(z1, cfg.beta1 * gamma);
    for (size_t i = 0; i < r[0].size(); ++i) r[0][i] += sigma * ubar[0][i];
    prox_dual_r(r, sigma, {d});

    // primal descent
    auto d1 = div1(z0);
    auto d2 = div2(z1);
    ChannelStack u_new{Grid(n, n)};
    for (size_t i = 0; i < u[0].size(); ++i) u_new[0][i] = u[0][i] - tau * (r[0][i] - d1[0][i]);
    u_new = prox_primal_u(u_new, tau, delta, mk, uk);
    GradientField v_new = v;
    for (int k = 0; k < 2; ++k)
      for (size_t i = 0; i < v.c[0][k].size(); ++i)
        v_new.c[0][k][i] = v.c[0][k][i] - tau * (-z0.c[0][k][i] - d2.c[0][k][i]);

    for (size_t i = 0; i < u[0].size(); ++i) ubar[0][i] = 2.0 * u_new[0][i] - u[0][i];
    for (int k = 0; k < 2; ++k)
      for (size_t i = 0; i < v.c[0][k].size(); ++i)
        vbar.c[0][k][i] = 2.0 * v_new.c[0][k][i] - v.c[0][k][i];
    u = std::move(u_new);
    v = std::move(v_new);
  }

  double num = 0, den = 0;
  for (size_t i = 0; i < u[0].size(); ++i) {
    num += std::norm(res.u[0][i] - u[0][i]);
    den += std::norm(u[0][i]);
  }
  CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("line-search solver reaches tolerance on an easy problem") {
  const int n = 16;
  Grid d = noisy_piecewise(n, 9);
  ChannelStack uk{Grid(n, n)};
  std::vector<RealGrid> mk{RealGrid(n, n, 1.0)};
  SolverConfig cfg;
  cfg.tau0 = 0.2;
  cfg.tol = 1e-8;
  auto res = pd_linesearch_solve(identity_op(), {d}, uk, mk, 0.1, 1e-3, 50000, cfg);
  CHECK(res.hit_tol);
  CHECK(res.gap <= 1e-6);
  CHECK(res.iters < 50000);
}

TEST_CASE("normalized gap decreases with the iteration budget") {
  const int n = 32;
  Grid d = noisy_piecewise(n, 13);
  ChannelStack uk{Grid(n, n)};
  std::vector<RealGrid> mk{RealGrid(n, n, 1.0)};
  SolverConfig cfg;
  cfg.tau0 = 0.2;
  cfg.tol = 1e-14;
  auto r100 = pd_linesearch_solve(identity_op(), {d}, uk, mk, 0.1, 1e-3, 100, cfg);
  auto r2000 = pd_linesearch_solve(identity_op(), {d}, uk, mk, 0.1, 1e-3, 2000, cfg);
  CHECK(r2000.gap < r100.gap);
  CHECK(r2000.fidelity <= r100.fidelity * 1.01);
}
