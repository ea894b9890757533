#include "ffc/tgv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ffc/linops.hpp"
#include "ffc/rng.hpp"
#include "ffc/signal_model.hpp"
#include "linearized.hpp"

namespace ffc {

void SolverConfig::validate() const {
  auto fail = [](const char *w) { throw std::invalid_argument(std::string("SolverConfig: ") + w); };
  if (!(gamma_decay > 0 && gamma_decay < 1)) fail("gamma_decay must be in (0,1)");
  if (!(delta_decay > 0 && delta_decay < 1)) fail("delta_decay must be in (0,1)");
  if (!(gamma_min <= gamma0)) fail("gamma_min must not exceed gamma0");
  if (!(delta_min <= delta0)) fail("delta_min must not exceed delta0");
  if (!(tol > 0)) fail("tol must be positive");
  if (!(beta0 > 0 && beta1 > 0)) fail("beta0 and beta1 must be positive");
  if (!(mu > 0 && mu < 1)) fail("mu must be in (0,1)");
  if (n_gn <= 0 || iter_base <= 0 || iter_cap <= 0) fail("iteration counts must be positive");
  if (!(alpha_weight > 0)) fail("alpha_weight must be positive");
  if (!(data_scale > 0)) fail("data_scale must be positive");
}

std::vector<double> SolverConfig::per_channel_weights(int n_e) const {
  std::vector<double> w(1 + 2 * n_e, 1.0);
  for (int i = 0; i < n_e; ++i) w[1 + i] = alpha_weight;
  return w;
}

IrgnStep irgn_schedule(int k, const SolverConfig &cfg) {
  if (k < 0 || k >= cfg.n_gn) throw std::invalid_argument("irgn_schedule: k out of range");
  IrgnStep s;
  s.gamma = std::max(cfg.gamma0 * std::pow(cfg.gamma_decay, k), cfg.gamma_min);
  s.delta = std::max(cfg.delta0 * std::pow(cfg.delta_decay, k), cfg.delta_min);
  s.iters = std::min(cfg.iter_base * (1 << k), cfg.iter_cap);
  return s;
}

// ---------------------------------------------------------------------------
// proximal maps

void prox_dual_z0(GradientField &z, double bound) {
  const int ny = z.c[0][0].ny(), nx = z.c[0][0].nx();
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double m = 0;
      for (auto &ch : z.c) m += std::norm(ch[0](y, x)) + std::norm(ch[1](y, x));
      double f = std::max(1.0, std::sqrt(m) / bound);
      // tolerance keeps the projection exactly idempotent for points that a
      // previous application already mapped onto the ball boundary
      if (f > 1.0 + 1e-12)
        for (auto &ch : z.c) {
          ch[0](y, x) /= f;
          ch[1](y, x) /= f;
        }
    }
}

void prox_dual_z1(SymGradField &z, double bound) {
  const int ny = z.c[0][0].ny(), nx = z.c[0][0].nx();
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double m = 0;
      for (auto &ch : z.c)
        m += std::norm(ch[0](y, x)) + std::norm(ch[1](y, x)) + 2.0 * std::norm(ch[2](y, x));
      double f = std::max(1.0, std::sqrt(m) / bound);
      if (f > 1.0 + 1e-12)
        for (auto &ch : z.c) {
          ch[0](y, x) /= f;
          ch[1](y, x) /= f;
          ch[2](y, x) /= f;
        }
    }
}

void prox_dual_r(std::vector<Grid> &r, double sigma, const std::vector<Grid> &dtilde,
                 double c2) {
  for (size_t n = 0; n < r.size(); ++n)
    for (size_t i = 0; i < r[n].size(); ++i)
      r[n][i] = (r[n][i] - sigma * dtilde[n][i]) / (1.0 + sigma * c2);
}

ChannelStack prox_primal_u(const ChannelStack &xi, double tau, double delta,
                           const std::vector<RealGrid> &mk, const ChannelStack &uk,
                           const std::vector<uint8_t> *real_ch) {
  ChannelStack out(xi.size());
  for (size_t l = 0; l < xi.size(); ++l) {
    const bool re_only = real_ch && (*real_ch)[l];
    Grid g(xi[l].ny(), xi[l].nx());
    for (size_t i = 0; i < g.size(); ++i) {
      double td = tau * delta * mk[l][i];
      cplx p = (td * uk[l][i] + xi[l][i]) / (1.0 + td);
      g[i] = re_only ? cplx(p.real(), 0.0) : p;
    }
    out[l] = std::move(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// helpers

namespace {

GradientField zero_grad(size_t n_ch, int ny, int nx) {
  GradientField f;
  f.c.assign(n_ch, {Grid(ny, nx), Grid(ny, nx)});
  return f;
}

SymGradField zero_sym(size_t n_ch, int ny, int nx) {
  SymGradField f;
  f.c.assign(n_ch, {Grid(ny, nx), Grid(ny, nx), Grid(ny, nx)});
  return f;
}

double estimate_opnorm(const DsOp &ds, size_t n_ch, int ny, int nx,
                       const std::vector<double> &w, int iters = 20) {
  ChannelStack xu(n_ch, Grid(ny, nx));
  GradientField xv = zero_grad(n_ch, ny, nx);
  uint64_t ctr = 0;
  for (auto &g : xu)
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = cplx(counter_uniform(0x9d2c5680, ctr++) - 0.5, counter_uniform(0x9d2c5680, ctr++) - 0.5);
  for (auto &ch : xv.c)
    for (auto &g : ch)
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = cplx(counter_uniform(0x9d2c5680, ctr++) - 0.5, counter_uniform(0x9d2c5680, ctr++) - 0.5);

  double lambda = 1.0;
  for (int it = 0; it < iters; ++it) {
    double nrm = std::sqrt(norm2sq(xu) + norm2sq(xv));
    for (auto &g : xu)
      for (size_t i = 0; i < g.size(); ++i) g[i] /= nrm;
    for (auto &ch : xv.c)
      for (auto &g : ch)
        for (size_t i = 0; i < g.size(); ++i) g[i] /= nrm;

    auto r = ds.apply(xu);
    auto gu = grad(xu);
    GradientField z0row = gu;
    for (size_t l = 0; l < z0row.c.size(); ++l)
      for (int k = 0; k < 2; ++k)
        for (size_t i = 0; i < z0row.c[l][k].size(); ++i)
          z0row.c[l][k][i] = w[l] * z0row.c[l][k][i] - xv.c[l][k][i];
    auto z1row = symgrad(xv);

    auto au = ds.adjoint(r);
    auto d1 = div1(z0row);
    for (size_t l = 0; l < au.size(); ++l)
      for (size_t i = 0; i < au[l].size(); ++i) au[l][i] -= w[l] * d1[l][i];
    auto d2 = div2(z1row);
    GradientField av = zero_grad(z0row.c.size(), ny, nx);
    for (size_t l = 0; l < av.c.size(); ++l)
      for (int k = 0; k < 2; ++k)
        for (size_t i = 0; i < av.c[l][k].size(); ++i)
          av.c[l][k][i] = -z0row.c[l][k][i] - d2.c[l][k][i];

    lambda = std::sqrt(norm2sq(au) + norm2sq(av));
    xu = std::move(au);
    xv = std::move(av);
  }
  return std::sqrt(lambda);
}

bool all_finite(const ChannelStack &s) {
  for (const auto &g : s)
    for (size_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i].real()) || !std::isfinite(g[i].imag())) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// inner solver

PdResult pd_linesearch_solve(const DsOp &ds, const std::vector<Grid> &dtilde,
                             const ChannelStack &uk, const std::vector<RealGrid> &mk,
                             double gamma_k, double delta_k, int iter_k,
                             const SolverConfig &cfg, const ProgressLog &log,
                             const GradientField *v0, const std::vector<double> *chan_w,
                             const std::vector<uint8_t> *real_ch) {
  const size_t n_ch = uk.size();
  const int ny = uk[0].ny(), nx = uk[0].nx();
  const std::vector<double> unit_w(n_ch, 1.0);
  // Per-channel regularization weights enter as a constant diagonal W on the
  // gradient row of K (v lives in the W-scaled space), keeping the Frobenius
  // dual balls isotropic while the data term sees u at its natural scale.
  const std::vector<double> &w_in = chan_w ? *chan_w : unit_w;
  // Substitute v' = v / wmax (and dual ball radii * wmax) so the largest
  // gradient-row weight is 1: the common primal step would otherwise be
  // throttled by the most strongly regularized channel for every unknown.
  double wmax = 1.0;
  for (double ww : w_in) wmax = std::max(wmax, ww);
  std::vector<double> w(w_in);
  for (double &ww : w) ww /= wmax;
  auto wgrad = [&](const ChannelStack &x) {
    GradientField g = grad(x);
    for (size_t l = 0; l < n_ch; ++l)
      if (w[l] != 1.0)
        for (int k = 0; k < 2; ++k)
          for (size_t i = 0; i < g.c[l][k].size(); ++i) g.c[l][k][i] *= w[l];
    return g;
  };
  const double bound0 = cfg.beta0 * gamma_k * wmax;
  const double bound1 = cfg.beta1 * gamma_k * wmax;

  // When the measurement row is much smaller than the gradient rows the
  // common step sizes starve the data term and the residual decays at the
  // generic O(1/m) rate. Amplifying the row by crow and compensating inside
  // the conjugate prox (c2, see prox_dual_r) keeps the objective identical
  // while restoring a balanced operator.
  double nds = 1.0;
  {
    ChannelStack x(n_ch, Grid(ny, nx));
    uint64_t ctr = 1;
    for (auto &g : x)
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = cplx(counter_uniform(0xb5297a4d, ctr++) - 0.5,
                    counter_uniform(0xb5297a4d, ctr++) - 0.5);
    double lambda = 1.0;
    for (int it = 0; it < 12; ++it) {
      double nrm = std::sqrt(norm2sq(x));
      if (!(nrm > 0)) break;
      for (auto &g : x)
        for (size_t i = 0; i < g.size(); ++i) g[i] /= nrm;
      auto y = ds.adjoint(ds.apply(x));
      lambda = std::sqrt(norm2sq(y));
      x = std::move(y);
    }
    nds = std::sqrt(std::max(lambda, 1e-300));
  }
  const double crow = std::max(1.0, std::sqrt(8.0) / nds);
  const double c2 = crow * crow;
  DsOp dspd{[&ds, crow](const ChannelStack &x) {
              auto r = ds.apply(x);
              if (crow != 1.0)
                for (auto &g : r)
                  for (size_t i = 0; i < g.size(); ++i) g[i] *= crow;
              return r;
            },
            [&ds, crow](const std::vector<Grid> &y) {
              auto x = ds.adjoint(y);
              if (crow != 1.0)
                for (auto &g : x)
                  for (size_t i = 0; i < g.size(); ++i) g[i] *= crow;
              return x;
            }};
  std::vector<Grid> dt = dtilde;
  if (crow != 1.0)
    for (auto &g : dt)
      for (size_t i = 0; i < g.size(); ++i) g[i] *= crow;

  ChannelStack u = uk;
  GradientField v = v0 ? *v0 : zero_grad(n_ch, ny, nx);
  if (v0 && wmax != 1.0)
    for (auto &ch : v.c)
      for (auto &g : ch)
        for (size_t i = 0; i < g.size(); ++i) g[i] /= wmax;
  GradientField z0 = zero_grad(n_ch, ny, nx);
  SymGradField z1 = zero_sym(n_ch, ny, nx);
  std::vector<Grid> r(dtilde.size(), Grid(ny, nx));

  ChannelStack khy_u(n_ch, Grid(ny, nx));      // DS^H r - div1 z0
  GradientField khy_v = zero_grad(n_ch, ny, nx);  // -z0 - div2 z1

  double tau = cfg.tau0 > 0 ? cfg.tau0 : 1.0 / estimate_opnorm(ds, n_ch, ny, nx, w);
  double kappa = 1.0, theta = 1.0;

  auto dsu_cur = dspd.apply(u);
  auto gradu_cur = wgrad(u);
  auto symv_cur = symgrad(v);

  // M^{-1}-weighted norm guard for the dual objective
  double m_max = 0, m_min = std::numeric_limits<double>::infinity();
  for (const auto &g : mk)
    for (size_t i = 0; i < g.size(); ++i) {
      m_max = std::max(m_max, g[i]);
      m_min = std::min(m_min, g[i]);
    }
  const double m_eps = 1e-12 * m_max + 1e-300;
  (void)m_min;

  auto primal_objective = [&](double &fid_out) {
    double fid = 0;
    for (size_t n = 0; n < dsu_cur.size(); ++n)
      for (size_t i = 0; i < dsu_cur[n].size(); ++i) fid += std::norm(dsu_cur[n][i] - dt[n][i]);
    fid *= 0.5 / c2;
    fid_out = fid;
    GradientField gmv = gradu_cur;
    for (size_t l = 0; l < n_ch; ++l)
      for (int k = 0; k < 2; ++k)
        for (size_t i = 0; i < gmv.c[l][k].size(); ++i) gmv.c[l][k][i] -= v.c[l][k][i];
    double reg = wmax * gamma_k * cfg.beta0 * frob_norm_12(gmv, unit_w) +
                 wmax * gamma_k * cfg.beta1 * frob_norm_12_sym(symv_cur, unit_w);
    double pen = 0;
    for (size_t l = 0; l < n_ch; ++l)
      for (size_t i = 0; i < u[l].size(); ++i) pen += mk[l][i] * std::norm(u[l][i] - uk[l][i]);
    return fid + reg + 0.5 * delta_k * pen;
  };

  auto dual_objective = [&]() {
    double d = -0.5 * c2 * norm2sq(r);
    for (size_t n = 0; n < r.size(); ++n) d -= dot(dt[n], r[n]).real();
    for (size_t l = 0; l < n_ch; ++l) {
      d += dot(khy_u[l], uk[l]).real();
      double q = 0;
      for (size_t i = 0; i < khy_u[l].size(); ++i) q += std::norm(khy_u[l][i]) / (mk[l][i] + m_eps);
      d -= q / (2.0 * delta_k);
    }
    return d;
  };

  PdResult res;
  double p_prev = 0;
  bool have_prev = false;
  double gap0 = -1;
  int m = 0;

  for (; m < iter_k; ++m) {
    // primal update
    ChannelStack arg(n_ch);
    for (size_t l = 0; l < n_ch; ++l) {
      Grid g(ny, nx);
      for (size_t i = 0; i < g.size(); ++i) g[i] = u[l][i] - tau * khy_u[l][i];
      arg[l] = std::move(g);
    }
    ChannelStack u_new = prox_primal_u(arg, tau, delta_k, mk, uk, real_ch);
    GradientField v_new = v;
    for (size_t l = 0; l < n_ch; ++l)
      for (int k = 0; k < 2; ++k)
        for (size_t i = 0; i < v_new.c[l][k].size(); ++i)
          v_new.c[l][k][i] -= tau * khy_v.c[l][k][i];

    double kappa_new = kappa * (1.0 + delta_k * tau);
    double tau_new = tau * std::sqrt((kappa / kappa_new) * (1.0 + theta));

    auto dsu_new = dspd.apply(u_new);
    auto gradu_new = wgrad(u_new);
    auto symv_new = symgrad(v_new);

    // K-row differences for cheap extrapolation inside the line search:
    // row(xbar) = (1+theta)*row(new) - theta*row(old)
    GradientField g_new = gradu_new, g_old = gradu_cur;
    for (size_t l = 0; l < n_ch; ++l)
      for (int k = 0; k < 2; ++k)
        for (size_t i = 0; i < g_new.c[l][k].size(); ++i) {
          g_new.c[l][k][i] -= v_new.c[l][k][i];
          g_old.c[l][k][i] -= v.c[l][k][i];
        }

    GradientField z0_new;
    SymGradField z1_new;
    std::vector<Grid> r_new;
    ChannelStack a;
    GradientField b;
    double theta_new = theta;

    while (true) {
      theta_new = tau_new / tau;
      double sigma = kappa_new * tau_new;
      double c1 = 1.0 + theta_new, c0 = theta_new;

      z0_new = z0;
      for (size_t l = 0; l < n_ch; ++l)
        for (int k = 0; k < 2; ++k)
          for (size_t i = 0; i < z0_new.c[l][k].size(); ++i)
            z0_new.c[l][k][i] += sigma * (c1 * g_new.c[l][k][i] - c0 * g_old.c[l][k][i]);
      prox_dual_z0(z0_new, bound0);

      z1_new = z1;
      for (size_t l = 0; l < n_ch; ++l)
        for (int k = 0; k < 3; ++k)
          for (size_t i = 0; i < z1_new.c[l][k].size(); ++i)
            z1_new.c[l][k][i] += sigma * (c1 * symv_new.c[l][k][i] - c0 * symv_cur.c[l][k][i]);
      prox_dual_z1(z1_new, bound1);

      r_new = r;
      for (size_t n = 0; n < r_new.size(); ++n)
        for (size_t i = 0; i < r_new[n].size(); ++i)
          r_new[n][i] += sigma * (c1 * dsu_new[n][i] - c0 * dsu_cur[n][i]);
      prox_dual_r(r_new, sigma, dt, c2);

      // K^H (y_new - y)
      GradientField dz0 = z0_new;
      for (size_t l = 0; l < n_ch; ++l)
        for (int k = 0; k < 2; ++k)
          for (size_t i = 0; i < dz0.c[l][k].size(); ++i) dz0.c[l][k][i] -= z0.c[l][k][i];
      SymGradField dz1 = z1_new;
      for (size_t l = 0; l < n_ch; ++l)
        for (int k = 0; k < 3; ++k)
          for (size_t i = 0; i < dz1.c[l][k].size(); ++i) dz1.c[l][k][i] -= z1.c[l][k][i];
      std::vector<Grid> dr = r_new;
      for (size_t n = 0; n < dr.size(); ++n)
        for (size_t i = 0; i < dr[n].size(); ++i) dr[n][i] -= r[n][i];

      a = dspd.adjoint(dr);
      auto d1 = div1(dz0);
      for (size_t l = 0; l < n_ch; ++l)
        for (size_t i = 0; i < a[l].size(); ++i) a[l][i] -= w[l] * d1[l][i];
      auto d2 = div2(dz1);
      b = zero_grad(n_ch, ny, nx);
      for (size_t l = 0; l < n_ch; ++l)
        for (int k = 0; k < 2; ++k)
          for (size_t i = 0; i < b.c[l][k].size(); ++i)
            b.c[l][k][i] = -dz0.c[l][k][i] - d2.c[l][k][i];

      double lhs = std::sqrt(kappa_new) * tau_new * std::sqrt(norm2sq(a) + norm2sq(b));
      double rhs = std::sqrt(norm2sq(dz0) + norm2sq(dz1) + norm2sq(dr));
      if (lhs <= rhs) break;
      tau_new *= cfg.mu;
      if (tau_new < 1e-30)
        throw solver_error("pd_linesearch_solve: line-search step underflow at iteration " +
                           std::to_string(m));
    }

    // accept
    theta = theta_new;
    tau = tau_new;
    kappa = kappa_new;
    u = std::move(u_new);
    v = std::move(v_new);
    z0 = std::move(z0_new);
    z1 = std::move(z1_new);
    r = std::move(r_new);
    dsu_cur = std::move(dsu_new);
    gradu_cur = std::move(gradu_new);
    symv_cur = std::move(symv_new);
    for (size_t l = 0; l < n_ch; ++l) {
      for (size_t i = 0; i < khy_u[l].size(); ++i) khy_u[l][i] += a[l][i];
      for (int k = 0; k < 2; ++k)
        for (size_t i = 0; i < khy_v.c[l][k].size(); ++i) khy_v.c[l][k][i] += b.c[l][k][i];
    }

    if (!all_finite(u)) throw solver_error("pd_linesearch_solve: non-finite iterate");

    if ((m + 1) % 10 == 0 || m + 1 == iter_k) {
      double fid = 0;
      double p = primal_objective(fid);
      double gap = std::abs(p - dual_objective());
      if (gap0 <= 0) gap0 = std::max(gap, 1e-300);
      double ngap = gap / gap0;
      res.fidelity = fid;
      res.gap = ngap;
      if (log) {
        std::ostringstream os;
        os << "{\"event\":\"pd_check\",\"iter\":" << (m + 1) << ",\"primal\":" << p
           << ",\"gap\":" << ngap << ",\"tau\":" << tau << "}";
        log(os.str());
      }
      bool small_gap = ngap < cfg.tol;
      bool small_decrease = have_prev && std::abs(p_prev - p) / std::max(std::abs(p_prev), 1e-300) < cfg.tol;
      p_prev = p;
      have_prev = true;
      if (small_gap || small_decrease) {
        res.hit_tol = true;
        ++m;
        break;
      }
    }
  }

  res.u = std::move(u);
  if (wmax != 1.0)
    for (auto &ch : v.c)
      for (auto &g : ch)
        for (size_t i = 0; i < g.size(); ++i) g[i] *= wmax;
  res.v = std::move(v);
  res.iters = m;
  return res;
}

// ---------------------------------------------------------------------------
// outer Gauss-Newton loop

UnknownMaps default_init(const KSpaceSeries &data) {
  const auto &p = data.protocol;
  int hi_field = 0;
  for (int i = 1; i < p.n_fields(); ++i)
    if (p.evolution_fields_T[i] > p.evolution_fields_T[hi_field]) hi_field = i;
  // measurement index of the shortest (last, stored descending) time
  int idx = 0;
  for (int i = 0; i < hi_field; ++i) idx += static_cast<int>(p.evolution_times_s[i].size());
  idx += static_cast<int>(p.evolution_times_s[hi_field].size()) - 1;
  double t_min = p.evolution_times_s[hi_field].back();

  Grid img = ifft2c(data.data[idx]);
  const double t1_init = 0.15;
  const double rho = p.evolution_fields_T[hi_field] / p.detection_field_T;
  double E = std::exp(-t_min / t1_init);
  double bracket = -E + rho * (1.0 - E);  // alpha = 1
  if (std::abs(bracket) < 1e-3) bracket = bracket < 0 ? -1e-3 : 1e-3;

  UnknownMaps m = UnknownMaps::zeros(p.n_fields(), p.ny, p.nx);
  for (size_t i = 0; i < img.size(); ++i) m.C[i] = img[i] / bracket;
  for (auto &al : m.alpha)
    for (size_t i = 0; i < al.size(); ++i) al[i] = 1.0;
  return m;
}

UnknownMaps irgn_reconstruct(const KSpaceSeries &data, const SolverConfig &cfg,
                             const ProgressLog &log) {
  data.validate();
  cfg.validate();
  const auto &protocol = data.protocol;
  const int n_e = protocol.n_fields();
  const size_t n_ch = 1 + 2 * static_cast<size_t>(n_e);
  const auto weights = cfg.per_channel_weights(n_e);
  // T1 channels (last n_e of [C, alpha_1..alpha_Ne, T1_1..T1_Ne]) are
  // physically real; constraining them inside the inner solver removes a
  // spurious imaginary noise degree of freedom.
  std::vector<uint8_t> real_channels(n_ch, 0);
  for (int l = 0; l < n_e; ++l) real_channels[1 + n_e + l] = 1;

  UnknownMaps u = default_init(data);
  double tau0 = cfg.tau0;
  GradientField v_carry;  // unscaled; re-scaled per step alongside u

  for (int k = 0; k < cfg.n_gn; ++k) {
    auto step = irgn_schedule(k, cfg);

    ChannelStack uk_stack = maps_to_stack(u);
    std::vector<double> scales(n_ch);
    for (size_t l = 0; l < n_ch; ++l) {
      double linf = 0;
      for (size_t i = 0; i < uk_stack[l].size(); ++i) linf = std::max(linf, std::abs(uk_stack[l][i]));
      scales[l] = 1.0 / std::max(linf, 1e-12);
    }

    detail::Linearization lin(u, protocol, scales);
    auto raw_op = lin.as_op();
    // Per-pixel data normalization: with the unitary DFT the fidelity would
    // grow with the pixel count, so the fixed gamma schedule would stop
    // denoising at higher resolutions. Scaling the measurement row of K by
    // 1/sqrt(N) keeps the fidelity-regularization balance resolution-free.
    const double fscale =
        cfg.data_scale / std::sqrt(static_cast<double>(protocol.nx) * protocol.ny);
    DsOp dsop;
    dsop.apply = [raw_op, fscale](const ChannelStack &x) {
      auto r = raw_op.apply(x);
      for (auto &g : r)
        for (size_t i = 0; i < g.size(); ++i) g[i] *= fscale;
      return r;
    };
    dsop.adjoint = [raw_op, fscale](const std::vector<Grid> &r) {
      auto rs = r;
      for (auto &g : rs)
        for (size_t i = 0; i < g.size(); ++i) g[i] *= fscale;
      return raw_op.adjoint(rs);
    };

    // scaled linearization point
    ChannelStack uk_scaled(n_ch);
    for (size_t l = 0; l < n_ch; ++l) {
      Grid g = uk_stack[l];
      for (size_t i = 0; i < g.size(); ++i) g[i] *= scales[l];
      uk_scaled[l] = std::move(g);
    }

    std::vector<RealGrid> mk;
    if (cfg.mk_mode == MkMode::levenberg_marquardt) {
      mk = lin.diag_normal();
      for (auto &g : mk)
        for (size_t i = 0; i < g.size(); ++i) g[i] *= fscale * fscale;
    } else {
      mk.assign(n_ch, RealGrid(protocol.ny, protocol.nx, 1.0));
      for (size_t l = 0; l < n_ch; ++l)
        for (size_t i = 0; i < mk[l].size(); ++i)
          mk[l][i] = fscale * fscale / (scales[l] * scales[l]);
    }

    // dtilde = d - S(u^k) + DS u^k, in the normalized fidelity scale
    auto su = fourier_sample(forward_image(u, protocol), protocol.mask);
    auto dsuk = lin.apply_kspace(uk_scaled);
    std::vector<Grid> dtilde(data.data.size());
    for (size_t n = 0; n < dtilde.size(); ++n) {
      Grid g(protocol.ny, protocol.nx);
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = fscale * (data.data[n][i] - su.data[n][i] + dsuk[n][i]);
      dtilde[n] = std::move(g);
    }

    if (tau0 <= 0) tau0 = 1.0 / estimate_opnorm(dsop, n_ch, protocol.ny, protocol.nx, weights);
    SolverConfig inner = cfg;
    inner.tau0 = tau0;

    GradientField v_scaled;
    const GradientField *v0 = nullptr;
    if (!v_carry.c.empty()) {
      v_scaled = v_carry;
      for (size_t l = 0; l < n_ch; ++l)
        for (int c = 0; c < 2; ++c)
          for (size_t i = 0; i < v_scaled.c[l][c].size(); ++i)
            v_scaled.c[l][c][i] *= scales[l] * weights[l];
      v0 = &v_scaled;
    }

    PdResult res;
    try {
      res = pd_linesearch_solve(dsop, dtilde, uk_scaled, mk, step.gamma, step.delta, step.iters,
                                inner, log, v0, &weights, &real_channels);
    } catch (const solver_error &e) {
      throw solver_error("irgn_reconstruct: GN step " + std::to_string(k) + ": " + e.what());
    }

    ChannelStack u_new(n_ch);
    for (size_t l = 0; l < n_ch; ++l) {
      Grid g = res.u[l];
      for (size_t i = 0; i < g.size(); ++i) g[i] /= scales[l];
      u_new[l] = std::move(g);
    }
    u = stack_to_maps(u_new);
    // ratio of the auxiliary field to the weighted gradient it shadows;
    // near zero the regularizer degenerates to plain (weighted) TV
    double vg_gn2 = 0, vg_vn2 = 0;
    {
      auto gu = grad(res.u);
      for (size_t l = 0; l < n_ch; ++l)
        for (int c = 0; c < 2; ++c)
          for (size_t i = 0; i < gu.c[l][c].size(); ++i) {
            vg_gn2 += weights[l] * weights[l] * std::norm(gu.c[l][c][i]);
            vg_vn2 += std::norm(res.v.c[l][c][i]);
          }
    }
    v_carry = std::move(res.v);
    for (size_t l = 0; l < n_ch; ++l)
      for (int c = 0; c < 2; ++c)
        for (size_t i = 0; i < v_carry.c[l][c].size(); ++i)
          v_carry.c[l][c][i] /= scales[l] * weights[l];

    if (log) {
      std::ostringstream os;
      os << "{\"event\":\"gn_step\",\"k\":" << k << ",\"gamma\":" << step.gamma
         << ",\"delta\":" << step.delta << ",\"iters\":" << res.iters
         << ",\"fidelity\":" << res.fidelity << ",\"gap\":" << res.gap
         << ",\"v_ratio\":" << std::sqrt(vg_vn2 / (vg_gn2 + 1e-300)) << "}";
      log(os.str());
    }
  }
  return u;
}

}  // namespace ffc
