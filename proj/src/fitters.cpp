#include "ffc/fitters.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "ffc/rng.hpp"
#include "ffc/signal_model.hpp"
#include "linearized.hpp"

namespace ffc {

void PixelFitConfig::validate() const {
  if (!(tikhonov_weight >= 0)) throw std::invalid_argument("PixelFitConfig: negative tikhonov_weight");
  if (max_nlls_iters <= 0) throw std::invalid_argument("PixelFitConfig: max_nlls_iters must be positive");
  if (!(step_tol > 0)) throw std::invalid_argument("PixelFitConfig: step_tol must be positive");
}

namespace {

constexpr double kT1InitFit = 0.15;

// One pixel's data for a damped least-squares fit: complex samples with their
// evolution times and field ratios.
struct PixelSamples {
  std::vector<cplx> s;
  std::vector<double> t;
  std::vector<double> rho;  // B0E / B0 per sample
};

// Levenberg-Marquardt over x = [Re C, Im C, (Re a_f, Im a_f, T1_f) x nf].
// Returns true when the step norm dropped below tol.
bool lm_fit(const PixelSamples &d, const std::vector<int> &field_of, int nf,
            Eigen::VectorXd &x, const PixelFitConfig &cfg) {
  const int np = 2 + 3 * nf;
  const int ns = static_cast<int>(d.s.size());
  const double lam = cfg.tikhonov_weight;

  auto unpack = [&](const Eigen::VectorXd &p, int f, cplx &C, cplx &al, double &T1) {
    C = cplx(p[0], p[1]);
    al = cplx(p[2 + 3 * f], p[3 + 3 * f]);
    T1 = p[4 + 3 * f];
  };

  auto cost = [&](const Eigen::VectorXd &p) {
    double c = 0;
    for (int n = 0; n < ns; ++n) {
      cplx C, al;
      double T1;
      unpack(p, field_of[n], C, al, T1);
      cplx r = signal_scalar(C, al, T1, d.t[n], 1.0, d.rho[n]) - d.s[n];
      c += std::norm(r);
    }
    return c + lam * p.squaredNorm();
  };

  double nu = 1e-3;
  double c_cur = cost(x);
  Eigen::MatrixXd J(2 * ns, np);
  Eigen::VectorXd r(2 * ns);

  for (int it = 0; it < cfg.max_nlls_iters; ++it) {
    J.setZero();
    for (int n = 0; n < ns; ++n) {
      const int f = field_of[n];
      cplx C, al;
      double T1;
      unpack(x, f, C, al, T1);
      auto p = signal_partials(C, al, T1, d.t[n], 1.0, d.rho[n]);
      cplx res = p.s - d.s[n];
      r[2 * n] = res.real();
      r[2 * n + 1] = res.imag();
      auto put = [&](int col, cplx dd) {
        J(2 * n, col) = dd.real();
        J(2 * n + 1, col) = dd.imag();
      };
      put(0, p.d_C);
      put(1, cplx(0, 1) * p.d_C);
      put(2 + 3 * f, p.d_alpha);
      put(3 + 3 * f, cplx(0, 1) * p.d_alpha);
      put(4 + 3 * f, p.d_T1);
    }
    Eigen::MatrixXd H = J.transpose() * J;
    Eigen::VectorXd g = J.transpose() * r + lam * x;
    Eigen::VectorXd dgn = H.diagonal().cwiseMax(1e-12);
    Eigen::MatrixXd A = H + lam * Eigen::MatrixXd::Identity(np, np);
    A.diagonal() += nu * dgn;
    Eigen::VectorXd step = A.ldlt().solve(-g);
    if (!step.allFinite()) return false;

    Eigen::VectorXd x_try = x + step;
    for (int f = 0; f < nf; ++f)
      x_try[4 + 3 * f] = std::clamp(x_try[4 + 3 * f], UnknownMaps::kT1Floor,
                                    UnknownMaps::kT1Ceiling * (1.0 - 1e-4));
    double c_try = cost(x_try);
    if (c_try < c_cur) {
      x = x_try;
      c_cur = c_try;
      nu = std::max(nu * 0.1, 1e-12);
      if (step.norm() < cfg.step_tol) return true;
    } else {
      nu *= 10.0;
      if (nu > 1e12) return false;
    }
  }
  return false;
}

// Initial C estimate from the longest-recovery (first stored) sample of the
// highest field, assuming alpha = 1, T1 = kT1InitFit.
cplx init_c(const PixelSamples &d) {
  int best = 0;
  for (int n = 1; n < static_cast<int>(d.s.size()); ++n)
    if (d.rho[n] > d.rho[best] || (d.rho[n] == d.rho[best] && d.t[n] > d.t[best])) best = n;
  double E = std::exp(-d.t[best] / kT1InitFit);
  double bracket = -E + d.rho[best] * (1.0 - E);
  if (std::abs(bracket) < 1e-3) bracket = bracket < 0 ? -1e-3 : 1e-3;
  return d.s[best] / bracket;
}

ImageSeries maybe_presmooth(const ImageSeries &images, const PixelFitConfig &cfg) {
  if (!cfg.presmooth) return images;
  auto ks = fourier_sample(images, std::nullopt);
  return fourier_adjoint(kspace_filter(ks, cfg.filter), std::nullopt);
}

}  // namespace

FitResult fit_pixelwise_single_field(const ImageSeries &images, const PixelFitConfig &cfg) {
  cfg.validate();
  images.validate();
  const auto &p = images.protocol;
  ImageSeries img = maybe_presmooth(images, cfg);

  FitResult out;
  out.maps = UnknownMaps::zeros(p.n_fields(), p.ny, p.nx);
  int hi = 0;
  for (int f = 1; f < p.n_fields(); ++f)
    if (p.evolution_fields_T[f] > p.evolution_fields_T[hi]) hi = f;

  int base = 0;
  for (int f = 0; f < p.n_fields(); ++f) {
    const int nt = static_cast<int>(p.evolution_times_s[f].size());
    const double rho = p.evolution_fields_T[f] / p.detection_field_T;
    std::vector<int> field_of(nt, 0);
    for (size_t i = 0; i < img.data[0].size(); ++i) {
      PixelSamples d;
      d.s.resize(nt);
      d.t = p.evolution_times_s[f];
      d.rho.assign(nt, rho);
      for (int n = 0; n < nt; ++n) d.s[n] = img.data[base + n][i];

      Eigen::VectorXd x(5);
      cplx c0 = init_c(d);
      x << c0.real(), c0.imag(), 1.0, 0.0, kT1InitFit;
      if (!lm_fit(d, field_of, 1, x, cfg)) ++out.failed_pixels;
      if (f == hi) out.maps.C[i] = cplx(x[0], x[1]);
      out.maps.alpha[f][i] = cplx(x[2], x[3]);
      out.maps.t1[f][i] = x[4];
    }
    base += nt;
  }
  return out;
}

FitResult fit_pixelwise_multifield(const ImageSeries &images, const PixelFitConfig &cfg) {
  cfg.validate();
  images.validate();
  const auto &p = images.protocol;
  const int nf = p.n_fields();
  auto meas = p.measurements();

  FitResult out;
  out.maps = UnknownMaps::zeros(nf, p.ny, p.nx);

  std::vector<int> field_of(meas.size());
  std::vector<double> times(meas.size()), rhos(meas.size());
  for (size_t n = 0; n < meas.size(); ++n) {
    field_of[n] = meas[n].field;
    times[n] = meas[n].time_s;
    rhos[n] = p.evolution_fields_T[meas[n].field] / p.detection_field_T;
  }

  for (size_t i = 0; i < images.data[0].size(); ++i) {
    PixelSamples d;
    d.s.resize(meas.size());
    d.t = times;
    d.rho = rhos;
    for (size_t n = 0; n < meas.size(); ++n) d.s[n] = images.data[n][i];

    Eigen::VectorXd x(2 + 3 * nf);
    cplx c0 = init_c(d);
    x[0] = c0.real();
    x[1] = c0.imag();
    for (int f = 0; f < nf; ++f) {
      x[2 + 3 * f] = 1.0;
      x[3 + 3 * f] = 0.0;
      x[4 + 3 * f] = kT1InitFit;
    }
    if (!lm_fit(d, field_of, nf, x, cfg)) ++out.failed_pixels;
    out.maps.C[i] = cplx(x[0], x[1]);
    for (int f = 0; f < nf; ++f) {
      out.maps.alpha[f][i] = cplx(x[2 + 3 * f], x[3 + 3 * f]);
      out.maps.t1[f][i] = x[4 + 3 * f];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// H1-regularized IRGN with a Nesterov accelerated gradient inner solver

namespace {

double estimate_ds_norm(const DsOp &ds, size_t n_ch, int ny, int nx, int iters = 20) {
  ChannelStack x(n_ch, Grid(ny, nx));
  uint64_t ctr = 0;
  for (auto &g : x)
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = cplx(counter_uniform(0x5851f42d, ctr++) - 0.5, counter_uniform(0x5851f42d, ctr++) - 0.5);
  double lambda = 1.0;
  for (int it = 0; it < iters; ++it) {
    double nrm = std::sqrt(norm2sq(x));
    for (auto &g : x)
      for (size_t i = 0; i < g.size(); ++i) g[i] /= nrm;
    auto y = ds.adjoint(ds.apply(x));
    lambda = std::sqrt(norm2sq(y));
    x = std::move(y);
  }
  return std::sqrt(lambda);
}

}  // namespace

UnknownMaps fit_h1(const KSpaceSeries &data, const SolverConfig &cfg, const ProgressLog &log) {
  data.validate();
  cfg.validate();
  const auto &protocol = data.protocol;
  const int n_e = protocol.n_fields();
  const size_t n_ch = 1 + 2 * static_cast<size_t>(n_e);
  const auto weights = cfg.per_channel_weights(n_e);
  const int ny = protocol.ny, nx = protocol.nx;

  UnknownMaps u = default_init(data);
  double lds = -1;

  for (int k = 0; k < cfg.n_gn; ++k) {
    auto step = irgn_schedule(k, cfg);

    ChannelStack uk_stack = maps_to_stack(u);
    std::vector<double> scales(n_ch);
    for (size_t l = 0; l < n_ch; ++l) {
      double linf = 0;
      for (size_t i = 0; i < uk_stack[l].size(); ++i) linf = std::max(linf, std::abs(uk_stack[l][i]));
      scales[l] = weights[l] / std::max(linf, 1e-12);
    }

    detail::Linearization lin(u, protocol, scales);
    auto raw_op = lin.as_op();
    // same per-pixel fidelity normalization as the TGV reconstruction
    const double fscale = cfg.data_scale / std::sqrt(static_cast<double>(nx) * ny);
    DsOp dsop;
    dsop.apply = [raw_op, fscale](const ChannelStack &z) {
      auto r = raw_op.apply(z);
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

    ChannelStack uk(n_ch);
    for (size_t l = 0; l < n_ch; ++l) {
      Grid g = uk_stack[l];
      for (size_t i = 0; i < g.size(); ++i) g[i] *= scales[l];
      uk[l] = std::move(g);
    }

    std::vector<RealGrid> mk;
    if (cfg.mk_mode == MkMode::levenberg_marquardt) {
      mk = lin.diag_normal();
      for (auto &g : mk)
        for (size_t i = 0; i < g.size(); ++i) g[i] *= fscale * fscale;
    } else {
      mk.assign(n_ch, RealGrid(ny, nx));
      for (size_t l = 0; l < n_ch; ++l)
        for (size_t i = 0; i < mk[l].size(); ++i)
          mk[l][i] = fscale * fscale / (scales[l] * scales[l]);
    }
    double m_max = 0;
    for (const auto &g : mk)
      for (size_t i = 0; i < g.size(); ++i) m_max = std::max(m_max, g[i]);

    auto su = fourier_sample(forward_image(u, protocol), protocol.mask);
    auto dsuk = lin.apply_kspace(uk);
    std::vector<Grid> dtilde(data.data.size());
    for (size_t n = 0; n < dtilde.size(); ++n) {
      Grid g(ny, nx);
      for (size_t i = 0; i < g.size(); ++i)
        g[i] = fscale * (data.data[n][i] - su.data[n][i] + dsuk[n][i]);
      dtilde[n] = std::move(g);
    }

    // the channel scaling changes every step, so the Lipschitz bound must too
    lds = estimate_ds_norm(dsop, n_ch, ny, nx);
    const double lips = lds * lds + 16.0 * step.gamma + step.delta * m_max;
    const double tau = 1.0 / lips;

    auto objective = [&](const ChannelStack &z, const std::vector<Grid> &dsz) {
      double fid = 0;
      for (size_t n = 0; n < dsz.size(); ++n)
        for (size_t i = 0; i < dsz[n].size(); ++i) fid += std::norm(dsz[n][i] - dtilde[n][i]);
      auto gz = grad(z);
      double pen = 0;
      for (size_t l = 0; l < n_ch; ++l)
        for (size_t i = 0; i < z[l].size(); ++i) pen += mk[l][i] * std::norm(z[l][i] - uk[l][i]);
      return 0.5 * fid + step.gamma * norm2sq(gz) + 0.5 * step.delta * pen;
    };

    ChannelStack x = uk, y = uk;
    double t_mom = 1.0;
    double obj_prev = -1;

    for (int m = 0; m < step.iters; ++m) {
      auto dsy = dsop.apply(y);
      for (size_t n = 0; n < dsy.size(); ++n)
        for (size_t i = 0; i < dsy[n].size(); ++i) dsy[n][i] -= dtilde[n][i];
      ChannelStack gradF = dsop.adjoint(dsy);
      auto d1 = div1(grad(y));
      for (size_t l = 0; l < n_ch; ++l)
        for (size_t i = 0; i < gradF[l].size(); ++i) {
          gradF[l][i] += -2.0 * step.gamma * d1[l][i] +
                         step.delta * mk[l][i] * (y[l][i] - uk[l][i]);
        }

      ChannelStack x_new(n_ch);
      for (size_t l = 0; l < n_ch; ++l) {
        const bool re_only = l >= static_cast<size_t>(1 + n_e);  // T1 channels are real
        Grid g(ny, nx);
        for (size_t i = 0; i < g.size(); ++i) {
          cplx p = y[l][i] - tau * gradF[l][i];
          g[i] = re_only ? cplx(p.real(), 0.0) : p;
        }
        x_new[l] = std::move(g);
      }

      double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
      double beta = (t_mom - 1.0) / t_new;
      for (size_t l = 0; l < n_ch; ++l)
        for (size_t i = 0; i < y[l].size(); ++i)
          y[l][i] = x_new[l][i] + beta * (x_new[l][i] - x[l][i]);
      x = std::move(x_new);
      t_mom = t_new;

      if ((m + 1) % 10 == 0 || m + 1 == step.iters) {
        double obj = objective(x, dsop.apply(x));
        if (obj_prev >= 0 && obj > obj_prev) {  // restart momentum
          y = x;
          t_mom = 1.0;
        }
        if (obj_prev >= 0 &&
            std::abs(obj_prev - obj) / std::max(std::abs(obj_prev), 1e-300) < cfg.tol) {
          obj_prev = obj;
          break;
        }
        obj_prev = obj;
      }
    }

    ChannelStack u_new(n_ch);
    for (size_t l = 0; l < n_ch; ++l) {
      Grid g = x[l];
      for (size_t i = 0; i < g.size(); ++i) g[i] /= scales[l];
      u_new[l] = std::move(g);
    }
    u = stack_to_maps(u_new);

    if (log) {
      std::ostringstream os;
      os << "{\"event\":\"h1_gn_step\",\"k\":" << k << ",\"gamma\":" << step.gamma
         << ",\"delta\":" << step.delta << ",\"objective\":" << obj_prev << "}";
      log(os.str());
    }
  }
  return u;
}

}  // namespace ffc
