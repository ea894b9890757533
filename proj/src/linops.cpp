#include "ffc/linops.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace ffc {

// ---------------------------------------------------------------------------
// finite differences

GradientField grad(const ChannelStack &u) {
  GradientField out;
  out.c.resize(u.size());
  for (size_t l = 0; l < u.size(); ++l) {
    const Grid &g = u[l];
    const int ny = g.ny(), nx = g.nx();
    Grid gx(ny, nx), gy(ny, nx);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        gx(y, x) = (x + 1 < nx) ? g(y, x + 1) - g(y, x) : cplx{};
        gy(y, x) = (y + 1 < ny) ? g(y + 1, x) - g(y, x) : cplx{};
      }
    out.c[l] = {std::move(gx), std::move(gy)};
  }
  return out;
}

ChannelStack div1(const GradientField &v) {
  ChannelStack out(v.c.size());
  for (size_t l = 0; l < v.c.size(); ++l) {
    const Grid &vx = v.c[l][0], &vy = v.c[l][1];
    const int ny = vx.ny(), nx = vx.nx();
    Grid d(ny, nx);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        cplx s{};
        // backward difference with v[-1] = 0 and the last sample dropped
        if (nx > 1) {
          if (x == 0) s += vx(y, 0);
          else if (x == nx - 1) s += -vx(y, nx - 2);
          else s += vx(y, x) - vx(y, x - 1);
        }
        if (ny > 1) {
          if (y == 0) s += vy(0, x);
          else if (y == ny - 1) s += -vy(ny - 2, x);
          else s += vy(y, x) - vy(y - 1, x);
        }
        d(y, x) = s;
      }
    out[l] = std::move(d);
  }
  return out;
}

namespace {
// backward difference with symmetric extension: w[0] - w[-1] = 0
inline cplx bdiff_x(const Grid &w, int y, int x) { return x == 0 ? cplx{} : w(y, x) - w(y, x - 1); }
inline cplx bdiff_y(const Grid &w, int y, int x) { return y == 0 ? cplx{} : w(y, x) - w(y - 1, x); }

// negative adjoint of the backward difference: forward difference of the
// field with its first sample zeroed and zero extension past the end
inline cplx nadj_bdiff_x(const Grid &r, int y, int x) {
  const int nx = r.nx();
  cplx cur = (x == 0) ? cplx{} : r(y, x);
  cplx nxt = (x + 1 < nx) ? r(y, x + 1) : cplx{};
  return nxt - cur;
}
inline cplx nadj_bdiff_y(const Grid &r, int y, int x) {
  const int ny = r.ny();
  cplx cur = (y == 0) ? cplx{} : r(y, x);
  cplx nxt = (y + 1 < ny) ? r(y + 1, x) : cplx{};
  return nxt - cur;
}
}  // namespace

SymGradField symgrad(const GradientField &v) {
  SymGradField out;
  out.c.resize(v.c.size());
  for (size_t l = 0; l < v.c.size(); ++l) {
    const Grid &v1 = v.c[l][0], &v2 = v.c[l][1];
    const int ny = v1.ny(), nx = v1.nx();
    Grid x1(ny, nx), x2(ny, nx), x3(ny, nx);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        x1(y, x) = bdiff_x(v1, y, x);
        x2(y, x) = bdiff_y(v2, y, x);
        x3(y, x) = 0.5 * (bdiff_y(v1, y, x) + bdiff_x(v2, y, x));
      }
    out.c[l] = {std::move(x1), std::move(x2), std::move(x3)};
  }
  return out;
}

GradientField div2(const SymGradField &x) {
  GradientField out;
  out.c.resize(x.c.size());
  for (size_t l = 0; l < x.c.size(); ++l) {
    const Grid &x1 = x.c[l][0], &x2 = x.c[l][1], &x3 = x.c[l][2];
    const int ny = x1.ny(), nx = x1.nx();
    Grid d1(ny, nx), d2(ny, nx);
    for (int yy = 0; yy < ny; ++yy)
      for (int xx = 0; xx < nx; ++xx) {
        // the factor-2 pairing on the third component cancels the 1/2 in symgrad
        d1(yy, xx) = nadj_bdiff_x(x1, yy, xx) + nadj_bdiff_y(x3, yy, xx);
        d2(yy, xx) = nadj_bdiff_y(x2, yy, xx) + nadj_bdiff_x(x3, yy, xx);
      }
    out.c[l] = {std::move(d1), std::move(d2)};
  }
  return out;
}

double frob_norm_12(const GradientField &v, const std::vector<double> &weights) {
  const int ny = v.c[0][0].ny(), nx = v.c[0][0].nx();
  double total = 0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double s = 0;
      for (size_t l = 0; l < v.c.size(); ++l) {
        double w2 = weights[l] * weights[l];
        s += w2 * (std::norm(v.c[l][0](y, x)) + std::norm(v.c[l][1](y, x)));
      }
      total += std::sqrt(s);
    }
  return total;
}

double frob_norm_12_sym(const SymGradField &v, const std::vector<double> &weights) {
  const int ny = v.c[0][0].ny(), nx = v.c[0][0].nx();
  double total = 0;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double s = 0;
      for (size_t l = 0; l < v.c.size(); ++l) {
        double w2 = weights[l] * weights[l];
        s += w2 * (std::norm(v.c[l][0](y, x)) + std::norm(v.c[l][1](y, x)) +
                   2.0 * std::norm(v.c[l][2](y, x)));
      }
      total += std::sqrt(s);
    }
  return total;
}

// ---------------------------------------------------------------------------
// centered unitary Fourier transform (FFTW backed, plans cached per size)

namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

std::mutex g_plan_mutex;
std::map<std::pair<int, int>, PlanPair> g_plans;

PlanPair get_plans(int ny, int nx) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto key = std::make_pair(ny, nx);
  auto it = g_plans.find(key);
  if (it != g_plans.end()) return it->second;
  std::vector<cplx> buf(static_cast<size_t>(ny) * nx);
  auto *p = reinterpret_cast<fftw_complex *>(buf.data());
  PlanPair pp;
  pp.fwd = fftw_plan_dft_2d(ny, nx, p, p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  pp.bwd = fftw_plan_dft_2d(ny, nx, p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  g_plans[key] = pp;
  return pp;
}

// dst[(y+sy)%ny][(x+sx)%nx] = src[y][x]
void shifted_copy(const Grid &src, Grid &dst, int sy, int sx) {
  const int ny = src.ny(), nx = src.nx();
  for (int y = 0; y < ny; ++y) {
    int yd = (y + sy) % ny;
    for (int x = 0; x < nx; ++x) dst(yd, (x + sx) % nx) = src(y, x);
  }
}

Grid centered_dft(const Grid &in, bool forward) {
  const int ny = in.ny(), nx = in.nx();
  auto plans = get_plans(ny, nx);
  Grid buf(ny, nx), out(ny, nx);
  // ifftshift before, fftshift after
  shifted_copy(in, buf, (ny + 1) / 2, (nx + 1) / 2);
  auto *p = reinterpret_cast<fftw_complex *>(buf.data());
  fftw_execute_dft(forward ? plans.fwd : plans.bwd, p, p);
  shifted_copy(buf, out, ny / 2, nx / 2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(ny) * nx);
  for (size_t i = 0; i < out.size(); ++i) out[i] *= scale;
  return out;
}

}  // namespace

Grid fft2c(const Grid &img) { return centered_dft(img, true); }
Grid ifft2c(const Grid &ks) { return centered_dft(ks, false); }

KSpaceSeries fourier_sample(const ImageSeries &img,
                            const std::optional<std::vector<uint8_t>> &mask) {
  KSpaceSeries out;
  out.protocol = img.protocol;
  out.data.reserve(img.data.size());
  for (const auto &g : img.data) {
    Grid k = fft2c(g);
    if (mask)
      for (size_t i = 0; i < k.size(); ++i)
        if (!(*mask)[i]) k[i] = cplx{};
    out.data.push_back(std::move(k));
  }
  return out;
}

ImageSeries fourier_adjoint(const KSpaceSeries &ks,
                            const std::optional<std::vector<uint8_t>> &mask) {
  ImageSeries out;
  out.protocol = ks.protocol;
  out.data.reserve(ks.data.size());
  for (const auto &g : ks.data) {
    if (mask) {
      Grid m = g;
      for (size_t i = 0; i < m.size(); ++i)
        if (!(*mask)[i]) m[i] = cplx{};
      out.data.push_back(ifft2c(m));
    } else {
      out.data.push_back(ifft2c(g));
    }
  }
  return out;
}

double filter_gain(double k_abs, const FilterConfig &cfg) {
  return 0.5 + std::atan(cfg.slope * (cfg.cutoff_radius - k_abs) / cfg.cutoff_radius) / M_PI;
}

Grid kspace_filter_grid(const Grid &ks, const FilterConfig &cfg) {
  const int ny = ks.ny(), nx = ks.nx();
  const int cy = ny / 2, cx = nx / 2;  // centered DC bin
  Grid out(ny, nx);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double k = std::hypot(double(y - cy), double(x - cx));
      out(y, x) = ks(y, x) * filter_gain(k, cfg);
    }
  return out;
}

KSpaceSeries kspace_filter(const KSpaceSeries &ks, const FilterConfig &cfg) {
  if (!(cfg.cutoff_radius > 0) || !(cfg.slope > 0))
    throw std::invalid_argument("kspace_filter: cutoff_radius and slope must be positive");
  KSpaceSeries out;
  out.protocol = ks.protocol;
  out.data.reserve(ks.data.size());
  for (const auto &g : ks.data) out.data.push_back(kspace_filter_grid(g, cfg));
  return out;
}

}  // namespace ffc
