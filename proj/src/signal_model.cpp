#include "ffc/signal_model.hpp"

#include <cmath>

namespace ffc {

namespace {
constexpr double kT1DerivFloor = 1e-4;  // seconds, avoids overflow of t/T1^2 e^{-t/T1}
}

cplx signal_scalar(cplx C, cplx alpha, double T1, double t_evo, double B0, double B0E) {
  double E = std::exp(-t_evo / T1);
  double rho = B0E / B0;
  return C * (-alpha * E + rho * (1.0 - E));
}

SignalPartials signal_partials(cplx C, cplx alpha, double T1, double t_evo, double B0,
                               double B0E) {
  double T1s = std::max(T1, kT1DerivFloor);
  double E = std::exp(-t_evo / T1s);
  double rho = B0E / B0;
  SignalPartials p;
  p.d_C = -alpha * E + rho * (1.0 - E);
  p.s = C * p.d_C;
  p.d_alpha = -C * E;
  p.d_T1 = C * (t_evo / (T1s * T1s)) * E * (-alpha - rho);
  return p;
}

ImageSeries forward_image(const UnknownMaps &maps, const AcquisitionProtocol &protocol) {
  auto meas = protocol.measurements();
  ImageSeries out;
  out.protocol = protocol;
  out.data.reserve(meas.size());
  const double B0 = protocol.detection_field_T;
  for (const auto &m : meas) {
    const double B0E = protocol.evolution_fields_T[m.field];
    Grid g(protocol.ny, protocol.nx);
    const Grid &A = maps.alpha[m.field];
    const RealGrid &T = maps.t1[m.field];
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = signal_scalar(maps.C[i], A[i], T[i], m.time_s, B0, B0E);
    out.data.push_back(std::move(g));
  }
  return out;
}

ImageSeries jacobian_apply(const UnknownMaps &lin, const ChannelStack &delta,
                           const AcquisitionProtocol &protocol) {
  auto meas = protocol.measurements();
  const int n_e = lin.n_e();
  ImageSeries out;
  out.protocol = protocol;
  out.data.reserve(meas.size());
  const double B0 = protocol.detection_field_T;
  for (const auto &m : meas) {
    const double B0E = protocol.evolution_fields_T[m.field];
    Grid g(protocol.ny, protocol.nx);
    const Grid &dC = delta[0];
    const Grid &dA = delta[1 + m.field];
    const Grid &dT = delta[1 + n_e + m.field];
    const Grid &A = lin.alpha[m.field];
    const RealGrid &T = lin.t1[m.field];
    for (size_t i = 0; i < g.size(); ++i) {
      auto p = signal_partials(lin.C[i], A[i], T[i], m.time_s, B0, B0E);
      g[i] = p.d_C * dC[i] + p.d_alpha * dA[i] + p.d_T1 * dT[i];
    }
    out.data.push_back(std::move(g));
  }
  return out;
}

ChannelStack jacobian_adjoint_apply(const UnknownMaps &lin, const ImageSeries &residual) {
  const auto &protocol = residual.protocol;
  auto meas = protocol.measurements();
  const int n_e = lin.n_e();
  ChannelStack out(1 + 2 * n_e, Grid(protocol.ny, protocol.nx));
  const double B0 = protocol.detection_field_T;
  for (size_t n = 0; n < meas.size(); ++n) {
    const auto &m = meas[n];
    const double B0E = protocol.evolution_fields_T[m.field];
    const Grid &res = residual.data[n];
    Grid &oC = out[0];
    Grid &oA = out[1 + m.field];
    Grid &oT = out[1 + n_e + m.field];
    const Grid &A = lin.alpha[m.field];
    const RealGrid &T = lin.t1[m.field];
    for (size_t i = 0; i < res.size(); ++i) {
      auto p = signal_partials(lin.C[i], A[i], T[i], m.time_s, B0, B0E);
      oC[i] += std::conj(p.d_C) * res[i];
      oA[i] += std::conj(p.d_alpha) * res[i];
      oT[i] += std::conj(p.d_T1) * res[i];
    }
  }
  return out;
}

std::vector<RealGrid> jacobian_diag_normal(const UnknownMaps &lin,
                                           const AcquisitionProtocol &protocol) {
  auto meas = protocol.measurements();
  const int n_e = lin.n_e();
  std::vector<RealGrid> out(1 + 2 * n_e, RealGrid(protocol.ny, protocol.nx));
  const double B0 = protocol.detection_field_T;
  for (const auto &m : meas) {
    const double B0E = protocol.evolution_fields_T[m.field];
    const Grid &A = lin.alpha[m.field];
    const RealGrid &T = lin.t1[m.field];
    for (size_t i = 0; i < out[0].size(); ++i) {
      auto p = signal_partials(lin.C[i], A[i], T[i], m.time_s, B0, B0E);
      out[0][i] += std::norm(p.d_C);
      out[1 + m.field][i] += std::norm(p.d_alpha);
      out[1 + n_e + m.field][i] += std::norm(p.d_T1);
    }
  }
  return out;
}

}  // namespace ffc
