#pragma once

// Internal: linearization of the forward model with per-measurement partial
// derivative grids precomputed at the Gauss-Newton point, with optional
// per-channel scaling baked into the coefficients.

#include <vector>

#include "ffc/data.hpp"
#include "ffc/linops.hpp"
#include "ffc/signal_model.hpp"
#include "ffc/tgv_solver.hpp"

namespace ffc::detail {

struct Linearization {
  AcquisitionProtocol protocol;
  std::vector<AcquisitionProtocol::Measurement> meas;
  // scaled partials: d_C/s_C, d_alpha/s_alpha(field), d_T1/s_T1(field)
  std::vector<Grid> dC, dA, dT;
  int n_e = 0;

  /// scales.size() == N_u; identity scaling when empty.
  Linearization(const UnknownMaps &lin, const AcquisitionProtocol &proto,
                const std::vector<double> &scales = {})
      : protocol(proto), meas(proto.measurements()), n_e(lin.n_e()) {
    const double B0 = proto.detection_field_T;
    dC.reserve(meas.size());
    dA.reserve(meas.size());
    dT.reserve(meas.size());
    for (const auto &m : meas) {
      const double B0E = proto.evolution_fields_T[m.field];
      double sC = 1, sA = 1, sT = 1;
      if (!scales.empty()) {
        sC = scales[0];
        sA = scales[1 + m.field];
        sT = scales[1 + n_e + m.field];
      }
      Grid gc(proto.ny, proto.nx), ga(proto.ny, proto.nx), gt(proto.ny, proto.nx);
      const Grid &A = lin.alpha[m.field];
      const RealGrid &T = lin.t1[m.field];
      for (size_t i = 0; i < gc.size(); ++i) {
        auto p = signal_partials(lin.C[i], A[i], T[i], m.time_s, B0, B0E);
        gc[i] = p.d_C / sC;
        ga[i] = p.d_alpha / sA;
        gt[i] = p.d_T1 / sT;
      }
      dC.push_back(std::move(gc));
      dA.push_back(std::move(ga));
      dT.push_back(std::move(gt));
    }
  }

  std::vector<Grid> apply_kspace(const ChannelStack &x) const {
    std::vector<Grid> out;
    out.reserve(meas.size());
    for (size_t n = 0; n < meas.size(); ++n) {
      const int f = meas[n].field;
      Grid img(protocol.ny, protocol.nx);
      const Grid &x0 = x[0], &xa = x[1 + f], &xt = x[1 + n_e + f];
      for (size_t i = 0; i < img.size(); ++i)
        img[i] = dC[n][i] * x0[i] + dA[n][i] * xa[i] + dT[n][i] * xt[i];
      Grid k = fft2c(img);
      if (protocol.mask)
        for (size_t i = 0; i < k.size(); ++i)
          if (!(*protocol.mask)[i]) k[i] = cplx{};
      out.push_back(std::move(k));
    }
    return out;
  }

  ChannelStack adjoint_kspace(const std::vector<Grid> &xi) const {
    ChannelStack out(1 + 2 * n_e, Grid(protocol.ny, protocol.nx));
    for (size_t n = 0; n < meas.size(); ++n) {
      const int f = meas[n].field;
      Grid k = xi[n];
      if (protocol.mask)
        for (size_t i = 0; i < k.size(); ++i)
          if (!(*protocol.mask)[i]) k[i] = cplx{};
      Grid img = ifft2c(k);
      Grid &o0 = out[0], &oa = out[1 + f], &ot = out[1 + n_e + f];
      for (size_t i = 0; i < img.size(); ++i) {
        o0[i] += std::conj(dC[n][i]) * img[i];
        oa[i] += std::conj(dA[n][i]) * img[i];
        ot[i] += std::conj(dT[n][i]) * img[i];
      }
    }
    return out;
  }

  /// diag(DS^H DS) of the scaled operator (sampling mask ignored).
  std::vector<RealGrid> diag_normal() const {
    std::vector<RealGrid> out(1 + 2 * n_e, RealGrid(protocol.ny, protocol.nx));
    for (size_t n = 0; n < meas.size(); ++n) {
      const int f = meas[n].field;
      for (size_t i = 0; i < dC[n].size(); ++i) {
        out[0][i] += std::norm(dC[n][i]);
        out[1 + f][i] += std::norm(dA[n][i]);
        out[1 + n_e + f][i] += std::norm(dT[n][i]);
      }
    }
    return out;
  }

  DsOp as_op() const {
    return DsOp{[this](const ChannelStack &x) { return apply_kspace(x); },
                [this](const std::vector<Grid> &xi) { return adjoint_kspace(xi); }};
  }
};

}  // namespace ffc::detail
