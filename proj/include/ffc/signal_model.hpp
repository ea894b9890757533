#pragma once

#include "ffc/data.hpp"

namespace ffc {

/// Scalar FFC inversion-recovery signal, normalized by the detection field so
/// that |s| = |C*alpha| at t = 0:
///   s = C * [ -alpha * e^{-t/T1} + (B0E/B0) * (1 - e^{-t/T1}) ]
cplx signal_scalar(cplx C, cplx alpha, double T1, double t_evo, double B0,
                   double B0E);

/// Analytic partials of the normalized signal at one point.
struct SignalPartials {
  cplx s;        // signal value
  cplx d_C;      // bracket term
  cplx d_alpha;  // -C * e^{-t/T1}
  cplx d_T1;     // C * (t/T1^2) * e^{-t/T1} * (-alpha - B0E/B0)
};
SignalPartials signal_partials(cplx C, cplx alpha, double T1, double t_evo,
                               double B0, double B0E);

/// Nonlinear forward operator S in image space, one image per measurement.
ImageSeries forward_image(const UnknownMaps &maps, const AcquisitionProtocol &protocol);

/// Directional derivative DS|_{u=lin} * delta (image space, complex-linear;
/// the T1 channel of delta is the complexified perturbation).
ImageSeries jacobian_apply(const UnknownMaps &lin, const ChannelStack &delta,
                           const AcquisitionProtocol &protocol);

/// Adjoint DS^H: channel l accumulates conj(dS_n/du_l) * residual_n.
ChannelStack jacobian_adjoint_apply(const UnknownMaps &lin, const ImageSeries &residual);

/// Per-channel-per-pixel diag(DS^H DS): sum_n |dS_n/du_l|^2.
std::vector<RealGrid> jacobian_diag_normal(const UnknownMaps &lin,
                                           const AcquisitionProtocol &protocol);

}  // namespace ffc
