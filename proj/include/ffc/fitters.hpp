#pragma once

#include "ffc/data.hpp"
#include "ffc/linops.hpp"
#include "ffc/tgv_solver.hpp"

namespace ffc {

struct PixelFitConfig {
  double tikhonov_weight = 2e-11;
  int max_nlls_iters = 200;
  bool presmooth = false;
  FilterConfig filter;
  double step_tol = 1e-10;
  int threads = 0;

  void validate() const;
};

struct FitResult {
  UnknownMaps maps;
  int failed_pixels = 0;  // step tolerance not reached; last iterate kept
};

/// Tikhonov-damped Levenberg-Marquardt per pixel and per field; the "standard"
/// reference method. Pre-smoothing (when enabled) applies the arctan k-space
/// filter to the image series before fitting.
FitResult fit_pixelwise_single_field(const ImageSeries &images, const PixelFitConfig &cfg);

/// Joint per-pixel fit of all fields with shared C; no pre-smoothing.
FitResult fit_pixelwise_multifield(const ImageSeries &images, const PixelFitConfig &cfg);

/// H1-regularized IRGN: same outer loop and schedule as the TGV solver, with
/// R(u) = gamma_k * sum_l w_l^2 ||grad u_l||_2^2 and a Nesterov accelerated
/// gradient descent inner solver.
UnknownMaps fit_h1(const KSpaceSeries &data, const SolverConfig &cfg,
                   const ProgressLog &log = nullptr);

}  // namespace ffc
