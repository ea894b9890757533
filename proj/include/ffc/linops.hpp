#pragma once

#include <optional>
#include <vector>

#include "ffc/core.hpp"
#include "ffc/data.hpp"

namespace ffc {

/// Forward differences per channel, zero at the extended boundary.
GradientField grad(const ChannelStack &u);

/// Negative adjoint of grad (backward-difference divergence).
ChannelStack div1(const GradientField &v);

/// Symmetrized gradient: (dx- v1, dy- v2, (dy- v1 + dx- v2)/2).
SymGradField symgrad(const GradientField &v);

/// Negative adjoint of symgrad under the factor-2 pairing on the third
/// component.
GradientField div2(const SymGradField &x);

/// sum_{x,y} sqrt( sum_l w_l^2 (|v1|^2 + |v2|^2) )
double frob_norm_12(const GradientField &v, const std::vector<double> &weights);

/// sum_{x,y} sqrt( sum_l w_l^2 (|x1|^2 + |x2|^2 + 2|x3|^2) )
double frob_norm_12_sym(const SymGradField &x, const std::vector<double> &weights);

/// Centered unitary 2D DFT of one grid.
Grid fft2c(const Grid &img);
Grid ifft2c(const Grid &ks);

/// Per-measurement centered unitary DFT; masked lines zeroed if mask given.
KSpaceSeries fourier_sample(const ImageSeries &img,
                            const std::optional<std::vector<uint8_t>> &mask);
ImageSeries fourier_adjoint(const KSpaceSeries &ks,
                            const std::optional<std::vector<uint8_t>> &mask);

struct FilterConfig {
  double cutoff_radius = 30.0;  // k_c, k-space pixels
  double slope = 100.0;         // beta_filter
};

/// Pointwise arctan low-pass: f(k) = 1/2 + atan(beta*(k_c - |k|)/k_c)/pi,
/// |k| the distance in pixels from the centered DC bin.
KSpaceSeries kspace_filter(const KSpaceSeries &ks, const FilterConfig &cfg);
Grid kspace_filter_grid(const Grid &ks, const FilterConfig &cfg);
double filter_gain(double k_abs, const FilterConfig &cfg);

}  // namespace ffc
