#pragma once

#include <array>
#include <cassert>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ffc {

using cplx = std::complex<double>;

/// Dense row-major complex 2D grid.
class Grid {
public:
  Grid() = default;
  Grid(int ny, int nx, cplx fill = {})
      : ny_(ny), nx_(nx), v_(static_cast<size_t>(ny) * nx, fill) {
    if (ny <= 0 || nx <= 0) throw std::invalid_argument("Grid: non-positive size");
  }

  int ny() const { return ny_; }
  int nx() const { return nx_; }
  size_t size() const { return v_.size(); }

  cplx &operator()(int y, int x) { return v_[static_cast<size_t>(y) * nx_ + x]; }
  const cplx &operator()(int y, int x) const { return v_[static_cast<size_t>(y) * nx_ + x]; }
  cplx &operator[](size_t i) { return v_[i]; }
  const cplx &operator[](size_t i) const { return v_[i]; }

  cplx *data() { return v_.data(); }
  const cplx *data() const { return v_.data(); }

  bool same_shape(const Grid &o) const { return ny_ == o.ny_ && nx_ == o.nx_; }

private:
  int ny_ = 0, nx_ = 0;
  std::vector<cplx> v_;
};

/// Dense row-major real 2D grid.
class RealGrid {
public:
  RealGrid() = default;
  RealGrid(int ny, int nx, double fill = 0.0)
      : ny_(ny), nx_(nx), v_(static_cast<size_t>(ny) * nx, fill) {
    if (ny <= 0 || nx <= 0) throw std::invalid_argument("RealGrid: non-positive size");
  }

  int ny() const { return ny_; }
  int nx() const { return nx_; }
  size_t size() const { return v_.size(); }

  double &operator()(int y, int x) { return v_[static_cast<size_t>(y) * nx_ + x]; }
  const double &operator()(int y, int x) const { return v_[static_cast<size_t>(y) * nx_ + x]; }
  double &operator[](size_t i) { return v_[i]; }
  const double &operator[](size_t i) const { return v_[i]; }

  double *data() { return v_.data(); }
  const double *data() const { return v_.data(); }

private:
  int ny_ = 0, nx_ = 0;
  std::vector<double> v_;
};

/// Stack of complex channel images; the linearized unknown space U^{N_u}.
using ChannelStack = std::vector<Grid>;

/// Per-channel pair of spatial derivative components, element of U^{2 x N_u}.
struct GradientField {
  std::vector<std::array<Grid, 2>> c;
  size_t channels() const { return c.size(); }
};

/// Per-channel symmetrized derivative components, element of U^{3 x N_u}.
/// The third component carries the off-diagonal entry once; inner products
/// over this space weight it by 2 (symmetric-matrix Frobenius pairing).
struct SymGradField {
  std::vector<std::array<Grid, 3>> c;
  size_t channels() const { return c.size(); }
};

inline cplx dot(const Grid &a, const Grid &b) {
  assert(a.size() == b.size());
  cplx s{};
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double norm2sq(const Grid &a) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::norm(a[i]);
  return s;
}

inline cplx dot(const ChannelStack &a, const ChannelStack &b) {
  cplx s{};
  for (size_t l = 0; l < a.size(); ++l) s += dot(a[l], b[l]);
  return s;
}

inline double norm2sq(const ChannelStack &a) {
  double s = 0;
  for (const auto &g : a) s += norm2sq(g);
  return s;
}

inline cplx dot(const GradientField &a, const GradientField &b) {
  cplx s{};
  for (size_t l = 0; l < a.c.size(); ++l)
    for (int k = 0; k < 2; ++k) s += dot(a.c[l][k], b.c[l][k]);
  return s;
}

inline double norm2sq(const GradientField &a) {
  double s = 0;
  for (const auto &ch : a.c)
    for (const auto &g : ch) s += norm2sq(g);
  return s;
}

/// Weighted pairing on symmetrized-gradient space: off-diagonal counted twice.
inline cplx dot(const SymGradField &a, const SymGradField &b) {
  cplx s{};
  for (size_t l = 0; l < a.c.size(); ++l) {
    s += dot(a.c[l][0], b.c[l][0]);
    s += dot(a.c[l][1], b.c[l][1]);
    s += 2.0 * dot(a.c[l][2], b.c[l][2]);
  }
  return s;
}

inline double norm2sq(const SymGradField &a) {
  double s = 0;
  for (const auto &ch : a.c)
    s += norm2sq(ch[0]) + norm2sq(ch[1]) + 2.0 * norm2sq(ch[2]);
  return s;
}

}  // namespace ffc
