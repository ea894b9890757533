#include "ffc/data.hpp"

#include <cmath>
#include <stdexcept>

namespace ffc {

namespace {
void check_series(const AcquisitionProtocol &protocol, const std::vector<Grid> &data,
                  const char *name) {
  protocol.validate();
  if (static_cast<int>(data.size()) != protocol.n_meas())
    throw std::invalid_argument(std::string(name) + ": first dimension must equal N_d");
  for (const auto &g : data) {
    if (g.ny() != protocol.ny || g.nx() != protocol.nx)
      throw std::invalid_argument(std::string(name) + ": grid shape does not match matrix");
    for (size_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i].real()) || !std::isfinite(g[i].imag()))
        throw std::invalid_argument(std::string(name) + ": non-finite value");
  }
}
}  // namespace

void KSpaceSeries::validate() const { check_series(protocol, data, "KSpaceSeries"); }
void ImageSeries::validate() const { check_series(protocol, data, "ImageSeries"); }

void UnknownMaps::validate() const {
  auto fail = [](const std::string &what) { throw std::invalid_argument("UnknownMaps: " + what); };
  if (alpha.size() != t1.size()) fail("alpha/T1 field counts differ");
  if (alpha.empty()) fail("at least one evolution field required");
  auto check_grid = [&](const Grid &g, const char *ch) {
    if (!g.same_shape(C)) fail(std::string(ch) + " shape mismatch");
    for (size_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i].real()) || !std::isfinite(g[i].imag()))
        fail(std::string(ch) + " contains non-finite value");
  };
  for (size_t i = 0; i < C.size(); ++i)
    if (!std::isfinite(C[i].real()) || !std::isfinite(C[i].imag())) fail("C contains non-finite value");
  for (const auto &a : alpha) check_grid(a, "alpha");
  for (const auto &t : t1) {
    if (t.ny() != C.ny() || t.nx() != C.nx()) fail("T1 shape mismatch");
    for (size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t[i])) fail("T1 contains non-finite value");
      if (!(t[i] > 0)) fail("T1 must be strictly positive");
      if (t[i] >= kT1Ceiling) fail("T1 exceeds ceiling");
    }
  }
}

UnknownMaps UnknownMaps::zeros(int n_e, int ny, int nx) {
  UnknownMaps m;
  m.C = Grid(ny, nx);
  m.alpha.assign(n_e, Grid(ny, nx));
  m.t1.assign(n_e, RealGrid(ny, nx, 0.15));
  return m;
}

size_t RoiMask::count() const {
  size_t n = 0;
  for (uint8_t p : pixels) n += (p != 0);
  return n;
}

void RoiMask::validate() const {
  if (pixels.size() != static_cast<size_t>(ny) * nx)
    throw std::invalid_argument("RoiMask: pixel buffer does not match shape");
  if (count() == 0) throw std::invalid_argument("RoiMask: at least one pixel must be set");
}

ChannelStack maps_to_stack(const UnknownMaps &m) {
  ChannelStack s;
  s.reserve(m.n_channels());
  s.push_back(m.C);
  for (const auto &a : m.alpha) s.push_back(a);
  for (const auto &t : m.t1) {
    Grid g(t.ny(), t.nx());
    for (size_t i = 0; i < t.size(); ++i) g[i] = cplx(t[i], 0.0);
    s.push_back(g);
  }
  return s;
}

UnknownMaps stack_to_maps(const ChannelStack &s) {
  if (s.empty() || s.size() % 2 == 0)
    throw std::invalid_argument("stack_to_maps: channel count must be 1 + 2*N_E");
  int n_e = static_cast<int>(s.size()) / 2;
  UnknownMaps m;
  m.C = s[0];
  for (int i = 0; i < n_e; ++i) m.alpha.push_back(s[1 + i]);
  for (int i = 0; i < n_e; ++i) {
    const Grid &g = s[1 + n_e + i];
    RealGrid t(g.ny(), g.nx());
    for (size_t j = 0; j < g.size(); ++j)
      // margin must survive float32 round-tripping of saved maps
      t[j] = std::min(std::max(g[j].real(), UnknownMaps::kT1Floor),
                      UnknownMaps::kT1Ceiling * (1.0 - 1e-4));
    m.t1.push_back(std::move(t));
  }
  return m;
}

}  // namespace ffc
