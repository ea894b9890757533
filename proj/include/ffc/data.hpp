#pragma once

#include <string>
#include <vector>

#include "ffc/core.hpp"
#include "ffc/protocol.hpp"

namespace ffc {

/// Complex k-space measurements, one ky*kx grid per measurement (N_d total),
/// ordered field-major then time.
struct KSpaceSeries {
  AcquisitionProtocol protocol;
  std::vector<Grid> data;

  void validate() const;
};

/// Image-domain counterpart of KSpaceSeries.
struct ImageSeries {
  AcquisitionProtocol protocol;
  std::vector<Grid> data;

  void validate() const;
};

/// The unknown parameter maps u = (C, alpha per field, T1 per field).
struct UnknownMaps {
  Grid C;
  std::vector<Grid> alpha;     // N_E complex grids
  std::vector<RealGrid> t1;    // N_E real-positive grids, seconds

  static constexpr double kT1Ceiling = 10.0;  // seconds
  static constexpr double kT1Floor = 1e-4;    // seconds

  int n_e() const { return static_cast<int>(alpha.size()); }
  int n_channels() const { return 1 + 2 * n_e(); }
  int ny() const { return C.ny(); }
  int nx() const { return C.nx(); }

  void validate() const;

  static UnknownMaps zeros(int n_e, int ny, int nx);
};

struct RoiMask {
  std::string label;
  int ny = 0, nx = 0;
  std::vector<uint8_t> pixels;  // row-major, nonzero = inside

  size_t count() const;
  void validate() const;
};

/// Channel order of the linearized stack: C, alpha_1..alpha_NE, T1_1..T1_NE.
ChannelStack maps_to_stack(const UnknownMaps &m);
/// Inverse of maps_to_stack; T1 channels take the real part, clamped to
/// [kT1Floor, kT1Ceiling].
UnknownMaps stack_to_maps(const ChannelStack &s);

}  // namespace ffc
