#pragma once

#include <string>
#include <vector>

#include "ffc/data.hpp"

namespace ffc {

struct RelAbsDiff {
  RealGrid grid;   // percent, zero outside the mask
  double mean = 0; // percent, over mask pixels
};

/// Pixel-wise |est - ref| / ref on the mask, in percent.
RelAbsDiff rel_abs_diff(const RealGrid &est, const RealGrid &ref,
                        const std::vector<uint8_t> &mask);

/// Mean over several stacked field maps.
double mean_rel_abs_diff(const std::vector<RealGrid> &est, const std::vector<RealGrid> &ref,
                         const std::vector<uint8_t> &mask);

struct Histogram2d {
  int bins = 0;
  double lo = 0, hi = 0;        // shared range for both axes
  std::vector<uint64_t> counts;  // bins x bins, row = ref bin, col = est bin
  uint64_t total = 0;            // masked pixels x fields
  uint64_t &at(int ref_bin, int est_bin) { return counts[size_t(ref_bin) * bins + est_bin]; }
  uint64_t at(int ref_bin, int est_bin) const { return counts[size_t(ref_bin) * bins + est_bin]; }
};

/// Joint histogram over all fields: reference on the ordinate (rows), estimate
/// on the abscissa (columns). Out-of-range values clamp to the edge bins.
Histogram2d joint_histogram_2d(const std::vector<RealGrid> &est,
                               const std::vector<RealGrid> &ref,
                               const std::vector<uint8_t> &mask, int bins, double lo,
                               double hi);

struct RoiFieldStat {
  int field = 0;
  double mean = 0;
  double stddev = 0;  // population (1/N)
};

/// Per-field mean and population std of T1 inside the ROI.
std::vector<RoiFieldStat> roi_stats(const UnknownMaps &maps, const RoiMask &roi);

struct DispersionRow {
  double field_T;
  std::string roi;
  double mean_t1;
  double two_std;
};

std::vector<DispersionRow> dispersion_profile(const UnknownMaps &maps,
                                              const AcquisitionProtocol &protocol,
                                              const std::vector<RoiMask> &rois);

}  // namespace ffc
