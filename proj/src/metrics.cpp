#include "ffc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ffc {

RelAbsDiff rel_abs_diff(const RealGrid &est, const RealGrid &ref,
                        const std::vector<uint8_t> &mask) {
  if (est.size() != ref.size() || est.size() != mask.size())
    throw std::invalid_argument("rel_abs_diff: size mismatch");
  RelAbsDiff out;
  out.grid = RealGrid(est.ny(), est.nx());
  double sum = 0;
  size_t n = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    if (!mask[i]) continue;
    if (ref[i] == 0) throw std::invalid_argument("rel_abs_diff: zero reference inside mask");
    out.grid[i] = 100.0 * std::abs(est[i] - ref[i]) / std::abs(ref[i]);
    sum += out.grid[i];
    ++n;
  }
  if (n == 0) throw std::invalid_argument("rel_abs_diff: empty mask");
  out.mean = sum / static_cast<double>(n);
  return out;
}

double mean_rel_abs_diff(const std::vector<RealGrid> &est, const std::vector<RealGrid> &ref,
                         const std::vector<uint8_t> &mask) {
  if (est.size() != ref.size() || est.empty())
    throw std::invalid_argument("mean_rel_abs_diff: field count mismatch");
  double acc = 0;
  for (size_t f = 0; f < est.size(); ++f) acc += rel_abs_diff(est[f], ref[f], mask).mean;
  return acc / static_cast<double>(est.size());
}

Histogram2d joint_histogram_2d(const std::vector<RealGrid> &est,
                               const std::vector<RealGrid> &ref,
                               const std::vector<uint8_t> &mask, int bins, double lo,
                               double hi) {
  if (bins <= 0 || !(hi > lo)) throw std::invalid_argument("joint_histogram_2d: bad range");
  if (est.size() != ref.size() || est.empty())
    throw std::invalid_argument("joint_histogram_2d: field count mismatch");
  Histogram2d h;
  h.bins = bins;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<size_t>(bins) * bins, 0);
  const double scale = bins / (hi - lo);
  auto bin_of = [&](double v) {
    int b = static_cast<int>((v - lo) * scale);
    return std::clamp(b, 0, bins - 1);
  };
  for (size_t f = 0; f < est.size(); ++f) {
    if (est[f].size() != mask.size() || ref[f].size() != mask.size())
      throw std::invalid_argument("joint_histogram_2d: size mismatch");
    for (size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      ++h.at(bin_of(ref[f][i]), bin_of(est[f][i]));
      ++h.total;
    }
  }
  return h;
}

std::vector<RoiFieldStat> roi_stats(const UnknownMaps &maps, const RoiMask &roi) {
  if (roi.pixels.size() != maps.C.size())
    throw std::invalid_argument("roi_stats: ROI size mismatch");
  std::vector<RoiFieldStat> out;
  out.reserve(maps.n_e());
  for (int f = 0; f < maps.n_e(); ++f) {
    double s = 0, s2 = 0;
    size_t n = 0;
    for (size_t i = 0; i < roi.pixels.size(); ++i)
      if (roi.pixels[i]) {
        double v = maps.t1[f][i];
        s += v;
        s2 += v * v;
        ++n;
      }
    if (n == 0) throw std::invalid_argument("roi_stats: empty ROI");
    double mean = s / static_cast<double>(n);
    double var = std::max(s2 / static_cast<double>(n) - mean * mean, 0.0);
    out.push_back({f, mean, std::sqrt(var)});
  }
  return out;
}

std::vector<DispersionRow> dispersion_profile(const UnknownMaps &maps,
                                              const AcquisitionProtocol &protocol,
                                              const std::vector<RoiMask> &rois) {
  std::vector<DispersionRow> out;
  for (const auto &roi : rois) {
    auto stats = roi_stats(maps, roi);
    for (const auto &st : stats)
      out.push_back({protocol.evolution_fields_T[st.field], roi.label, st.mean,
                     2.0 * st.stddev});
  }
  return out;
}

}  // namespace ffc
