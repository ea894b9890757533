#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ffc/data.hpp"

namespace ffc {

/// One analytic phantom region with its power-law dispersion parameters.
struct PhantomRegion {
  std::string label;
  int roi_index = 0;               // 1..4
  std::vector<uint8_t> mask;       // ny*nx, nonzero = inside
  int ny = 0, nx = 0;
  double a = 0.0;                  // 1/T1 = a * B^b
  double b = 0.0;
  cplx C;
};

struct NoiseSpec {
  double fraction = 0.0;  // noise std as a fraction of the max signal 1
  uint64_t seed = 0;
};

/// T1 in seconds from the power law 1/T1 = a * field^b (field in tesla).
double dispersion_t1(double a, double b, double field_T);

/// Four-region axial head phantom (fat ring, white-matter ring, grey-matter
/// brain, off-center lesion) rasterized from analytic ellipses.
std::vector<PhantomRegion> build_phantom(int nx, int ny);

/// Per-field alpha magnitude/phase assignments: 1/0.5236, 0.75/0.6981,
/// 0.6/0.8727 for fields ordered from highest to lowest.
cplx phantom_alpha(int field_index);

/// Ground-truth maps assembled from the regions for a given protocol.
/// Background outside all regions: C = 0, alpha = 1, T1 = 0.15 s.
UnknownMaps ground_truth_maps(const std::vector<PhantomRegion> &regions,
                              const AcquisitionProtocol &protocol);

/// Forward-simulates the image series from the ground truth and adds
/// i.i.d. complex Gaussian noise of std = fraction per component.
ImageSeries simulate_images(const UnknownMaps &truth, const AcquisitionProtocol &protocol,
                            const NoiseSpec &noise);

std::pair<KSpaceSeries, UnknownMaps> simulate_dataset(
    const std::vector<PhantomRegion> &regions, const AcquisitionProtocol &protocol,
    const NoiseSpec &noise);

/// Noisy post-inversion (t -> 0) calibration images, one per field, used for
/// the SNR summary.
ImageSeries calibration_images(const UnknownMaps &truth, const AcquisitionProtocol &protocol,
                               const NoiseSpec &noise);

/// Mean |signal| over the ROI at the shortest-time highest-field measurement
/// of `images`, divided by the noise std. +inf when noise_fraction == 0.
double measure_snr(const ImageSeries &images, const RoiMask &roi, double noise_fraction);

/// Union-of-regions object mask plus the per-region ROI masks.
std::vector<RoiMask> phantom_rois(const std::vector<PhantomRegion> &regions);
RoiMask object_mask(const std::vector<PhantomRegion> &regions);

}  // namespace ffc
