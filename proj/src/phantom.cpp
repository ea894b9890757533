#include "ffc/phantom.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ffc/linops.hpp"
#include "ffc/rng.hpp"
#include "ffc/signal_model.hpp"

namespace ffc {

double dispersion_t1(double a, double b, double field_T) {
  if (!(a > 0) || !(field_T > 0))
    throw std::invalid_argument("dispersion_t1: a and field must be positive");
  return 1.0 / (a * std::pow(field_T, b));
}

namespace {

struct Ellipse {
  double cx, cy;  // center in [-1,1] coordinates
  double ax, ay;  // semi-axes
  bool contains(double u, double v) const {
    double du = (u - cx) / ax, dv = (v - cy) / ay;
    return du * du + dv * dv <= 1.0;
  }
};

// head outline, inner skull boundary, brain boundary, lesion
const Ellipse kOuter{0.0, 0.0, 0.72, 0.92};
const Ellipse kSkullIn{0.0, 0.0, 0.62, 0.82};
const Ellipse kBrainIn{0.0, 0.0, 0.50, 0.68};
const Ellipse kLesion{0.18, -0.25, 0.14, 0.18};

}  // namespace

std::vector<PhantomRegion> build_phantom(int nx, int ny) {
  if (nx < 8 || ny < 8) throw std::invalid_argument("build_phantom: matrix too small");
  std::vector<PhantomRegion> regions(4);
  const char *labels[4] = {"fat", "white-matter", "grey-matter", "lesion"};
  const double a_par[4] = {5.6, 4.4, 2.6, 3.8};
  const double b_par[4] = {-0.1, -0.15, -0.3, -0.08};
  const cplx c_par[4] = {1.0, 1.0 / 3.0, 2.0 / 3.0, 2.03 / 3.0};
  for (int r = 0; r < 4; ++r) {
    regions[r].label = labels[r];
    regions[r].roi_index = r + 1;
    regions[r].ny = ny;
    regions[r].nx = nx;
    regions[r].mask.assign(static_cast<size_t>(ny) * nx, 0);
    regions[r].a = a_par[r];
    regions[r].b = b_par[r];
    regions[r].C = c_par[r];
  }
  for (int y = 0; y < ny; ++y) {
    double v = (2.0 * y + 1.0) / ny - 1.0;
    for (int x = 0; x < nx; ++x) {
      double u = (2.0 * x + 1.0) / nx - 1.0;
      size_t i = static_cast<size_t>(y) * nx + x;
      if (!kOuter.contains(u, v)) continue;
      if (!kSkullIn.contains(u, v))
        regions[0].mask[i] = 1;
      else if (!kBrainIn.contains(u, v))
        regions[1].mask[i] = 1;
      else if (kLesion.contains(u, v))
        regions[3].mask[i] = 1;
      else
        regions[2].mask[i] = 1;
    }
  }
  return regions;
}

cplx phantom_alpha(int field_index) {
  static const double mag[3] = {1.0, 0.75, 0.6};
  static const double ph[3] = {0.5236, 0.6981, 0.8727};
  int i = std::min(std::max(field_index, 0), 2);
  return std::polar(mag[i], ph[i]);
}

UnknownMaps ground_truth_maps(const std::vector<PhantomRegion> &regions,
                              const AcquisitionProtocol &protocol) {
  const int ny = protocol.ny, nx = protocol.nx;
  const int n_e = protocol.n_fields();
  UnknownMaps m = UnknownMaps::zeros(n_e, ny, nx);
  for (int f = 0; f < n_e; ++f) {
    cplx al = phantom_alpha(f);
    for (size_t i = 0; i < m.alpha[f].size(); ++i) {
      m.alpha[f][i] = al;
      m.t1[f][i] = 0.15;  // background relaxes but carries no signal (C = 0)
    }
  }
  for (const auto &r : regions) {
    if (r.ny != ny || r.nx != nx)
      throw std::invalid_argument("ground_truth_maps: region size mismatch");
    for (int f = 0; f < n_e; ++f) {
      double t1 = dispersion_t1(r.a, r.b, protocol.evolution_fields_T[f]);
      for (size_t i = 0; i < r.mask.size(); ++i)
        if (r.mask[i]) {
          m.C[i] = r.C;
          m.t1[f][i] = t1;
        }
    }
  }
  return m;
}

ImageSeries simulate_images(const UnknownMaps &truth, const AcquisitionProtocol &protocol,
                            const NoiseSpec &noise) {
  if (noise.fraction < 0) throw std::invalid_argument("simulate_images: negative noise fraction");
  ImageSeries img = forward_image(truth, protocol);
  if (noise.fraction > 0) {
    const size_t npix = img.data[0].size();
    for (size_t n = 0; n < img.data.size(); ++n)
      for (size_t i = 0; i < npix; ++i) {
        double g0, g1;
        counter_gauss_pair(noise.seed, n * npix + i, g0, g1);
        img.data[n][i] += noise.fraction * cplx(g0, g1);
      }
  }
  return img;
}

std::pair<KSpaceSeries, UnknownMaps> simulate_dataset(
    const std::vector<PhantomRegion> &regions, const AcquisitionProtocol &protocol,
    const NoiseSpec &noise) {
  protocol.validate();
  UnknownMaps truth = ground_truth_maps(regions, protocol);
  ImageSeries img = simulate_images(truth, protocol, noise);
  return {fourier_sample(img, protocol.mask), std::move(truth)};
}

ImageSeries calibration_images(const UnknownMaps &truth, const AcquisitionProtocol &protocol,
                               const NoiseSpec &noise) {
  AcquisitionProtocol cal = protocol;
  cal.evolution_times_s.assign(protocol.n_fields(), {1e-6});
  return simulate_images(truth, cal, noise);
}

double measure_snr(const ImageSeries &images, const RoiMask &roi, double noise_fraction) {
  if (noise_fraction < 0) throw std::invalid_argument("measure_snr: negative noise fraction");
  const auto &p = images.protocol;
  int hi = 0;
  for (int f = 1; f < p.n_fields(); ++f)
    if (p.evolution_fields_T[f] > p.evolution_fields_T[hi]) hi = f;
  int idx = 0;
  for (int f = 0; f < hi; ++f) idx += static_cast<int>(p.evolution_times_s[f].size());
  idx += static_cast<int>(p.evolution_times_s[hi].size()) - 1;  // times descend

  const Grid &g = images.data[idx];
  double s = 0;
  size_t n = 0;
  for (size_t i = 0; i < roi.pixels.size(); ++i)
    if (roi.pixels[i]) {
      s += std::abs(g[i]);
      ++n;
    }
  if (n == 0) throw std::invalid_argument("measure_snr: empty ROI");
  double mean = s / static_cast<double>(n);
  if (noise_fraction == 0) return std::numeric_limits<double>::infinity();
  return mean / noise_fraction;
}

std::vector<RoiMask> phantom_rois(const std::vector<PhantomRegion> &regions) {
  std::vector<RoiMask> out;
  out.reserve(regions.size());
  for (const auto &r : regions) {
    RoiMask m;
    m.label = r.label;
    m.ny = r.ny;
    m.nx = r.nx;
    m.pixels = r.mask;
    out.push_back(std::move(m));
  }
  return out;
}

RoiMask object_mask(const std::vector<PhantomRegion> &regions) {
  if (regions.empty()) throw std::invalid_argument("object_mask: no regions");
  RoiMask m;
  m.label = "object";
  m.ny = regions[0].ny;
  m.nx = regions[0].nx;
  m.pixels.assign(regions[0].mask.size(), 0);
  for (const auto &r : regions)
    for (size_t i = 0; i < r.mask.size(); ++i)
      if (r.mask[i]) m.pixels[i] = 1;
  return m;
}

}  // namespace ffc
