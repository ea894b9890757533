#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffc/data.hpp"
#include "ffc/fitters.hpp"
#include "ffc/linops.hpp"
#include "ffc/metrics.hpp"
#include "ffc/phantom.hpp"
#include "ffc/protocol.hpp"
#include "ffc/signal_model.hpp"
#include "ffc/tgv_solver.hpp"

namespace py = pybind11;
using namespace ffc;

namespace {

using CArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;
using RArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MArray = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

Grid grid_from_array(const CArray &a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  Grid g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  auto r = a.unchecked<2>();
  for (py::ssize_t y = 0; y < a.shape(0); ++y)
    for (py::ssize_t x = 0; x < a.shape(1); ++x) g(int(y), int(x)) = r(y, x);
  return g;
}

py::array grid_to_array(const Grid &g) {
  py::array_t<std::complex<double>> a({g.ny(), g.nx()});
  auto w = a.mutable_unchecked<2>();
  for (int y = 0; y < g.ny(); ++y)
    for (int x = 0; x < g.nx(); ++x) w(y, x) = g(y, x);
  return a;
}

py::array stack_to_array(const std::vector<Grid> &s) {
  if (s.empty()) throw std::invalid_argument("empty stack");
  py::array_t<std::complex<double>> a({int(s.size()), s[0].ny(), s[0].nx()});
  auto w = a.mutable_unchecked<3>();
  for (size_t c = 0; c < s.size(); ++c)
    for (int y = 0; y < s[c].ny(); ++y)
      for (int x = 0; x < s[c].nx(); ++x) w(py::ssize_t(c), y, x) = s[c](y, x);
  return a;
}

py::array realstack_to_array(const std::vector<RealGrid> &s) {
  if (s.empty()) throw std::invalid_argument("empty stack");
  py::array_t<double> a({int(s.size()), s[0].ny(), s[0].nx()});
  auto w = a.mutable_unchecked<3>();
  for (size_t c = 0; c < s.size(); ++c)
    for (int y = 0; y < s[c].ny(); ++y)
      for (int x = 0; x < s[c].nx(); ++x) w(py::ssize_t(c), y, x) = s[c](y, x);
  return a;
}

std::vector<RealGrid> realstack_from_array(const RArray &a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d array (fields, ny, nx)");
  auto r = a.unchecked<3>();
  std::vector<RealGrid> s;
  for (py::ssize_t c = 0; c < a.shape(0); ++c) {
    RealGrid g(int(a.shape(1)), int(a.shape(2)));
    for (py::ssize_t y = 0; y < a.shape(1); ++y)
      for (py::ssize_t x = 0; x < a.shape(2); ++x) g(int(y), int(x)) = r(c, y, x);
    s.push_back(std::move(g));
  }
  return s;
}

std::vector<Grid> series_from_array(const CArray &a, const AcquisitionProtocol &p) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d array (measurements, ny, nx)");
  if (a.shape(0) != p.n_meas() || a.shape(1) != p.ny || a.shape(2) != p.nx)
    throw std::invalid_argument("array shape does not match the protocol");
  auto r = a.unchecked<3>();
  std::vector<Grid> s;
  for (py::ssize_t m = 0; m < a.shape(0); ++m) {
    Grid g(p.ny, p.nx);
    for (int y = 0; y < p.ny; ++y)
      for (int x = 0; x < p.nx; ++x) g(y, x) = r(m, y, x);
    s.push_back(std::move(g));
  }
  return s;
}

std::vector<uint8_t> mask_from_array(const MArray &a, int ny, int nx) {
  if (a.ndim() != 2 || a.shape(0) != ny || a.shape(1) != nx)
    throw std::invalid_argument("mask shape mismatch");
  auto r = a.unchecked<2>();
  std::vector<uint8_t> m(size_t(ny) * nx);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) m[size_t(y) * nx + x] = r(y, x);
  return m;
}

SolverConfig config_from_dict(const py::dict &d) {
  SolverConfig cfg;
  for (auto item : d) {
    std::string key = py::str(item.first);
    if (key == "gamma0") cfg.gamma0 = item.second.cast<double>();
    else if (key == "gamma_decay") cfg.gamma_decay = item.second.cast<double>();
    else if (key == "gamma_min") cfg.gamma_min = item.second.cast<double>();
    else if (key == "delta0") cfg.delta0 = item.second.cast<double>();
    else if (key == "delta_decay") cfg.delta_decay = item.second.cast<double>();
    else if (key == "delta_min") cfg.delta_min = item.second.cast<double>();
    else if (key == "n_gn") cfg.n_gn = item.second.cast<int>();
    else if (key == "iter_cap") cfg.iter_cap = item.second.cast<int>();
    else if (key == "iter_base") cfg.iter_base = item.second.cast<int>();
    else if (key == "tol") cfg.tol = item.second.cast<double>();
    else if (key == "alpha_weight") cfg.alpha_weight = item.second.cast<double>();
    else if (key == "tau0") cfg.tau0 = item.second.cast<double>();
    else if (key == "mu") cfg.mu = item.second.cast<double>();
    else if (key == "data_scale") cfg.data_scale = item.second.cast<double>();
    else if (key == "threads") cfg.threads = item.second.cast<int>();
    else if (key == "mk_mode") {
      std::string v = item.second.cast<std::string>();
      if (v == "identity") cfg.mk_mode = MkMode::identity;
      else if (v == "levenberg_marquardt") cfg.mk_mode = MkMode::levenberg_marquardt;
      else throw std::invalid_argument("mk_mode must be identity or levenberg_marquardt");
    } else {
      throw std::invalid_argument("unknown solver config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

py::dict maps_to_dict(const UnknownMaps &m) {
  py::dict d;
  d["C"] = grid_to_array(m.C);
  d["alpha"] = stack_to_array(m.alpha);
  d["t1"] = realstack_to_array(m.t1);
  return d;
}

}  // namespace

PYBIND11_MODULE(_ffcmri, mod) {
  mod.doc() = "Fast field-cycling MRI reconstruction: phantom simulation, "
              "regularized and reference fitters, and evaluation metrics.";

  py::class_<AcquisitionProtocol>(mod, "Protocol")
      .def_readonly("detection_field_T", &AcquisitionProtocol::detection_field_T)
      .def_readonly("evolution_fields_T", &AcquisitionProtocol::evolution_fields_T)
      .def_readonly("evolution_times_s", &AcquisitionProtocol::evolution_times_s)
      .def_readonly("nx", &AcquisitionProtocol::nx)
      .def_readonly("ny", &AcquisitionProtocol::ny)
      .def_property_readonly("n_fields", &AcquisitionProtocol::n_fields)
      .def_property_readonly("n_meas", &AcquisitionProtocol::n_meas)
      .def("__repr__", [](const AcquisitionProtocol &p) {
        return "Protocol(fields=" + std::to_string(p.n_fields()) +
               ", measurements=" + std::to_string(p.n_meas()) + ", matrix=" +
               std::to_string(p.nx) + ")";
      });

  mod.def("protocol", &preset_by_name, py::arg("name") = "sim3field",
          py::arg("matrix") = 128,
          "Named acquisition preset ('sim3field' or 'patient2-4field').");

  mod.def(
      "signal",
      [](std::complex<double> C, std::complex<double> alpha, double T1, double t,
         double B0, double B0E) { return signal_scalar(C, alpha, T1, t, B0, B0E); },
      py::arg("C"), py::arg("alpha"), py::arg("T1"), py::arg("t"), py::arg("B0"),
      py::arg("B0E"),
      "Normalized inversion-recovery signal at one evolution time.");

  mod.def(
      "dispersion_t1", &dispersion_t1, py::arg("a"), py::arg("b"), py::arg("field_T"),
      "T1 in seconds from the power law 1/T1 = a * field^b.");

  mod.def(
      "schedule",
      [](int k, const py::dict &cfg) {
        IrgnStep s = irgn_schedule(k, config_from_dict(cfg));
        return py::make_tuple(s.gamma, s.delta, s.iters);
      },
      py::arg("k"), py::arg("config") = py::dict(),
      "Gauss-Newton step schedule (gamma_k, delta_k, iter_k).");

  mod.def(
      "simulate_phantom",
      [](int matrix, double noise_fraction, uint64_t seed, const std::string &protocol) {
        AcquisitionProtocol proto = preset_by_name(protocol, matrix);
        auto regions = build_phantom(proto.nx, proto.ny);
        auto [ks, truth] = simulate_dataset(regions, proto, {noise_fraction, seed});
        py::dict d;
        d["kspace"] = stack_to_array(ks.data);
        d["truth"] = maps_to_dict(truth);
        RoiMask m = object_mask(regions);
        py::array_t<uint8_t> ma({m.ny, m.nx});
        auto w = ma.mutable_unchecked<2>();
        for (int y = 0; y < m.ny; ++y)
          for (int x = 0; x < m.nx; ++x) w(y, x) = m.pixels[size_t(y) * m.nx + x];
        d["mask"] = ma;
        d["protocol"] = proto;
        return d;
      },
      py::arg("matrix") = 128, py::arg("noise_fraction") = 0.0, py::arg("seed") = 0,
      py::arg("protocol") = "sim3field",
      "Simulate the numerical phantom; returns kspace, truth maps, object mask.");

  mod.def(
      "reconstruct",
      [](const CArray &kspace, const AcquisitionProtocol &proto, const py::dict &config) {
        KSpaceSeries ks{proto, series_from_array(kspace, proto)};
        ks.validate();
        SolverConfig cfg = config_from_dict(config);
        UnknownMaps maps;
        {
          py::gil_scoped_release release;
          maps = irgn_reconstruct(ks, cfg);
        }
        return maps_to_dict(maps);
      },
      py::arg("kspace"), py::arg("protocol"), py::arg("config") = py::dict(),
      "Joint TGV-regularized Gauss-Newton reconstruction of C, alpha, T1.");

  mod.def(
      "fit_h1",
      [](const CArray &kspace, const AcquisitionProtocol &proto, const py::dict &config) {
        KSpaceSeries ks{proto, series_from_array(kspace, proto)};
        ks.validate();
        SolverConfig cfg = config_from_dict(config);
        UnknownMaps maps;
        {
          py::gil_scoped_release release;
          maps = fit_h1(ks, cfg);
        }
        return maps_to_dict(maps);
      },
      py::arg("kspace"), py::arg("protocol"), py::arg("config") = py::dict(),
      "H1-regularized Gauss-Newton reconstruction (quadratic smoothing reference).");

  mod.def(
      "fit_pixelwise",
      [](const CArray &kspace, const AcquisitionProtocol &proto, bool multifield,
         bool presmooth, double cutoff_radius) {
        KSpaceSeries ks{proto, series_from_array(kspace, proto)};
        ks.validate();
        ImageSeries img = fourier_adjoint(ks, proto.mask);
        PixelFitConfig cfg;
        cfg.presmooth = presmooth;
        if (cutoff_radius > 0) cfg.filter.cutoff_radius = cutoff_radius;
        FitResult r;
        {
          py::gil_scoped_release release;
          r = multifield ? fit_pixelwise_multifield(img, cfg)
                         : fit_pixelwise_single_field(img, cfg);
        }
        py::dict d = maps_to_dict(r.maps);
        d["failed_pixels"] = r.failed_pixels;
        return d;
      },
      py::arg("kspace"), py::arg("protocol"), py::arg("multifield") = false,
      py::arg("presmooth") = true, py::arg("cutoff_radius") = 0.0,
      "Per-pixel nonlinear least-squares reference fits.");

  mod.def(
      "mean_rel_error",
      [](const RArray &est, const RArray &ref, const MArray &mask) {
        auto e = realstack_from_array(est);
        auto r = realstack_from_array(ref);
        if (e.empty()) throw std::invalid_argument("empty estimate");
        return mean_rel_abs_diff(e, r, mask_from_array(mask, e[0].ny(), e[0].nx()));
      },
      py::arg("est"), py::arg("ref"), py::arg("mask"),
      "Mean relative absolute T1 error in percent over the mask, all fields.");

  mod.def(
      "joint_histogram",
      [](const RArray &est, const RArray &ref, const MArray &mask, int bins, double lo,
         double hi) {
        auto e = realstack_from_array(est);
        auto r = realstack_from_array(ref);
        if (e.empty()) throw std::invalid_argument("empty estimate");
        Histogram2d h =
            joint_histogram_2d(e, r, mask_from_array(mask, e[0].ny(), e[0].nx()), bins, lo, hi);
        py::array_t<uint64_t> a({h.bins, h.bins});
        auto w = a.mutable_unchecked<2>();
        for (int i = 0; i < h.bins; ++i)
          for (int j = 0; j < h.bins; ++j) w(i, j) = h.at(i, j);
        return a;
      },
      py::arg("est"), py::arg("ref"), py::arg("mask"), py::arg("bins") = 100,
      py::arg("lo") = 0.0, py::arg("hi") = 0.5,
      "Joint (reference, estimate) T1 histogram; rows index the reference bin.");
}
