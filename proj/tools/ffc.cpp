// ffc: simulate, fit, evaluate and export FFC-MRI relaxometry datasets.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ffc/fitters.hpp"
#include "ffc/io.hpp"
#include "ffc/linops.hpp"
#include "ffc/metrics.hpp"
#include "ffc/phantom.hpp"
#include "ffc/rng.hpp"
#include "ffc/tgv_solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ffc;

namespace {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char *e = std::getenv("FFC_LOG");
  if (!e) return LogLevel::info;
  std::string s(e);
  if (s == "quiet") return LogLevel::quiet;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::info;
}

// line-delimited JSON on stderr; inner-solver chatter only at debug level
ProgressLog make_logger() {
  LogLevel lvl = log_level();
  if (lvl == LogLevel::quiet) return nullptr;
  return [lvl](const std::string &line) {
    if (lvl < LogLevel::debug && line.find("pd_check") != std::string::npos) return;
    std::cerr << line << "\n";
  };
}

json solver_config_json(const SolverConfig &c) {
  return json{{"gamma0", c.gamma0},       {"gamma_decay", c.gamma_decay},
              {"gamma_min", c.gamma_min}, {"delta0", c.delta0},
              {"delta_decay", c.delta_decay}, {"delta_min", c.delta_min},
              {"beta0", c.beta0},         {"beta1", c.beta1},
              {"n_gn", c.n_gn},           {"iter_cap", c.iter_cap},
              {"iter_base", c.iter_base}, {"tol", c.tol},
              {"alpha_weight", c.alpha_weight},
              {"mk_mode", c.mk_mode == MkMode::identity ? "identity" : "levenberg_marquardt"},
              {"tau0", c.tau0},           {"mu", c.mu},
              {"data_scale", c.data_scale},
              {"threads", c.threads}};
}

void apply_solver_config(const json &j, SolverConfig &c) {
  if (j.contains("gamma0")) c.gamma0 = j["gamma0"].get<double>();
  if (j.contains("gamma_decay")) c.gamma_decay = j["gamma_decay"].get<double>();
  if (j.contains("gamma_min")) c.gamma_min = j["gamma_min"].get<double>();
  if (j.contains("delta0")) c.delta0 = j["delta0"].get<double>();
  if (j.contains("delta_decay")) c.delta_decay = j["delta_decay"].get<double>();
  if (j.contains("delta_min")) c.delta_min = j["delta_min"].get<double>();
  if (j.contains("beta0")) c.beta0 = j["beta0"].get<double>();
  if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
  if (j.contains("n_gn")) c.n_gn = j["n_gn"].get<int>();
  if (j.contains("iter_cap")) c.iter_cap = j["iter_cap"].get<int>();
  if (j.contains("iter_base")) c.iter_base = j["iter_base"].get<int>();
  if (j.contains("tol")) c.tol = j["tol"].get<double>();
  if (j.contains("alpha_weight")) c.alpha_weight = j["alpha_weight"].get<double>();
  if (j.contains("mk_mode"))
    c.mk_mode = j["mk_mode"].get<std::string>() == "identity" ? MkMode::identity
                                                              : MkMode::levenberg_marquardt;
  if (j.contains("tau0")) c.tau0 = j["tau0"].get<double>();
  if (j.contains("mu")) c.mu = j["mu"].get<double>();
  if (j.contains("data_scale")) c.data_scale = j["data_scale"].get<double>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
}

json pixel_config_json(const PixelFitConfig &c) {
  return json{{"tikhonov_weight", c.tikhonov_weight},
              {"max_nlls_iters", c.max_nlls_iters},
              {"presmooth", c.presmooth},
              {"filter_cutoff_radius", c.filter.cutoff_radius},
              {"filter_slope", c.filter.slope},
              {"step_tol", c.step_tol},
              {"threads", c.threads}};
}

void apply_pixel_config(const json &j, PixelFitConfig &c) {
  if (j.contains("tikhonov_weight")) c.tikhonov_weight = j["tikhonov_weight"].get<double>();
  if (j.contains("max_nlls_iters")) c.max_nlls_iters = j["max_nlls_iters"].get<int>();
  if (j.contains("presmooth")) c.presmooth = j["presmooth"].get<bool>();
  if (j.contains("filter_cutoff_radius"))
    c.filter.cutoff_radius = j["filter_cutoff_radius"].get<double>();
  if (j.contains("filter_slope")) c.filter.slope = j["filter_slope"].get<double>();
  if (j.contains("step_tol")) c.step_tol = j["step_tol"].get<double>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
}

void write_run_json(const fs::path &dir, const json &j) {
  std::ofstream out(dir / "run.json");
  out << j.dump(2) << "\n";
  if (!out) throw io_error((dir / "run.json").string() + ": write failed");
}

json load_json_file(const fs::path &file) {
  std::ifstream in(file);
  if (!in) throw io_error(file.string() + ": cannot open");
  json j;
  in >> j;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_phantom(double noise, int matrix, const std::string &protocol_name, uint64_t seed,
                const fs::path &out) {
  auto protocol = preset_by_name(protocol_name, matrix);
  auto regions = build_phantom(matrix, matrix);
  NoiseSpec ns{noise, seed};
  auto [ks, truth] = simulate_dataset(regions, protocol, ns);

  fs::create_directories(out);
  save_dataset(ks, out);
  save_maps(truth, out, "truth");
  save_rois(phantom_rois(regions), out / "rois.json");

  auto cal = calibration_images(truth, protocol, ns);
  std::printf("region            SNR\n");
  for (const auto &roi : phantom_rois(regions)) {
    double snr = measure_snr(cal, roi, noise);
    std::printf("%-14s %8.3g\n", roi.label.c_str(), snr);
  }

  write_run_json(out, json{{"command", "phantom"},
                           {"noise", noise},
                           {"matrix", matrix},
                           {"protocol", protocol_name},
                           {"seed", seed},
                           {"rng_algorithm", kRngAlgorithm},
                           {"n_meas", protocol.n_meas()}});
  return 0;
}

int cmd_fit(const std::string &method, const fs::path &in, const fs::path &out,
            const std::string &config_file, int threads) {
  auto data = load_dataset(in);
  json cfg_json;
  if (!config_file.empty()) cfg_json = load_json_file(config_file);

  auto t0 = std::chrono::steady_clock::now();
  UnknownMaps maps;
  json effective;
  auto logger = make_logger();

  if (method == "tgv" || method == "h1") {
    SolverConfig cfg;
    apply_solver_config(cfg_json, cfg);
    if (threads > 0) cfg.threads = threads;
    maps = method == "tgv" ? irgn_reconstruct(data, cfg, logger) : fit_h1(data, cfg, logger);
    effective = solver_config_json(cfg);
  } else if (method == "standard" || method == "multifield") {
    PixelFitConfig cfg;
    if (method == "standard") cfg.presmooth = true;
    apply_pixel_config(cfg_json, cfg);
    if (threads > 0) cfg.threads = threads;
    auto images = fourier_adjoint(data, data.protocol.mask);
    auto res = method == "standard" ? fit_pixelwise_single_field(images, cfg)
                                    : fit_pixelwise_multifield(images, cfg);
    maps = std::move(res.maps);
    effective = pixel_config_json(cfg);
    effective["failed_pixels"] = res.failed_pixels;
  } else {
    std::cerr << "unknown method: " << method << "\n";
    return 2;
  }
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(out);
  save_maps(maps, out, "maps");
  save_protocol(data.protocol, out);
  write_run_json(out, json{{"command", "fit"},
                           {"method", method},
                           {"input", in.string()},
                           {"seconds", dt},
                           {"config", effective}});
  if (logger) logger("{\"event\":\"fit_done\",\"seconds\":" + std::to_string(dt) + "}");
  return 0;
}

int cmd_eval(const std::vector<std::string> &maps_dirs, const std::string &truth_dir,
             const std::string &rois_file, const fs::path &out) {
  fs::create_directories(out);
  std::vector<RoiMask> rois;
  if (!rois_file.empty()) rois = load_rois(rois_file);

  std::optional<UnknownMaps> truth;
  if (!truth_dir.empty()) truth = load_maps(truth_dir, "truth");

  std::ofstream table(out / "mean_error.csv");
  table << "method";
  std::optional<AcquisitionProtocol> protocol;

  std::vector<std::pair<std::string, UnknownMaps>> fits;
  for (const auto &d : maps_dirs) {
    fits.emplace_back(fs::path(d).filename().string(), load_maps(d, "maps"));
    if (!protocol && fs::exists(fs::path(d) / "protocol.json")) protocol = load_protocol(d);
  }
  if (!protocol && !truth_dir.empty() && fs::exists(fs::path(truth_dir) / "protocol.json"))
    protocol = load_protocol(truth_dir);

  if (truth) {
    // error mask: all pixels with signal (C != 0)
    std::vector<uint8_t> mask(truth->C.size(), 0);
    for (size_t i = 0; i < mask.size(); ++i) mask[i] = truth->C[i] != cplx{} ? 1 : 0;

    int n_e = truth->n_e();
    for (int f = 0; f < n_e; ++f) table << ",field" << (f + 1);
    table << ",mean\r\n";
    for (auto &[name, m] : fits) {
      table << name;
      double acc = 0;
      for (int f = 0; f < n_e; ++f) {
        auto d = rel_abs_diff(m.t1[f], truth->t1[f], mask);
        acc += d.mean;
        table << "," << d.mean;
        export_csv(d.grid, out / (name + "_err_field" + std::to_string(f + 1) + ".csv"));
      }
      table << "," << acc / n_e << "\r\n";

      auto h = joint_histogram_2d(m.t1, truth->t1, mask, 64, 0.0, 0.5);
      std::ofstream hf(out / (name + "_hist2d.csv"));
      for (int r = 0; r < h.bins; ++r) {
        for (int c = 0; c < h.bins; ++c) hf << h.at(r, c) << (c + 1 < h.bins ? "," : "");
        hf << "\r\n";
      }
    }
  }

  if (!rois.empty()) {
    if (!protocol)
      throw std::invalid_argument("eval: dispersion output needs protocol.json beside the maps");
    std::ofstream disp(out / "dispersion.csv");
    disp << "field_T,roi,mean_t1_s,two_std_s\r\n";
    for (auto &[name, m] : fits)
      for (const auto &row : dispersion_profile(m, *protocol, rois))
        disp << row.field_T << "," << name << ":" << row.roi << "," << row.mean_t1 << ","
             << row.two_std << "\r\n";
  }

  write_run_json(out, json{{"command", "eval"},
                           {"maps", maps_dirs},
                           {"truth", truth_dir},
                           {"rois", rois_file}});
  return 0;
}

int cmd_export(const fs::path &in, const std::string &stem, const std::string &channel,
               const std::string &format, const std::string &part, double lo, double hi,
               const fs::path &out_file) {
  auto maps = load_maps(in, stem);
  auto stack = maps_to_stack(maps);
  std::vector<std::string> names = {"C"};
  for (int i = 0; i < maps.n_e(); ++i) names.push_back("alpha" + std::to_string(i + 1));
  for (int i = 0; i < maps.n_e(); ++i) names.push_back("T1_" + std::to_string(i + 1));
  int idx = -1;
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == channel) idx = static_cast<int>(i);
  if (idx < 0) {
    try {
      idx = std::stoi(channel);
    } catch (...) {
    }
  }
  if (idx < 0 || idx >= static_cast<int>(stack.size()))
    throw std::invalid_argument("export: unknown channel '" + channel + "'");

  const Grid &g = stack[idx];
  RealGrid r(g.ny(), g.nx());
  for (size_t i = 0; i < g.size(); ++i)
    r[i] = part == "real" ? g[i].real() : part == "imag" ? g[i].imag() : std::abs(g[i]);

  if (format == "csv") {
    export_csv(r, out_file);
  } else if (format == "pgm") {
    double wlo = lo, whi = hi;
    if (!(whi > wlo)) {
      wlo = r[0];
      whi = r[0];
      for (size_t i = 0; i < r.size(); ++i) {
        wlo = std::min(wlo, r[i]);
        whi = std::max(whi, r[i]);
      }
      if (!(whi > wlo)) whi = wlo + 1;
    }
    write_pgm16(r, wlo, whi, out_file);
  } else {
    throw std::invalid_argument("export: unknown format '" + format + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"FFC-MRI relaxometry toolbox"};
  app.require_subcommand(1);

  // phantom
  double noise = 0.0;
  int matrix = 128;
  std::string protocol_name = "sim3field";
  uint64_t seed = 0;
  std::string out_dir;
  auto *ph = app.add_subcommand("phantom", "simulate a phantom dataset");
  ph->add_option("--noise", noise, "noise std as a fraction of unit signal")
      ->check(CLI::NonNegativeNumber);
  ph->add_option("--matrix", matrix, "matrix size")->check(CLI::Range(8, 4096));
  ph->add_option("--protocol", protocol_name, "protocol preset");
  ph->add_option("--seed", seed, "noise seed");
  ph->add_option("--out", out_dir, "output dataset directory")->required();

  // fit
  std::string method, fit_in, fit_out, config_file;
  int threads = 0;
  auto *ft = app.add_subcommand("fit", "reconstruct parameter maps");
  ft->add_option("--method", method, "standard|multifield|h1|tgv")->required();
  ft->add_option("--in", fit_in, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ft->add_option("--out", fit_out, "maps output directory")->required();
  ft->add_option("--config", config_file, "solver config JSON")->check(CLI::ExistingFile);
  ft->add_option("--threads", threads, "thread cap (1 = bit reproducible)");

  // eval
  std::vector<std::string> maps_dirs;
  std::string truth_dir, rois_file, eval_out;
  auto *ev = app.add_subcommand("eval", "compare maps against the truth");
  ev->add_option("--maps", maps_dirs, "maps directories")->required();
  ev->add_option("--truth", truth_dir, "truth maps directory");
  ev->add_option("--rois", rois_file, "ROI file for dispersion stats");
  ev->add_option("--out", eval_out, "report directory")->required();

  // export
  std::string exp_in, exp_stem = "maps", exp_channel, exp_format = "csv", exp_part = "abs",
              exp_out;
  double win_lo = 0, win_hi = 0;
  auto *ex = app.add_subcommand("export", "convert a map channel to CSV or PGM");
  ex->add_option("--in", exp_in, "maps directory")->required()->check(CLI::ExistingDirectory);
  ex->add_option("--stem", exp_stem, "file stem (maps|truth)");
  ex->add_option("--channel", exp_channel, "channel name or index")->required();
  ex->add_option("--format", exp_format, "csv|pgm");
  ex->add_option("--part", exp_part, "real|imag|abs");
  ex->add_option("--window", win_lo, "PGM window lower bound");
  ex->add_option("--window-hi", win_hi, "PGM window upper bound");
  ex->add_option("--out", exp_out, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ph->parsed()) return cmd_phantom(noise, matrix, protocol_name, seed, out_dir);
    if (ft->parsed()) return cmd_fit(method, fit_in, fit_out, config_file, threads);
    if (ev->parsed()) return cmd_eval(maps_dirs, truth_dir, rois_file, eval_out);
    if (ex->parsed())
      return cmd_export(exp_in, exp_stem, exp_channel, exp_format, exp_part, win_lo, win_hi,
                        exp_out);
  } catch (const solver_error &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
