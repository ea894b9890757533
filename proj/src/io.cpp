#include "ffc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ffc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path &file) {
  std::ifstream in(file);
  if (!in) throw io_error(file.string() + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const std::exception &e) {
    throw io_error(file.string() + ": invalid JSON (" + e.what() + ")");
  }
  return j;
}

void write_json(const json &j, const fs::path &file) {
  std::ofstream out(file);
  if (!out) throw io_error(file.string() + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw io_error(file.string() + ": write failed");
}

std::vector<float> read_floats(const fs::path &file, size_t expected) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw io_error(file.string() + ": cannot open");
  auto bytes = static_cast<size_t>(in.tellg());
  if (bytes != expected * sizeof(float))
    throw io_error(file.string() + ": payload size mismatch, expected " +
                   std::to_string(expected * sizeof(float)) + " bytes, got " +
                   std::to_string(bytes));
  in.seekg(0);
  std::vector<float> v(expected);
  in.read(reinterpret_cast<char *>(v.data()), expected * sizeof(float));
  if (!in) throw io_error(file.string() + ": short read");
  return v;
}

void write_floats(const std::vector<float> &v, const fs::path &file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw io_error(file.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char *>(v.data()), v.size() * sizeof(float));
  if (!out) throw io_error(file.string() + ": write failed");
}

void grids_from_floats(const std::vector<float> &raw, std::vector<Grid> &grids, int ny, int nx,
                       const fs::path &file) {
  size_t k = 0;
  for (auto &g : grids) {
    g = Grid(ny, nx);
    for (size_t i = 0; i < g.size(); ++i) {
      float re = raw[k++], im = raw[k++];
      if (!std::isfinite(re) || !std::isfinite(im))
        throw io_error(file.string() + ": non-finite value at element " + std::to_string(k / 2 - 1));
      g[i] = cplx(re, im);
    }
  }
}

void grids_to_floats(const std::vector<Grid> &grids, std::vector<float> &raw) {
  for (const auto &g : grids)
    for (size_t i = 0; i < g.size(); ++i) {
      raw.push_back(static_cast<float>(g[i].real()));
      raw.push_back(static_cast<float>(g[i].imag()));
    }
}

}  // namespace

AcquisitionProtocol load_protocol(const fs::path &dir) {
  const fs::path file = dir / "protocol.json";
  json j = read_json(file);
  AcquisitionProtocol p;
  try {
    p.detection_field_T = j.at("detection_field_T").get<double>();
    p.evolution_fields_T = j.at("evolution_fields_T").get<std::vector<double>>();
    auto times_ms = j.at("evolution_times_ms").get<std::vector<std::vector<double>>>();
    auto matrix = j.at("matrix").get<std::vector<int>>();
    if (matrix.size() != 2) throw io_error(file.string() + ": field 'matrix' must be [N_x, N_y]");
    p.nx = matrix[0];
    p.ny = matrix[1];
    for (auto &ts : times_ms) {
      for (auto &t : ts) t *= 1e-3;
      p.evolution_times_s.push_back(std::move(ts));
    }
    if (j.contains("mask_file")) {
      auto mask_file = dir / j.at("mask_file").get<std::string>();
      int my = 0, mx = 0;
      auto pix = read_pgm8(mask_file, my, mx);
      if (my != p.ny || mx != p.nx)
        throw io_error(mask_file.string() + ": mask dimensions do not match 'matrix'");
      p.mask = std::move(pix);
    }
  } catch (const json::exception &e) {
    throw io_error(file.string() + ": " + e.what());
  }
  // Time lists may be given ascending; canonical order is descending. The
  // caller is responsible for permuting any attached data accordingly.
  try {
    p.validate();
  } catch (const std::invalid_argument &e) {
    throw io_error(file.string() + ": " + e.what());
  }
  return p;
}

void save_protocol(const AcquisitionProtocol &p, const fs::path &dir) {
  json j;
  j["detection_field_T"] = p.detection_field_T;
  j["evolution_fields_T"] = p.evolution_fields_T;
  std::vector<std::vector<double>> times_ms;
  for (const auto &ts : p.evolution_times_s) {
    std::vector<double> ms;
    for (double t : ts) ms.push_back(t * 1e3);
    times_ms.push_back(std::move(ms));
  }
  j["evolution_times_ms"] = times_ms;
  j["matrix"] = {p.nx, p.ny};
  if (p.mask) {
    j["mask_file"] = "mask.pgm";
    write_pgm8(*p.mask, p.ny, p.nx, dir / "mask.pgm");
  }
  write_json(j, dir / "protocol.json");
}

KSpaceSeries load_dataset(const fs::path &dir) {
  const fs::path pfile = dir / "protocol.json";
  json j = read_json(pfile);

  // Read the raw (possibly ascending) time lists first so data slices can be
  // permuted into the canonical descending order.
  std::vector<std::vector<double>> raw_times;
  try {
    raw_times = j.at("evolution_times_ms").get<std::vector<std::vector<double>>>();
  } catch (const json::exception &e) {
    throw io_error(pfile.string() + ": " + e.what());
  }

  AcquisitionProtocol p;
  {
    // Reuse the strict loader on a normalized copy of the header.
    json jn = j;
    std::vector<std::vector<double>> sorted = raw_times;
    for (auto &ts : sorted) {
      bool ascending = ts.size() >= 2 && ts.front() < ts.back();
      if (ascending) std::reverse(ts.begin(), ts.end());
    }
    jn["evolution_times_ms"] = sorted;
    AcquisitionProtocol q;
    try {
      q.detection_field_T = jn.at("detection_field_T").get<double>();
      q.evolution_fields_T = jn.at("evolution_fields_T").get<std::vector<double>>();
      auto matrix = jn.at("matrix").get<std::vector<int>>();
      if (matrix.size() != 2) throw io_error(pfile.string() + ": field 'matrix' must be [N_x, N_y]");
      q.nx = matrix[0];
      q.ny = matrix[1];
      for (auto &ts : sorted) {
        std::vector<double> s;
        for (double t : ts) s.push_back(t * 1e-3);
        q.evolution_times_s.push_back(std::move(s));
      }
      if (jn.contains("mask_file")) {
        auto mask_file = dir / jn.at("mask_file").get<std::string>();
        int my = 0, mx = 0;
        auto pix = read_pgm8(mask_file, my, mx);
        if (my != q.ny || mx != q.nx)
          throw io_error(mask_file.string() + ": mask dimensions do not match 'matrix'");
        q.mask = std::move(pix);
      }
    } catch (const json::exception &e) {
      throw io_error(pfile.string() + ": " + e.what());
    }
    try {
      q.validate();
    } catch (const std::invalid_argument &e) {
      throw io_error(pfile.string() + ": " + e.what());
    }
    p = std::move(q);
  }

  const fs::path kfile = dir / "kspace.cplx";
  size_t n_d = p.n_meas();
  auto raw = read_floats(kfile, n_d * p.ny * p.nx * 2);

  KSpaceSeries ks;
  ks.protocol = p;
  ks.data.resize(n_d);
  grids_from_floats(raw, ks.data, p.ny, p.nx, kfile);

  // Permute slices of fields whose declared time order was ascending.
  size_t offset = 0;
  for (size_t i = 0; i < raw_times.size(); ++i) {
    size_t nt = raw_times[i].size();
    bool ascending = nt >= 2 && raw_times[i].front() < raw_times[i].back();
    if (ascending) std::reverse(ks.data.begin() + offset, ks.data.begin() + offset + nt);
    offset += nt;
  }

  try {
    ks.validate();
  } catch (const std::invalid_argument &e) {
    throw io_error(kfile.string() + ": " + e.what());
  }
  return ks;
}

void save_dataset(const KSpaceSeries &ks, const fs::path &dir) {
  ks.validate();
  fs::create_directories(dir);
  save_protocol(ks.protocol, dir);
  std::vector<float> raw;
  raw.reserve(ks.data.size() * ks.protocol.ny * ks.protocol.nx * 2);
  grids_to_floats(ks.data, raw);
  write_floats(raw, dir / "kspace.cplx");
}

void save_maps(const UnknownMaps &maps, const fs::path &dir, const std::string &stem) {
  maps.validate();
  fs::create_directories(dir);
  json j;
  j["n_e"] = maps.n_e();
  j["matrix"] = {maps.nx(), maps.ny()};
  std::vector<std::string> names = {"C"};
  for (int i = 0; i < maps.n_e(); ++i) names.push_back("alpha" + std::to_string(i + 1));
  for (int i = 0; i < maps.n_e(); ++i) names.push_back("T1_" + std::to_string(i + 1));
  j["channel_names"] = names;
  write_json(j, dir / (stem + ".json"));

  std::vector<float> raw;
  raw.reserve(static_cast<size_t>(maps.n_channels()) * maps.ny() * maps.nx() * 2);
  auto stack = maps_to_stack(maps);
  grids_to_floats(stack, raw);
  write_floats(raw, dir / (stem + ".cplx"));
}

UnknownMaps load_maps(const fs::path &dir, const std::string &stem) {
  const fs::path jfile = dir / (stem + ".json");
  json j = read_json(jfile);
  int n_e = 0, nx = 0, ny = 0;
  try {
    n_e = j.at("n_e").get<int>();
    auto matrix = j.at("matrix").get<std::vector<int>>();
    if (matrix.size() != 2) throw io_error(jfile.string() + ": field 'matrix' must be [N_x, N_y]");
    nx = matrix[0];
    ny = matrix[1];
  } catch (const json::exception &e) {
    throw io_error(jfile.string() + ": " + e.what());
  }
  if (n_e <= 0 || nx <= 0 || ny <= 0) throw io_error(jfile.string() + ": invalid header values");

  const fs::path cfile = dir / (stem + ".cplx");
  size_t n_ch = 1 + 2 * static_cast<size_t>(n_e);
  auto raw = read_floats(cfile, n_ch * ny * nx * 2);
  std::vector<Grid> stack(n_ch);
  grids_from_floats(raw, stack, ny, nx, cfile);

  UnknownMaps m;
  m.C = stack[0];
  for (int i = 0; i < n_e; ++i) m.alpha.push_back(stack[1 + i]);
  for (int i = 0; i < n_e; ++i) {
    const Grid &g = stack[1 + n_e + i];
    RealGrid t(ny, nx);
    for (size_t k = 0; k < g.size(); ++k) t[k] = g[k].real();
    m.t1.push_back(std::move(t));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument &e) {
    throw io_error(cfile.string() + ": " + e.what());
  }
  return m;
}

void export_csv(const RealGrid &grid, const fs::path &file) {
  for (size_t i = 0; i < grid.size(); ++i)
    if (!std::isfinite(grid[i]))
      throw io_error(file.string() + ": grid contains non-finite value");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw io_error(file.string() + ": cannot open for writing");
  char buf[64];
  for (int y = 0; y < grid.ny(); ++y) {
    for (int x = 0; x < grid.nx(); ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", grid(y, x));
      out << buf;
      if (x + 1 < grid.nx()) out << ',';
    }
    out << "\r\n";
  }
  if (!out) throw io_error(file.string() + ": write failed");
}

void save_rois(const std::vector<RoiMask> &rois, const fs::path &file) {
  json j;
  j["rois"] = json::array();
  for (const auto &r : rois) {
    r.validate();
    json e;
    e["label"] = r.label;
    e["matrix"] = {r.nx, r.ny};
    std::vector<int64_t> rle;  // pairs (offset, length) of set runs, row-major
    size_t i = 0, n = r.pixels.size();
    while (i < n) {
      if (r.pixels[i]) {
        size_t start = i;
        while (i < n && r.pixels[i]) ++i;
        rle.push_back(static_cast<int64_t>(start));
        rle.push_back(static_cast<int64_t>(i - start));
      } else {
        ++i;
      }
    }
    e["rle"] = rle;
    j["rois"].push_back(e);
  }
  write_json(j, file);
}

std::vector<RoiMask> load_rois(const fs::path &file) {
  json j = read_json(file);
  std::vector<RoiMask> out;
  try {
    for (const auto &e : j.at("rois")) {
      RoiMask r;
      r.label = e.at("label").get<std::string>();
      auto matrix = e.at("matrix").get<std::vector<int>>();
      if (matrix.size() != 2) throw io_error(file.string() + ": roi 'matrix' must be [N_x, N_y]");
      r.nx = matrix[0];
      r.ny = matrix[1];
      r.pixels.assign(static_cast<size_t>(r.nx) * r.ny, 0);
      auto rle = e.at("rle").get<std::vector<int64_t>>();
      if (rle.size() % 2) throw io_error(file.string() + ": odd RLE length");
      for (size_t k = 0; k + 1 < rle.size(); k += 2) {
        int64_t start = rle[k], len = rle[k + 1];
        if (start < 0 || len <= 0 || static_cast<size_t>(start + len) > r.pixels.size())
          throw io_error(file.string() + ": RLE run out of bounds");
        std::fill(r.pixels.begin() + start, r.pixels.begin() + start + len, 1);
      }
      r.validate();
      out.push_back(std::move(r));
    }
  } catch (const json::exception &e) {
    throw io_error(file.string() + ": " + e.what());
  }
  return out;
}

void write_pgm8(const std::vector<uint8_t> &pix, int ny, int nx, const fs::path &file) {
  if (pix.size() != static_cast<size_t>(ny) * nx)
    throw io_error(file.string() + ": pixel buffer does not match shape");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw io_error(file.string() + ": cannot open for writing");
  out << "P5\n" << nx << " " << ny << "\n255\n";
  out.write(reinterpret_cast<const char *>(pix.data()), pix.size());
  if (!out) throw io_error(file.string() + ": write failed");
}

std::vector<uint8_t> read_pgm8(const fs::path &file, int &ny, int &nx) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw io_error(file.string() + ": cannot open");
  std::string magic;
  int maxval = 0;
  in >> magic >> nx >> ny >> maxval;
  if (magic != "P5" || maxval != 255 || nx <= 0 || ny <= 0)
    throw io_error(file.string() + ": expected binary P5 PGM with maxval 255");
  in.get();  // single whitespace after header
  std::vector<uint8_t> pix(static_cast<size_t>(ny) * nx);
  in.read(reinterpret_cast<char *>(pix.data()), pix.size());
  if (!in) throw io_error(file.string() + ": short read");
  return pix;
}

void write_pgm16(const RealGrid &grid, double lo, double hi, const fs::path &file) {
  if (!(hi > lo)) throw io_error(file.string() + ": invalid window");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw io_error(file.string() + ": cannot open for writing");
  out << "P5\n" << grid.nx() << " " << grid.ny() << "\n65535\n";
  for (size_t i = 0; i < grid.size(); ++i) {
    double t = (grid[i] - lo) / (hi - lo);
    t = std::min(std::max(t, 0.0), 1.0);
    auto v = static_cast<uint16_t>(std::lround(t * 65535.0));
    // big-endian per PGM convention
    char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(b, 2);
  }
  if (!out) throw io_error(file.string() + ": write failed");
}

}  // namespace ffc
