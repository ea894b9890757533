#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "ffc/data.hpp"
#include "ffc/io.hpp"
#include "ffc/rng.hpp"

using namespace ffc;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const char *tag) {
  auto p = fs::temp_directory_path() / (std::string("ffc_test_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

KSpaceSeries random_series(const AcquisitionProtocol &p, uint64_t seed) {
  KSpaceSeries ks;
  ks.protocol = p;
  uint64_t ctr = 0;
  for (int n = 0; n < p.n_meas(); ++n) {
    Grid g(p.ny, p.nx);
    for (size_t i = 0; i < g.size(); ++i)
      g[i] = cplx(counter_uniform(seed, ctr++) - 0.5, counter_uniform(seed, ctr++) - 0.5);
    ks.data.push_back(std::move(g));
  }
  return ks;
}
}  // namespace

TEST_CASE("protocol presets") {
  auto sim = preset_sim3field(128);
  CHECK(sim.n_fields() == 3);
  CHECK(sim.n_meas() == 15);
  CHECK(sim.detection_field_T == doctest::Approx(0.2));
  CHECK(sim.evolution_fields_T[1] == doctest::Approx(0.0211));
  CHECK(sim.evolution_times_s[0][0] == doctest::Approx(0.455));
  CHECK(sim.evolution_times_s[2][4] == doctest::Approx(0.011));
  sim.validate();

  auto pat = preset_patient2_4field(64);
  CHECK(pat.n_fields() == 4);
  CHECK(pat.n_meas() == 16);
  CHECK(pat.nx == 64);
  pat.validate();

  CHECK_THROWS_AS(preset_by_name("nope"), std::invalid_argument);
}

TEST_CASE("protocol validation rejects bad input") {
  auto p = preset_sim3field(16);
  SUBCASE("negative field") {
    p.evolution_fields_T[0] = -1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("ascending times") {
    std::reverse(p.evolution_times_s[1].begin(), p.evolution_times_s[1].end());
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("empty time list") {
    p.evolution_times_s[2].clear();
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("mask size mismatch") {
    p.mask = std::vector<uint8_t>(7, 1);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}

TEST_CASE("measurement ordering is field-major, times descending") {
  auto p = preset_sim3field(16);
  auto m = p.measurements();
  REQUIRE(m.size() == 15);
  CHECK(m[0].field == 0);
  CHECK(m[0].time_s == doctest::Approx(0.455));
  CHECK(m[4].time_s == doctest::Approx(0.036));
  CHECK(m[5].field == 1);
  CHECK(m[14].field == 2);
  CHECK(m[14].time_s == doctest::Approx(0.011));
}

TEST_CASE("maps stack round trip and T1 clamping") {
  UnknownMaps m = UnknownMaps::zeros(2, 4, 5);
  uint64_t ctr = 0;
  for (size_t i = 0; i < m.C.size(); ++i) m.C[i] = cplx(counter_uniform(1, ctr++), counter_uniform(1, ctr++));
  for (auto &a : m.alpha)
    for (size_t i = 0; i < a.size(); ++i) a[i] = cplx(counter_uniform(2, ctr++), counter_uniform(2, ctr++));
  for (auto &t : m.t1)
    for (size_t i = 0; i < t.size(); ++i) t[i] = 0.05 + counter_uniform(3, ctr++);

  auto s = maps_to_stack(m);
  REQUIRE(s.size() == 5);
  auto back = stack_to_maps(s);
  for (size_t i = 0; i < m.C.size(); ++i) {
    CHECK(back.C[i] == m.C[i]);
    CHECK(back.t1[1][i] == doctest::Approx(m.t1[1][i]));
  }

  // clamping: imaginary part of T1 channels is discarded, range enforced
  s[3][0] = cplx(25.0, 3.0);
  s[4][0] = cplx(-1.0, 0.1);
  auto c = stack_to_maps(s);
  CHECK(c.t1[0][0] <= UnknownMaps::kT1Ceiling);
  CHECK(c.t1[1][0] == UnknownMaps::kT1Floor);
  c.validate();
}

TEST_CASE("dataset round trip") {
  auto dir = temp_dir("dataset");
  auto p = preset_sim3field(12);
  auto ks = random_series(p, 99);
  save_dataset(ks, dir);
  auto back = load_dataset(dir);
  CHECK(back.protocol.n_meas() == 15);
  for (int n = 0; n < 15; ++n)
    for (size_t i = 0; i < ks.data[n].size(); ++i) {
      // float32 storage
      CHECK(back.data[n][i].real() == doctest::Approx(ks.data[n][i].real()).epsilon(1e-6));
      CHECK(back.data[n][i].imag() == doctest::Approx(ks.data[n][i].imag()).epsilon(1e-6));
    }
  fs::remove_all(dir);
}

TEST_CASE("dataset with mask round trip") {
  auto dir = temp_dir("dataset_mask");
  auto p = preset_sim3field(8);
  p.mask = std::vector<uint8_t>(64, 0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; x += 2) (*p.mask)[y * 8 + x] = 1;
  auto ks = random_series(p, 5);
  save_dataset(ks, dir);
  auto back = load_dataset(dir);
  REQUIRE(back.protocol.mask.has_value());
  CHECK(*back.protocol.mask == *p.mask);
  fs::remove_all(dir);
}

TEST_CASE("ascending time lists are reversed together with their data") {
  auto dir = temp_dir("ascending");
  auto p = preset_sim3field(8);
  auto ks = random_series(p, 17);
  save_dataset(ks, dir);

  // rewrite the header with ascending times for field 1 and permute the
  // payload slices the same way
  {
    std::ifstream in(dir / "protocol.json");
    std::string txt((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = txt.find("282.0");
    REQUIRE(pos != std::string::npos);
  }
  KSpaceSeries asc = ks;
  std::reverse(asc.data.begin() + 5, asc.data.begin() + 10);
  AcquisitionProtocol ap = p;
  std::reverse(ap.evolution_times_s[1].begin(), ap.evolution_times_s[1].end());
  // save_protocol would reject ascending lists via validate, so write by hand
  {
    std::ofstream out(dir / "protocol.json");
    out << "{\n\"detection_field_T\": 0.2,\n\"evolution_fields_T\": [0.2, 0.0211, 0.0022],\n"
        << "\"evolution_times_ms\": [[455,242,129,68,36],[23,42,80,150,282],[136,73,39,21,11]],\n"
        << "\"matrix\": [8, 8]\n}\n";
  }
  {
    std::ofstream out(dir / "kspace.cplx", std::ios::binary);
    for (const auto &g : asc.data)
      for (size_t i = 0; i < g.size(); ++i) {
        float re = static_cast<float>(g[i].real()), im = static_cast<float>(g[i].imag());
        out.write(reinterpret_cast<const char *>(&re), 4);
        out.write(reinterpret_cast<const char *>(&im), 4);
      }
  }
  auto back = load_dataset(dir);
  CHECK(back.protocol.evolution_times_s[1][0] == doctest::Approx(0.282));
  for (int n = 0; n < 15; ++n)
    CHECK(back.data[n][3].real() == doctest::Approx(ks.data[n][3].real()).epsilon(1e-6));
  fs::remove_all(dir);
}

TEST_CASE("dataset load failures carry the file name") {
  auto dir = temp_dir("badload");
  CHECK_THROWS_AS(load_dataset(dir), io_error);
  auto p = preset_sim3field(8);
  auto ks = random_series(p, 3);
  save_dataset(ks, dir);
  // truncate the payload
  fs::resize_file(dir / "kspace.cplx", 100);
  try {
    load_dataset(dir);
    FAIL("expected io_error");
  } catch (const io_error &e) {
    CHECK(std::string(e.what()).find("kspace.cplx") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("maps round trip") {
  auto dir = temp_dir("maps");
  UnknownMaps m = UnknownMaps::zeros(3, 6, 7);
  uint64_t ctr = 0;
  for (size_t i = 0; i < m.C.size(); ++i) m.C[i] = cplx(counter_uniform(4, ctr++), counter_uniform(4, ctr++));
  for (auto &t : m.t1)
    for (size_t i = 0; i < t.size(); ++i) t[i] = 0.01 + counter_uniform(5, ctr++);
  save_maps(m, dir);
  auto back = load_maps(dir);
  CHECK(back.n_e() == 3);
  CHECK(back.C[5].real() == doctest::Approx(m.C[5].real()).epsilon(1e-6));
  CHECK(back.t1[2][10] == doctest::Approx(m.t1[2][10]).epsilon(1e-6));
  fs::remove_all(dir);
}

TEST_CASE("roi RLE round trip") {
  auto dir = temp_dir("rois");
  RoiMask r1{"ring", 4, 6, std::vector<uint8_t>(24, 0)};
  r1.pixels[3] = r1.pixels[4] = r1.pixels[23] = 1;
  RoiMask r2{"full", 4, 6, std::vector<uint8_t>(24, 1)};
  save_rois({r1, r2}, dir / "rois.json");
  auto back = load_rois(dir / "rois.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == "ring");
  CHECK(back[0].pixels == r1.pixels);
  CHECK(back[1].pixels == r2.pixels);
  CHECK(back[1].count() == 24);
  fs::remove_all(dir);
}

TEST_CASE("csv export format") {
  auto dir = temp_dir("csv");
  RealGrid g(2, 3);
  g(0, 0) = 1.5;
  g(0, 1) = -2.25;
  g(0, 2) = 0.1;
  g(1, 0) = 4;
  g(1, 1) = 5;
  g(1, 2) = 6;
  export_csv(g, dir / "g.csv");
  std::ifstream in(dir / "g.csv", std::ios::binary);
  std::string txt((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(txt.find("1.5,-2.25,0.1") == 0);
  CHECK(txt.find("\r\n") != std::string::npos);
  // 17 significant digits survive a round trip
  RealGrid h(1, 1);
  h[0] = 0.1234567890123456789;
  export_csv(h, dir / "h.csv");
  std::ifstream in2(dir / "h.csv");
  double v;
  in2 >> v;
  CHECK(v == h[0]);

  RealGrid bad(1, 1);
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(export_csv(bad, dir / "bad.csv"), io_error);
  fs::remove_all(dir);
}

TEST_CASE("pgm round trip") {
  auto dir = temp_dir("pgm");
  std::vector<uint8_t> pix(4 * 5);
  for (size_t i = 0; i < pix.size(); ++i) pix[i] = static_cast<uint8_t>(i * 12);
  write_pgm8(pix, 4, 5, dir / "m.pgm");
  int ny = 0, nx = 0;
  auto back = read_pgm8(dir / "m.pgm", ny, nx);
  CHECK(ny == 4);
  CHECK(nx == 5);
  CHECK(back == pix);
  fs::remove_all(dir);
}
