#include "ffc/protocol.hpp"

#include <cmath>
#include <stdexcept>

namespace ffc {

std::vector<AcquisitionProtocol::Measurement> AcquisitionProtocol::measurements() const {
  std::vector<Measurement> out;
  out.reserve(n_meas());
  for (int i = 0; i < n_fields(); ++i)
    for (double t : evolution_times_s[i]) out.push_back({i, t});
  return out;
}

void AcquisitionProtocol::validate() const {
  auto fail = [](const std::string &what) { throw std::invalid_argument("AcquisitionProtocol: " + what); };
  if (!(detection_field_T > 0) || !std::isfinite(detection_field_T))
    fail("detection_field_T must be strictly positive");
  if (evolution_fields_T.empty()) fail("evolution_fields_T is empty");
  for (double f : evolution_fields_T)
    if (!(f > 0) || !std::isfinite(f)) fail("evolution_fields_T entries must be strictly positive");
  if (evolution_times_s.size() != evolution_fields_T.size())
    fail("evolution_times_s must have one list per field");
  for (size_t i = 0; i < evolution_times_s.size(); ++i) {
    const auto &ts = evolution_times_s[i];
    if (ts.empty()) fail("evolution_times_s[" + std::to_string(i) + "] is empty");
    for (double t : ts)
      if (!(t > 0) || !std::isfinite(t))
        fail("evolution_times_s[" + std::to_string(i) + "] entries must be strictly positive");
    for (size_t j = 1; j < ts.size(); ++j)
      if (!(ts[j] < ts[j - 1]))
        fail("evolution_times_s[" + std::to_string(i) + "] must be strictly decreasing");
  }
  if (nx <= 0 || ny <= 0) fail("matrix dimensions must be positive");
  if (mask) {
    if (mask->size() != static_cast<size_t>(nx) * ny) fail("mask size does not match matrix");
    bool any = false;
    for (uint8_t m : *mask) any |= (m != 0);
    if (!any) fail("mask is empty");
  }
}

namespace {
AcquisitionProtocol make_protocol(double det, std::vector<double> fields,
                                  std::vector<std::vector<double>> times_ms, int matrix) {
  AcquisitionProtocol p;
  p.detection_field_T = det;
  p.evolution_fields_T = std::move(fields);
  for (auto &ts : times_ms) {
    for (auto &t : ts) t *= 1e-3;  // stored in seconds
    p.evolution_times_s.push_back(std::move(ts));
  }
  p.nx = p.ny = matrix;
  return p;
}
}  // namespace

AcquisitionProtocol preset_sim3field(int matrix) {
  return make_protocol(0.2, {0.2, 0.0211, 0.0022},
                       {{455, 242, 129, 68, 36}, {282, 150, 80, 42, 23}, {136, 73, 39, 21, 11}},
                       matrix);
}

AcquisitionProtocol preset_patient2_4field(int matrix) {
  return make_protocol(0.2, {0.2, 0.037, 0.0069, 0.0013},
                       {{455, 196, 84, 36}, {338, 145, 63, 27}, {196, 84, 36, 16}, {114, 49, 21, 9}},
                       matrix);
}

AcquisitionProtocol preset_by_name(const std::string &name, int matrix) {
  if (name == "sim3field") return preset_sim3field(matrix);
  if (name == "patient2-4field") return preset_patient2_4field(matrix);
  throw std::invalid_argument("unknown protocol preset: " + name);
}

}  // namespace ffc
