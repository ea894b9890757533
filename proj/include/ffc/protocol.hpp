#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ffc {

/// Acquisition layout: detection/evolution fields, per-field evolution times,
/// matrix size and an optional Cartesian sampling mask.
struct AcquisitionProtocol {
  double detection_field_T = 0.0;                    // B0 (= polarization field)
  std::vector<double> evolution_fields_T;            // B0^Ei
  std::vector<std::vector<double>> evolution_times_s;  // per field, descending
  int nx = 0, ny = 0;
  std::optional<std::vector<uint8_t>> mask;  // ny*nx, nonzero = acquired line

  int n_fields() const { return static_cast<int>(evolution_fields_T.size()); }
  int n_meas() const {
    int n = 0;
    for (const auto &t : evolution_times_s) n += static_cast<int>(t.size());
    return n;
  }

  struct Measurement {
    int field;       // index into evolution_fields_T
    double time_s;   // evolution time
  };

  /// Field-major, then time, in stored order.
  std::vector<Measurement> measurements() const;

  /// Throws std::invalid_argument naming the offending field on violation.
  void validate() const;
};

/// Table-driven presets (times in seconds, fields in tesla).
AcquisitionProtocol preset_sim3field(int matrix = 128);
AcquisitionProtocol preset_patient2_4field(int matrix = 128);
AcquisitionProtocol preset_by_name(const std::string &name, int matrix = 128);

}  // namespace ffc
