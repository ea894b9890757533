#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ffc/data.hpp"

namespace ffc {

/// I/O failure with file name and offending field in the message.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset container: protocol.json + kspace.cplx (+ optional mask.pgm).
KSpaceSeries load_dataset(const std::filesystem::path &dir);
void save_dataset(const KSpaceSeries &ks, const std::filesystem::path &dir);

// Maps container: maps.json + maps.cplx (little-endian float32 re/im pairs).
void save_maps(const UnknownMaps &maps, const std::filesystem::path &dir,
               const std::string &stem = "maps");
UnknownMaps load_maps(const std::filesystem::path &dir,
                      const std::string &stem = "maps");

/// RFC-4180 CSV, row-major, 17 significant digits. Rejects non-finite values.
void export_csv(const RealGrid &grid, const std::filesystem::path &file);

// ROI container: run-length encoded row-major set runs.
void save_rois(const std::vector<RoiMask> &rois, const std::filesystem::path &file);
std::vector<RoiMask> load_rois(const std::filesystem::path &file);

// P5 PGM helpers (maxval 255 for masks, 65535 for exports).
void write_pgm8(const std::vector<uint8_t> &pix, int ny, int nx,
                const std::filesystem::path &file);
std::vector<uint8_t> read_pgm8(const std::filesystem::path &file, int &ny, int &nx);
void write_pgm16(const RealGrid &grid, double lo, double hi,
                 const std::filesystem::path &file);

AcquisitionProtocol load_protocol(const std::filesystem::path &dir);
void save_protocol(const AcquisitionProtocol &p, const std::filesystem::path &dir);

}  // namespace ffc
