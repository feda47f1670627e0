#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polarguide/analysis.hpp"
#include "polarguide/image.hpp"
#include "polarguide/polarimetry.hpp"

namespace polarguide::io {

// Portable float map: "PF" (3 channels) or "Pf" (1 channel), scale -1.0
// (little-endian), rows stored bottom to top. Values are written as float32.
void write_pfm(const std::filesystem::path& path, const Image& img);
// Accepts either byte order. Throws kIo on missing or malformed files.
Image read_pfm(const std::filesystem::path& path);

// Masks round-trip as single-channel PFM holding 0 or 1.
void write_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_mask(const std::filesystem::path& path);

// 8-bit RGB PNG from an H x W x 3 (or H x W x 1, replicated) grid in [0, 1].
void write_png(const std::filesystem::path& path, const Image& rgb);

// Standard (n + 1) / 2 mapping.
Image normals_visual(const NormalMap& n);
// Brighter is lower error: value = 1 - min(err / max_deg, 1); NaN pixels are black.
Image error_visual(const Image& errors, double max_deg = 45.0);
// Grey ramp of a 1-channel grid scaled by `scale`, clamped to [0, 1].
Image grey_visual(const Image& values, double scale = 1.0);

// CSV with a header row; values use "%.9g".
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string format_number(double v);

CsvTable sweep_csv(const SweepTable& table);

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  Vec3 color{0.0, 0.0, 0.0};
};
// Static line chart (no text): framed axes, auto-scaled, one polyline with
// point markers per series.
Image line_plot(const std::vector<PlotSeries>& series, int width = 480, int height = 320);

// Captures and Stokes maps as stored by the CLI.
IntensityCapture read_capture(const std::filesystem::path& dir);
void write_capture(const std::filesystem::path& dir, const IntensityCapture& cap);
StokesMap read_stokes(const std::filesystem::path& dir, const std::string& prefix = "stokes_");
void write_stokes(const std::filesystem::path& dir, const StokesMap& s, const std::string& prefix = "stokes_");

// FNV-1a 64-bit over file bytes, as a 16-digit hex string.
std::string file_checksum(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

}  // namespace polarguide::io
