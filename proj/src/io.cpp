#include "polarguide/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "polarguide/bridge_protocol.hpp"
#include "polarguide/error.hpp"

namespace polarguide::io {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorKind::kIo, "cannot open " + path.string() + ": " + std::strerror(errno));
  return f;
}

bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

// Reads one whitespace-delimited token of the PFM header.
std::string header_token(std::FILE* f, const fs::path& path) {
  std::string tok;
  int c;
  while ((c = std::fgetc(f)) != EOF && std::isspace(c)) {
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = std::fgetc(f);
  }
  if (tok.empty()) fail(ErrorKind::kIo, "truncated PFM header in " + path.string());
  return tok;
}

}  // namespace

void write_pfm(const fs::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    fail(ErrorKind::kIo, "PFM supports 1 or 3 channels, got " + img.shape_string());
  }
  File f = open_file(path, "wb");
  std::fprintf(f.get(), "%s\n%d %d\n-1.0\n", img.channels() == 3 ? "PF" : "Pf", img.width(), img.height());
  const bool swap = !host_is_little_endian();
  std::vector<float> row(static_cast<std::size_t>(img.width()) * img.channels());
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) row[x * img.channels() + c] = static_cast<float>(img(y, x, c));
    }
    if (swap) {
      for (float& v : row) {
        std::uint8_t b[4];
        std::memcpy(b, &v, 4);
        std::reverse(b, b + 4);
        std::memcpy(&v, b, 4);
      }
    }
    if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) != row.size()) {
      fail(ErrorKind::kIo, "short write to " + path.string());
    }
  }
}

Image read_pfm(const fs::path& path) {
  File f = open_file(path, "rb");
  const std::string magic = header_token(f.get(), path);
  int channels;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    fail(ErrorKind::kIo, path.string() + " is not a PFM file");
  }
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(header_token(f.get(), path));
    height = std::stoi(header_token(f.get(), path));
    scale = std::stod(header_token(f.get(), path));
  } catch (const std::logic_error&) {
    fail(ErrorKind::kIo, "malformed PFM header in " + path.string());
  }
  if (width <= 0 || height <= 0 || scale == 0.0) fail(ErrorKind::kIo, "malformed PFM header in " + path.string());
  const bool file_little = scale < 0.0;
  const bool swap = file_little != host_is_little_endian();
  Image img(height, width, channels);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {
    if (std::fread(row.data(), sizeof(float), row.size(), f.get()) != row.size()) {
      fail(ErrorKind::kIo, "truncated PFM data in " + path.string());
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      float v = row[i];
      if (swap) {
        std::uint8_t b[4];
        std::memcpy(b, &v, 4);
        std::reverse(b, b + 4);
        std::memcpy(&v, b, 4);
      }
      img(y, static_cast<int>(i) / channels, static_cast<int>(i) % channels) = v;
    }
  }
  return img;
}

void write_mask(const fs::path& path, const Mask& mask) {
  Image img(mask.height(), mask.width(), 1);
  for (std::size_t i = 0; i < mask.pixels(); ++i) img[i] = mask[i] ? 1.0 : 0.0;
  write_pfm(path, img);
}

Mask read_mask(const fs::path& path) {
  const Image img = read_pfm(path);
  if (img.channels() != 1) fail(ErrorKind::kIo, path.string() + " is not a single-channel mask");
  Mask m(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) m.set(y, x, img(y, x, 0) > 0.5);
  }
  return m;
}

void write_png(const fs::path& path, const Image& rgb) {
  if (rgb.channels() != 1 && rgb.channels() != 3) fail(ErrorKind::kIo, "PNG output needs 1 or 3 channels");
  File f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "libpng initialisation failed");
  }
  std::vector<png_byte> buffer(static_cast<std::size_t>(rgb.width()) * rgb.height() * 3);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = rgb(y, x, rgb.channels() == 3 ? c : 0);
        const double clamped = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
        buffer[(static_cast<std::size_t>(y) * rgb.width() + x) * 3 + c] =
            static_cast<png_byte>(std::lround(clamped * 255.0));
      }
    }
  }
  std::vector<png_bytep> rows(rgb.height());
  for (int y = 0; y < rgb.height(); ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * rgb.width() * 3;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "libpng failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, rgb.width(), rgb.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image normals_visual(const NormalMap& n) {
  Image out(n.height(), n.width(), 3);
  for (std::size_t i = 0; i < n.size(); ++i) out[i] = 0.5 * (n[i] + 1.0);
  return out;
}

Image error_visual(const Image& errors, double max_deg) {
  Image out(errors.height(), errors.width(), 1);
  for (std::size_t i = 0; i < errors.pixels(); ++i) {
    const double e = errors[i];
    out[i] = std::isfinite(e) ? 1.0 - std::min(e / max_deg, 1.0) : 0.0;
  }
  return out;
}

Image grey_visual(const Image& values, double scale) {
  Image out(values.height(), values.width(), 1);
  for (std::size_t i = 0; i < values.pixels(); ++i) out[i] = std::clamp(values[i * values.channels()] * scale, 0.0, 1.0);
  return out;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string());
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

CsvTable sweep_csv(const SweepTable& table) {
  CsvTable csv{{table.parameter, "label", "mae_unguided", "mae_guided", "final_loss"}, {}};
  for (const SweepRow& r : table.rows) {
    csv.rows.push_back({format_number(r.value), r.label, format_number(r.mae_unguided), format_number(r.mae_guided),
                        format_number(r.final_loss)});
  }
  return csv;
}

Image line_plot(const std::vector<PlotSeries>& series, int width, int height) {
  Image img(height, width, 3, 1.0);
  const int margin = 24;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const PlotSeries& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x0 <= x1)) return img;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto put = [&](int px, int py, const Vec3& c) {
    if (px < 0 || py < 0 || px >= width || py >= height) return;
    for (int k = 0; k < 3; ++k) img(py, px, k) = c[k];
  };
  const Vec3 axis{0.3, 0.3, 0.3};
  for (int x = margin; x <= width - margin; ++x) put(x, height - margin, axis), put(x, margin, axis);
  for (int y = margin; y <= height - margin; ++y) put(margin, y, axis), put(width - margin, y, axis);
  auto to_px = [&](double x, double y) {
    const double u = margin + (x - x0) / (x1 - x0) * (width - 2 * margin);
    const double v = height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin);
    return std::pair<double, double>{u, v};
  };
  for (const PlotSeries& s : series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto [u, v] = to_px(s.x[i], s.y[i]);
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) put(static_cast<int>(std::lround(u)) + dx, static_cast<int>(std::lround(v)) + dy, s.color);
      }
      if (i + 1 == n) break;
      const auto [u2, v2] = to_px(s.x[i + 1], s.y[i + 1]);
      const int steps = static_cast<int>(std::max(std::abs(u2 - u), std::abs(v2 - v))) + 1;
      for (int k = 0; k <= steps; ++k) {
        const double a = static_cast<double>(k) / steps;
        put(static_cast<int>(std::lround(u + a * (u2 - u))), static_cast<int>(std::lround(v + a * (v2 - v))), s.color);
      }
    }
  }
  return img;
}

IntensityCapture read_capture(const fs::path& dir) {
  IntensityCapture cap{read_pfm(dir / "i000.pfm"), read_pfm(dir / "i045.pfm"), read_pfm(dir / "i090.pfm"),
                       read_pfm(dir / "i135.pfm")};
  return cap;
}

void write_capture(const fs::path& dir, const IntensityCapture& cap) {
  write_pfm(dir / "i000.pfm", cap.i000);
  write_pfm(dir / "i045.pfm", cap.i045);
  write_pfm(dir / "i090.pfm", cap.i090);
  write_pfm(dir / "i135.pfm", cap.i135);
}

StokesMap read_stokes(const fs::path& dir, const std::string& prefix) {
  StokesMap s{read_pfm(dir / (prefix + "s0.pfm")), read_pfm(dir / (prefix + "s1.pfm")),
              read_pfm(dir / (prefix + "s2.pfm"))};
  check_stokes(s);
  return s;
}

void write_stokes(const fs::path& dir, const StokesMap& s, const std::string& prefix) {
  write_pfm(dir / (prefix + "s0.pfm"), s.s0);
  write_pfm(dir / (prefix + "s1.pfm"), s.s1);
  write_pfm(dir / (prefix + "s2.pfm"), s.s2);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(bridge::checksum(bytes));
}

}  // namespace polarguide::io
