#pragma once

#include <filesystem>
#include <vector>

#include "priorsplat/common.hpp"

namespace priorsplat {

// Row-major H x W grid; (x, y) = (column, row), row 0 at the top.
template <typename T>
struct Map2D {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Map2D() = default;
  Map2D(int w, int h, const T& fill = T()) : width(w), height(h), data(size_t(w) * h, fill) {}

  size_t size() const { return data.size(); }
  size_t index(int x, int y) const { return size_t(y) * width + x; }
  T& at(int x, int y) { return data[index(x, y)]; }
  const T& at(int x, int y) const { return data[index(x, y)]; }
  T& operator[](size_t i) { return data[i]; }
  const T& operator[](size_t i) const { return data[i]; }
  bool same_shape(int w, int h) const { return width == w && height == h; }
};

using ScalarMap = Map2D<double>;
using ColorMap = Map2D<Vec3>;
using MaskMap = Map2D<uint8_t>;

double linear_to_srgb(double v);
double srgb_to_linear(double v);

// PFM: "Pf" for one channel, "PF" for three; little-endian (scale -1.0),
// rows stored bottom-to-top.
void write_pfm(const std::filesystem::path& path, const ScalarMap& map);
void write_pfm(const std::filesystem::path& path, const ColorMap& map);
ScalarMap read_pfm_scalar(const std::filesystem::path& path);
ColorMap read_pfm_color(const std::filesystem::path& path);

// 8-bit sRGB PNG from/to linear RGB.
void write_png_srgb(const std::filesystem::path& path, const ColorMap& linear);
ColorMap read_png_srgb(const std::filesystem::path& path);

// 8-bit grayscale PNG, 0 / 255.
void write_png_mask(const std::filesystem::path& path, const MaskMap& mask);
MaskMap read_png_mask(const std::filesystem::path& path);

}  // namespace priorsplat
