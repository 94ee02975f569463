#include "priorsplat/image.hpp"

#include <png.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace priorsplat {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary file I/O assumes a little-endian host");

void write_pfm_raw(const std::filesystem::path& path, int w, int h, int channels,
                   const std::vector<float>& rows_top_down) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << (channels == 1 ? "Pf" : "PF") << "\n" << w << " " << h << "\n-1.0\n";
  const size_t row = size_t(w) * channels;
  for (int y = h - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(rows_top_down.data() + size_t(y) * row),
              std::streamsize(row * sizeof(float)));
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<float> read_pfm_raw(const std::filesystem::path& path, int expected_channels,
                                int& w, int& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string magic;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  if (!in) throw ParseError(path.string() + ": malformed PFM header");
  in.get();  // single whitespace after the scale
  const int channels = magic == "Pf" ? 1 : magic == "PF" ? 3 : 0;
  if (channels == 0) throw ParseError(path.string() + ": unknown PFM magic '" + magic + "'");
  if (channels != expected_channels) {
    throw ParseError(path.string() + ": expected " + std::to_string(expected_channels) +
                     "-channel PFM, found " + std::to_string(channels));
  }
  if (w <= 0 || h <= 0) throw ParseError(path.string() + ": invalid PFM dimensions");
  const size_t row = size_t(w) * channels;
  std::vector<float> data(row * h);
  const auto header_end = in.tellg();
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(data.data() + size_t(y) * row),
            std::streamsize(row * sizeof(float)));
    if (!in) {
      throw ParseError(path.string() + ": truncated PFM data at byte " +
                       std::to_string(static_cast<long long>(header_end) +
                                      static_cast<long long>((h - 1 - y) * row * sizeof(float))));
    }
  }
  if (scale > 0) {
    for (auto& f : data) {
      uint32_t u;
      std::memcpy(&u, &f, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&f, &u, 4);
    }
  }
  return data;
}

}  // namespace

double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_to_linear(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

void write_pfm(const std::filesystem::path& path, const ScalarMap& map) {
  std::vector<float> rows(map.size());
  for (size_t i = 0; i < map.size(); ++i) rows[i] = static_cast<float>(map[i]);
  write_pfm_raw(path, map.width, map.height, 1, rows);
}

void write_pfm(const std::filesystem::path& path, const ColorMap& map) {
  std::vector<float> rows(map.size() * 3);
  for (size_t i = 0; i < map.size(); ++i) {
    for (int c = 0; c < 3; ++c) rows[3 * i + c] = static_cast<float>(map[i][c]);
  }
  write_pfm_raw(path, map.width, map.height, 3, rows);
}

ScalarMap read_pfm_scalar(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto raw = read_pfm_raw(path, 1, w, h);
  ScalarMap map(w, h);
  for (size_t i = 0; i < map.size(); ++i) map[i] = raw[i];
  return map;
}

ColorMap read_pfm_color(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto raw = read_pfm_raw(path, 3, w, h);
  ColorMap map(w, h);
  for (size_t i = 0; i < map.size(); ++i) map[i] = Vec3(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
  return map;
}

void write_png_srgb(const std::filesystem::path& path, const ColorMap& linear) {
  std::vector<uint8_t> buf(linear.size() * 3);
  for (size_t i = 0; i < linear.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      buf[3 * i + c] = static_cast<uint8_t>(std::lround(linear_to_srgb(linear[i][c]) * 255.0));
    }
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(linear.width);
  img.height = static_cast<png_uint_32>(linear.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error("png write failed for " + path.string() + ": " + img.message);
  }
}

ColorMap read_png_srgb(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ParseError("cannot read png " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    throw ParseError("cannot decode png " + path.string() + ": " + img.message);
  }
  ColorMap out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (size_t i = 0; i < out.size(); ++i) {
    for (int c = 0; c < 3; ++c) out[i][c] = srgb_to_linear(buf[3 * i + c] / 255.0);
  }
  return out;
}

void write_png_mask(const std::filesystem::path& path, const MaskMap& mask) {
  std::vector<uint8_t> buf(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) buf[i] = mask[i] ? 255 : 0;
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(mask.width);
  img.height = static_cast<png_uint_32>(mask.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error("png write failed for " + path.string() + ": " + img.message);
  }
}

MaskMap read_png_mask(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ParseError("cannot read png " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    throw ParseError("cannot decode png " + path.string() + ": " + img.message);
  }
  MaskMap out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (size_t i = 0; i < out.size(); ++i) out[i] = buf[i] >= 128 ? 1 : 0;
  return out;
}

}  // namespace priorsplat
