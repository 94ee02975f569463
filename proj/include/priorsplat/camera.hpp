#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "priorsplat/geometry.hpp"

namespace priorsplat {

// Pinhole camera. The camera frame looks along +z with x to the right and y
// down; pixel (0, 0) is the top-left pixel and rays pass through pixel
// centers (x + 0.5, y + 0.5). No lens distortion.
struct CameraView {
  std::string id;
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  Mat4 w2c = Mat4::Identity();

  Mat3 rotation() const { return w2c.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return w2c.topRightCorner<3, 1>(); }
  Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }

  // Throws ValidationError when the invariants do not hold.
  void validate(double tol = 1e-6) const;
};

struct Projection {
  double u = 0;
  double v = 0;
  double z = 0;
};

Vec3 camera_center(const CameraView& view);

// 1.1 x the largest distance of a camera center from the mean center.
double scene_extent(const std::vector<CameraView>& views);

// Returns none when z <= 1e-6 or the pixel falls outside [0,w) x [0,h).
std::optional<Projection> project(const CameraView& view, const Vec3& p);

// Camera-frame (unnormalized) direction through the center of pixel (x, y).
Vec3 pixel_direction_camera(const CameraView& view, double x, double y);

// Unit world-space ray through the center of pixel (x, y). Throws
// ValidationError for out-of-range pixels.
Ray pixel_ray(const CameraView& view, int x, int y);

// World-to-camera matrix for a camera at `eye` looking at `target`; `up` is
// the world up direction (image y points along -up).
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

// JSON-lines cameras file; one {"id","width","height","fx","fy","cx","cy",
// "w2c":[16 row-major]} object per line.
std::vector<CameraView> read_cameras(const std::filesystem::path& path);
void write_cameras(const std::filesystem::path& path, const std::vector<CameraView>& views);

}  // namespace priorsplat
