#include "priorsplat/camera.hpp"

#include <fstream>
#include <iomanip>

#include "json.hpp"

namespace priorsplat {

void CameraView::validate(double tol) const {
  const Mat3 r = rotation();
  if (((r * r.transpose()) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol ||
      std::abs(r.determinant() - 1.0) > tol) {
    throw ValidationError("camera '" + id + "': w2c rotation is not a proper rotation");
  }
  if (w2c.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
    throw ValidationError("camera '" + id + "': w2c last row must be (0,0,0,1)");
  }
  if (width <= 0 || height <= 0) throw ValidationError("camera '" + id + "': invalid image size");
  if (!(fx > 0) || !(fy > 0)) throw ValidationError("camera '" + id + "': focal lengths must be positive");
  if (!(cx > 0 && cx < width && cy > 0 && cy < height)) {
    throw ValidationError("camera '" + id + "': principal point outside image");
  }
}

Vec3 camera_center(const CameraView& view) { return -(view.rotation().transpose() * view.translation()); }

double scene_extent(const std::vector<CameraView>& views) {
  if (views.empty()) throw ValidationError("scene_extent: no views");
  Vec3 mean = Vec3::Zero();
  for (const auto& v : views) mean += camera_center(v);
  mean /= static_cast<double>(views.size());
  double r = 0;
  for (const auto& v : views) r = std::max(r, (camera_center(v) - mean).norm());
  if (!(r > 0)) r = 1.0;
  return 1.1 * r;
}

std::optional<Projection> project(const CameraView& view, const Vec3& p) {
  const Vec3 c = view.to_camera(p);
  if (c.z() <= 1e-6) return std::nullopt;
  Projection out;
  out.z = c.z();
  out.u = view.fx * c.x() / c.z() + view.cx;
  out.v = view.fy * c.y() / c.z() + view.cy;
  if (out.u < 0 || out.u >= view.width || out.v < 0 || out.v >= view.height) return std::nullopt;
  return out;
}

Vec3 pixel_direction_camera(const CameraView& view, double x, double y) {
  return Vec3((x + 0.5 - view.cx) / view.fx, (y + 0.5 - view.cy) / view.fy, 1.0);
}

Ray pixel_ray(const CameraView& view, int x, int y) {
  if (x < 0 || x >= view.width || y < 0 || y >= view.height) {
    throw ValidationError("pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                          ") outside " + std::to_string(view.width) + "x" + std::to_string(view.height));
  }
  Ray ray;
  ray.origin = camera_center(view);
  ray.direction = (view.rotation().transpose() * pixel_direction_camera(view, x, y)).normalized();
  return ray;
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw ValidationError("look_at: up is parallel to the view direction");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = -(r * eye);
  return m;
}

std::vector<CameraView> read_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<CameraView> views;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      CameraView v;
      v.id = j.at("id").get<std::string>();
      v.width = j.at("width").get<int>();
      v.height = j.at("height").get<int>();
      v.fx = j.at("fx").get<double>();
      v.fy = j.at("fy").get<double>();
      v.cx = j.at("cx").get<double>();
      v.cy = j.at("cy").get<double>();
      const auto m = j.at("w2c").get<std::vector<double>>();
      if (m.size() != 16) throw ParseError(where + ": w2c must have 16 entries");
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) v.w2c(r, c) = m[4 * r + c];
      }
      v.validate();
      views.push_back(std::move(v));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  if (views.empty()) throw ValidationError(path.string() + ": no cameras");
  return views;
}

void write_cameras(const std::filesystem::path& path, const std::vector<CameraView>& views) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& v : views) {
    nlohmann::json j;
    j["id"] = v.id;
    j["width"] = v.width;
    j["height"] = v.height;
    j["fx"] = v.fx;
    j["fy"] = v.fy;
    j["cx"] = v.cx;
    j["cy"] = v.cy;
    std::vector<double> m(16);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) m[4 * r + c] = v.w2c(r, c);
    }
    j["w2c"] = m;
    out << j.dump() << "\n";
  }
}

}  // namespace priorsplat
