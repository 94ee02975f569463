#include "priorsplat/mesh_io.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <sstream>

#include "priorsplat/ply.hpp"

namespace priorsplat {

namespace {

uint8_t to_byte(double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "v") {
      Vec3 v;
      is >> v.x() >> v.y() >> v.z();
      if (!is) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (is >> tok) {
        const auto slash = tok.find('/');
        int idx = 0;
        try {
          idx = std::stoi(tok.substr(0, slash));
        } catch (const std::exception&) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad face index '" + tok + "'");
        }
        if (idx < 0) idx = static_cast<int>(mesh.vertices.size()) + idx + 1;
        if (idx <= 0) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": face index out of range");
        }
        poly.push_back(idx - 1);
      }
      if (poly.size() < 3) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": face with fewer than 3 vertices");
      }
      for (size_t k = 1; k + 1 < poly.size(); ++k) mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  mesh.validate();
  return mesh;
}

TriangleMesh read_ply_mesh(const std::filesystem::path& path) {
  const ply::File file = ply::read(path);
  const ply::Element* verts = file.find("vertex");
  if (!verts) throw ParseError(path.string() + ": no vertex element");
  TriangleMesh mesh;
  const auto& x = verts->column("x");
  const auto& y = verts->column("y");
  const auto& z = verts->column("z");
  mesh.vertices.resize(verts->count);
  for (size_t i = 0; i < verts->count; ++i) mesh.vertices[i] = Vec3(x[i], y[i], z[i]);
  if (verts->has("red") && verts->has("green") && verts->has("blue")) {
    const auto& r = verts->column("red");
    const auto& g = verts->column("green");
    const auto& b = verts->column("blue");
    mesh.vertex_colors.resize(verts->count);
    for (size_t i = 0; i < verts->count; ++i) mesh.vertex_colors[i] = Vec3(r[i], g[i], b[i]) / 255.0;
  }
  if (const ply::Element* faces = file.find("face")) {
    auto it = faces->lists.find("vertex_indices");
    if (it == faces->lists.end()) it = faces->lists.find("vertex_index");
    if (it == faces->lists.end()) throw ParseError(path.string() + ": face element without vertex_indices");
    const bool albedo = faces->has("red") && faces->has("green") && faces->has("blue");
    for (size_t f = 0; f < faces->count; ++f) {
      const auto& poly = it->second[f];
      if (poly.size() < 3) throw ParseError(path.string() + ": face " + std::to_string(f) + " has < 3 vertices");
      for (size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.faces.push_back({static_cast<int>(poly[0]), static_cast<int>(poly[k]), static_cast<int>(poly[k + 1])});
        if (albedo) {
          mesh.face_albedo.push_back(
              Vec3(faces->column("red")[f], faces->column("green")[f], faces->column("blue")[f]) / 255.0);
        }
      }
    }
  }
  mesh.validate();
  return mesh;
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  TriangleMesh mesh;
  if (ext == ".obj" || ext == ".OBJ") {
    mesh = read_obj(path);
  } else if (ext == ".ply" || ext == ".PLY") {
    mesh = read_ply_mesh(path);
  } else {
    throw ValidationError("unsupported mesh format: " + path.string());
  }
  const size_t dropped = mesh.drop_degenerate_faces();
  if (dropped > 0) spdlog::warn("{}: dropped {} degenerate faces", path.string(), dropped);
  return mesh;
}

void write_ply_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  mesh.validate();
  ply::File file;
  auto& v = file.add("vertex", mesh.vertices.size());
  const char* axes[3] = {"x", "y", "z"};
  for (int k = 0; k < 3; ++k) {
    v.properties.push_back({axes[k], ply::Type::Float32});
    auto& col = v.scalars[axes[k]];
    col.reserve(mesh.vertices.size());
    for (const auto& p : mesh.vertices) col.push_back(p[k]);
  }
  const char* rgb[3] = {"red", "green", "blue"};
  if (!mesh.vertex_colors.empty()) {
    for (int k = 0; k < 3; ++k) {
      v.properties.push_back({rgb[k], ply::Type::UInt8});
      auto& col = v.scalars[rgb[k]];
      for (const auto& c : mesh.vertex_colors) col.push_back(to_byte(c[k]));
    }
  }
  auto& f = file.add("face", mesh.faces.size());
  f.properties.push_back({"vertex_indices", ply::Type::Int32, true, ply::Type::UInt8});
  auto& lists = f.lists["vertex_indices"];
  lists.reserve(mesh.faces.size());
  for (const auto& t : mesh.faces) lists.push_back({t[0], t[1], t[2]});
  if (mesh.has_albedo()) {
    for (int k = 0; k < 3; ++k) {
      f.properties.push_back({rgb[k], ply::Type::UInt8});
      auto& col = f.scalars[rgb[k]];
      for (const auto& c : mesh.face_albedo) col.push_back(to_byte(c[k]));
    }
  }
  ply::write(path, file);
}

PointCloud read_ply_cloud(const std::filesystem::path& path) {
  const ply::File file = ply::read(path);
  const ply::Element* verts = file.find("vertex");
  if (!verts) throw ParseError(path.string() + ": no vertex element");
  PointCloud cloud;
  const auto& x = verts->column("x");
  const auto& y = verts->column("y");
  const auto& z = verts->column("z");
  cloud.points.resize(verts->count);
  for (size_t i = 0; i < verts->count; ++i) {
    cloud.points[i] = Vec3(x[i], y[i], z[i]);
    if (!cloud.points[i].allFinite()) {
      throw ParseError(path.string() + ": non-finite coordinate at vertex " + std::to_string(i));
    }
  }
  if (verts->has("nx") && verts->has("ny") && verts->has("nz")) {
    const auto& nx = verts->column("nx");
    const auto& ny = verts->column("ny");
    const auto& nz = verts->column("nz");
    cloud.normals.resize(verts->count);
    for (size_t i = 0; i < verts->count; ++i) cloud.normals[i] = Vec3(nx[i], ny[i], nz[i]);
  }
  if (verts->has("red") && verts->has("green") && verts->has("blue")) {
    const auto& r = verts->column("red");
    const auto& g = verts->column("green");
    const auto& b = verts->column("blue");
    cloud.colors.resize(verts->count);
    for (size_t i = 0; i < verts->count; ++i) cloud.colors[i] = Vec3(r[i], g[i], b[i]) / 255.0;
  }
  return cloud;
}

void write_ply_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  ply::File file;
  auto& v = file.add("vertex", cloud.size());
  auto add_vec = [&](const char* const names[3], const std::vector<Vec3>& data, ply::Type type, bool bytes) {
    for (int k = 0; k < 3; ++k) {
      v.properties.push_back({names[k], type});
      auto& col = v.scalars[names[k]];
      col.reserve(data.size());
      for (const auto& p : data) col.push_back(bytes ? to_byte(p[k]) : p[k]);
    }
  };
  const char* xyz[3] = {"x", "y", "z"};
  const char* nxyz[3] = {"nx", "ny", "nz"};
  const char* rgb[3] = {"red", "green", "blue"};
  add_vec(xyz, cloud.points, ply::Type::Float32, false);
  if (!cloud.normals.empty()) add_vec(nxyz, cloud.normals, ply::Type::Float32, false);
  if (!cloud.colors.empty()) add_vec(rgb, cloud.colors, ply::Type::UInt8, true);
  ply::write(path, file);
}

}  // namespace priorsplat
