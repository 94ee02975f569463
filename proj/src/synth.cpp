#include "priorsplat/synth.hpp"

#include <spdlog/spdlog.h>

#include <fstream>

#include "json.hpp"
#include "priorsplat/mesh_io.hpp"

namespace priorsplat {

Preset parse_preset(const std::string& s) {
  if (s == "open") return Preset::Open;
  if (s == "occluded") return Preset::Occluded;
  if (s == "sparse") return Preset::Sparse;
  throw ValidationError("unknown preset '" + s + "' (expected open, occluded or sparse)");
}

const char* to_string(Preset p) {
  switch (p) {
    case Preset::Open: return "open";
    case Preset::Occluded: return "occluded";
    case Preset::Sparse: return "sparse";
  }
  return "open";
}

Vec3 light_direction() { return Vec3(0.5, -0.35, 0.8).normalized(); }

namespace {

constexpr double kCell = 0.1;
constexpr double kRecess = 0.05;

struct Opening {
  int u0, v0, u1, v1;  // cell bounds, half-open
  Vec3 albedo;
};

class MeshBuilder {
 public:
  explicit MeshBuilder(Rng& rng) : rng_(rng) {}

  // Quad a, a+u, a+u+v, a+v facing `outward`.
  void quad(const Vec3& a, const Vec3& u, const Vec3& v, const Vec3& outward, const Vec3& albedo) {
    Vec3 p0 = a, p1 = a + u, p2 = a + u + v, p3 = a + v;
    if (u.cross(v).dot(outward) < 0) std::swap(p1, p3);
    const int base = static_cast<int>(mesh.vertices.size());
    mesh.vertices.insert(mesh.vertices.end(), {p0, p1, p2, p3});
    mesh.faces.push_back({base, base + 1, base + 2});
    mesh.faces.push_back({base, base + 2, base + 3});
    mesh.face_albedo.push_back(albedo);
    mesh.face_albedo.push_back(albedo);
  }

  void triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& outward, const Vec3& albedo) {
    const int base = static_cast<int>(mesh.vertices.size());
    if ((b - a).cross(c - a).dot(outward) < 0) {
      mesh.vertices.insert(mesh.vertices.end(), {a, c, b});
    } else {
      mesh.vertices.insert(mesh.vertices.end(), {a, b, c});
    }
    mesh.faces.push_back({base, base + 1, base + 2});
    mesh.face_albedo.push_back(albedo);
  }

  Vec3 jitter(const Vec3& base, double lo = 0.6, double hi = 1.2) {
    return (base * rng_.uniform(lo, hi)).cwiseMin(1.0);
  }

  // Wall of nu x nv cells from `origin` along unit axes u (width) and v (up).
  void wall(const Vec3& origin, const Vec3& u, const Vec3& v, const Vec3& n, int nu, int nv, const Vec3& base,
            const std::vector<Opening>& openings) {
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nu; ++i) {
        bool hole = false;
        for (const auto& o : openings) hole = hole || (i >= o.u0 && i < o.u1 && j >= o.v0 && j < o.v1);
        const Vec3 albedo = jitter(base);
        if (!hole) quad(origin + kCell * (i * u + j * v), kCell * u, kCell * v, n, albedo);
      }
    }
    for (const auto& o : openings) {
      const Vec3 a = origin + kCell * (o.u0 * u + o.v0 * v);
      const Vec3 wu = kCell * (o.u1 - o.u0) * u;
      const Vec3 wv = kCell * (o.v1 - o.v0) * v;
      const Vec3 back = -kRecess * n;
      quad(a + back, wu, wv, n, jitter(o.albedo, 0.9, 1.1));
      const Vec3 side = jitter(base, 0.5, 0.7);
      quad(a + back, wu, -back, v, side);
      quad(a + wv + back, wu, -back, -v, side);
      quad(a + back, wv, -back, u, side);
      quad(a + wu + back, wv, -back, -u, side);
    }
  }

  // Triangle a, b, apex subdivided into n^2 cells.
  void gable(const Vec3& a, const Vec3& b, const Vec3& apex, const Vec3& n, int subdiv, const Vec3& base) {
    auto at = [&](int i, int j) { return a + (b - a) * (double(i) / subdiv) + (apex - a) * (double(j) / subdiv); };
    for (int j = 0; j < subdiv; ++j) {
      for (int i = 0; i + j < subdiv; ++i) {
        triangle(at(i, j), at(i + 1, j), at(i, j + 1), n, jitter(base));
        if (i + j + 1 < subdiv) triangle(at(i + 1, j), at(i + 1, j + 1), at(i, j + 1), n, jitter(base));
      }
    }
  }

  // Box on z=0 without a bottom, cells of roughly kCell.
  void box(const Vec3& lo, const Vec3& hi, const Vec3& base) {
    const Vec3 e = hi - lo;
    auto cells = [](double len) { return std::max(1, static_cast<int>(std::lround(len / kCell))); };
    auto face = [&](const Vec3& o, const Vec3& u, const Vec3& v, const Vec3& n) {
      const int nu = cells(u.norm()), nv = cells(v.norm());
      for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
          quad(o + u * (double(i) / nu) + v * (double(j) / nv), u / nu, v / nv, n, jitter(base, 0.5, 1.3));
        }
      }
    };
    const Vec3 ex(e.x(), 0, 0), ey(0, e.y(), 0), ez(0, 0, e.z());
    face(lo, ex, ez, Vec3(0, -1, 0));
    face(lo + ey, ex, ez, Vec3(0, 1, 0));
    face(lo, ey, ez, Vec3(-1, 0, 0));
    face(lo + ex, ey, ez, Vec3(1, 0, 0));
    face(lo + ez, ex, ey, Vec3(0, 0, 1));
  }

  TriangleMesh mesh;

 private:
  Rng& rng_;
};

const Vec3 kWall(0.78, 0.66, 0.50);
const Vec3 kRoof(0.60, 0.28, 0.22);
const Vec3 kDoor(0.40, 0.22, 0.10);
const Vec3 kWindow(0.18, 0.24, 0.36);

}  // namespace

TriangleMesh make_house(uint64_t seed) {
  Rng rng(seed * 7919 + 11);
  MeshBuilder b(rng);
  const Vec3 X(1, 0, 0), Y(0, 1, 0), Z(0, 0, 1);
  b.wall(Vec3(-1, -1, 0), X, Z, -Y, 20, 15, kWall,
         {{8, 0, 12, 8, kDoor}, {2, 8, 5, 11, kWindow}, {15, 8, 18, 11, kWindow}});
  b.wall(Vec3(-1, 1, 0), X, Z, Y, 20, 15, kWall, {{3, 7, 7, 11, kWindow}, {13, 7, 17, 11, kWindow}});
  b.wall(Vec3(-1, -1, 0), Y, Z, -X, 20, 15, kWall, {{7, 7, 13, 11, kWindow}});
  b.wall(Vec3(1, -1, 0), Y, Z, X, 20, 15, kWall, {{7, 7, 13, 11, kWindow}});
  b.gable(Vec3(-1, -1, 1.5), Vec3(-1, 1, 1.5), Vec3(-1, 0, 2.5), -X, 10, kWall);
  b.gable(Vec3(1, -1, 1.5), Vec3(1, 1, 1.5), Vec3(1, 0, 2.5), X, 10, kWall);
  const Vec3 slope_front(0, 1, 1), slope_back(0, -1, 1);
  for (int j = 0; j < 10; ++j) {
    for (int i = 0; i < 20; ++i) {
      b.quad(Vec3(-1 + kCell * i, -1, 1.5) + 0.1 * j * slope_front, kCell * X, 0.1 * slope_front,
             Vec3(0, -1, 1), b.jitter(kRoof));
      b.quad(Vec3(-1 + kCell * i, 1, 1.5) + 0.1 * j * slope_back, kCell * X, 0.1 * slope_back, Vec3(0, 1, 1),
             b.jitter(kRoof));
    }
  }
  return b.mesh;
}

TriangleMesh make_lod2_house() {
  TriangleMesh m;
  m.vertices = {{-1, -1, 0},   {1, -1, 0},   {1, 1, 0},   {-1, 1, 0}, {-1, -1, 1.5}, {1, -1, 1.5},
                {1, 1, 1.5},   {-1, 1, 1.5}, {-1, 0, 2.5}, {1, 0, 2.5}};
  m.faces = {{0, 1, 5}, {0, 5, 4},  // front (-y)
             {2, 3, 7}, {2, 7, 6},  // back (+y)
             {3, 0, 4}, {3, 4, 7},  // left (-x)
             {1, 2, 6}, {1, 6, 5},  // right (+x)
             {4, 8, 7}, {5, 6, 9},  // gables
             {4, 5, 9}, {4, 9, 8},  // roof front
             {6, 7, 8}, {6, 8, 9}};  // roof back
  return m;
}

std::vector<TriangleMesh> make_occluders(Preset preset, uint64_t seed) {
  std::vector<TriangleMesh> out;
  if (preset != Preset::Occluded) return out;
  Rng rng(seed * 104729 + 3);
  const double angles[] = {-90.0, 30.0, 150.0};
  for (double deg : angles) {
    MeshBuilder b(rng);
    const double theta = (deg + rng.uniform(-8.0, 8.0)) * M_PI / 180.0;
    const double radius = rng.uniform(2.0, 2.2);
    const double half = rng.uniform(0.35, 0.45);
    const double height = rng.uniform(1.3, 1.7);
    const Vec3 c(radius * std::cos(theta), radius * std::sin(theta), 0);
    const Vec3 albedo(rng.uniform(0.15, 0.35), rng.uniform(0.4, 0.6), rng.uniform(0.1, 0.3));
    b.box(c - Vec3(half, half, 0), c + Vec3(half, half, height), albedo);
    out.push_back(std::move(b.mesh));
  }
  return out;
}

std::vector<CameraView> make_camera_ring(int n_views, int width, int height) {
  if (n_views < 4) throw ValidationError("n_views must be >= 4");
  if (width < 8 || height < 8) throw ValidationError("resolution must be at least 8x8");
  std::vector<CameraView> views;
  for (int j = 0; j < n_views; ++j) {
    const double theta = -M_PI / 2 + 2 * M_PI * j / n_views;
    CameraView v;
    char id[32];
    std::snprintf(id, sizeof(id), "view_%03d", j);
    v.id = id;
    v.width = width;
    v.height = height;
    v.fx = v.fy = 0.85 * width;
    v.cx = 0.5 * width;
    v.cy = 0.5 * height;
    const Vec3 eye(4.5 * std::cos(theta), 4.5 * std::sin(theta), 1.8);
    v.w2c = look_at(eye, Vec3(0, 0, 1.1), Vec3(0, 0, 1));
    views.push_back(v);
  }
  return views;
}

GtRender render_gt(const BvhIndex& scene, const CameraView& view, int threads) {
  GtRender r{ColorMap(view.width, view.height, Vec3::Zero()), ScalarMap(view.width, view.height, 0.0)};
  if (scene.mesh().empty()) return r;
  const Vec3 l = light_direction();
  const TriangleMesh& mesh = scene.mesh();
  parallel_for(view.height, resolve_threads(threads), [&](size_t yb, size_t ye) {
    for (size_t y = yb; y < ye; ++y) {
      for (int x = 0; x < view.width; ++x) {
        const auto hit = scene.closest_hit(pixel_ray(view, x, int(y)));
        if (!hit) continue;
        const Vec3 albedo = mesh.has_albedo() ? mesh.face_albedo[hit->face] : Vec3::Constant(0.7);
        const double shade = std::max(0.0, hit->normal.dot(l)) + kAmbient;
        r.color.at(x, int(y)) = (albedo * shade).cwiseMin(1.0).cwiseMax(0.0);
        r.depth.at(x, int(y)) = view.to_camera(hit->point).z();
      }
    }
  });
  return r;
}

GtRender render_gt(const std::vector<TriangleMesh>& meshes, const CameraView& view, int threads) {
  TriangleMesh all;
  for (const auto& m : meshes) all.append(m);
  if (all.empty()) return GtRender{ColorMap(view.width, view.height, Vec3::Zero()), ScalarMap(view.width, view.height, 0.0)};
  return render_gt(BvhIndex(all), view, threads);
}

double occlusion_fraction(const SyntheticScene& scene, const CameraView& view) {
  const BvhIndex house(scene.gt_mesh);
  TriangleMesh occ;
  for (const auto& m : scene.occluders) occ.append(m);
  if (occ.empty()) return 0.0;
  const BvhIndex occluders(occ);
  size_t facade = 0, blocked = 0;
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      const Ray ray = pixel_ray(view, x, y);
      const auto h = house.closest_hit(ray);
      if (!h) continue;
      ++facade;
      if (occluders.closest_hit(ray, h->t)) ++blocked;
    }
  }
  return facade ? double(blocked) / double(facade) : 0.0;
}

namespace {

PointCloud make_sfm_cloud(const TriangleMesh& all, const std::vector<CameraView>& views, size_t n, uint64_t seed) {
  PointCloud cloud;
  if (all.empty() || n == 0) return cloud;
  const BvhIndex bvh(all);
  Rng rng(seed * 31337 + 5);
  const auto samples = sample_surface(all, 4 * n, seed * 31337 + 6);
  for (const auto& s : samples) {
    if (cloud.size() >= n) break;
    int seen = 0;
    for (const auto& v : views) {
      if (!project(v, s.point)) continue;
      const Vec3 c = camera_center(v);
      const double dist = (s.point - c).norm();
      const auto hit = bvh.closest_hit(Ray{c, (s.point - c) / dist});
      if (hit && std::abs(hit->t - dist) < 1e-3 * dist) ++seen;
      if (seen >= 2) break;
    }
    if (seen < 2) continue;
    const Vec3 noise(rng.normal(), rng.normal(), rng.normal());
    cloud.points.push_back(s.point + 0.005 * noise);
    cloud.normals.push_back(s.normal);
    const Vec3 albedo = all.has_albedo() ? all.face_albedo[s.face] : Vec3::Constant(0.7);
    cloud.colors.push_back((albedo * (std::max(0.0, s.normal.dot(light_direction())) + kAmbient)).cwiseMin(1.0));
  }
  return cloud;
}

}  // namespace

SyntheticScene generate_scene(const SynthParams& p) {
  SyntheticScene s;
  s.preset = p.preset;
  s.seed = p.seed;
  int n_views = p.n_views;
  if (p.preset == Preset::Sparse && n_views > kSparseMaxViews) {
    spdlog::warn("sparse preset caps views at {} (requested {})", kSparseMaxViews, n_views);
    n_views = kSparseMaxViews;
  }
  s.views = make_camera_ring(n_views, p.width, p.height);
  s.gt_mesh = make_house(p.seed);
  s.lod2_mesh = make_lod2_house();
  s.occluders = make_occluders(p.preset, p.seed);

  TriangleMesh all = s.gt_mesh;
  for (const auto& o : s.occluders) all.append(o);
  const BvhIndex bvh(all);
  for (const auto& v : s.views) {
    auto r = render_gt(bvh, v, p.threads);
    s.gt_images.push_back(std::move(r.color));
    s.gt_depths.push_back(std::move(r.depth));
  }
  for (const auto& smp : sample_surface(s.gt_mesh, p.gt_cloud_points, p.seed * 2654435761u + 1)) {
    s.gt_cloud.points.push_back(smp.point);
    s.gt_cloud.normals.push_back(smp.normal);
  }
  s.sfm_cloud = make_sfm_cloud(all, s.views, p.sfm_points, p.seed);
  return s;
}

void write_scene(const std::filesystem::path& dir, const SyntheticScene& s) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "gt_depth");
  write_ply_mesh(dir / "gt.ply", s.gt_mesh);
  write_ply_mesh(dir / "lod2.ply", s.lod2_mesh);
  for (size_t i = 0; i < s.occluders.size(); ++i) {
    write_ply_mesh(dir / ("occluder_" + std::to_string(i) + ".ply"), s.occluders[i]);
  }
  write_cameras(dir / "cameras.jsonl", s.views);
  for (size_t j = 0; j < s.views.size(); ++j) {
    write_png_srgb(dir / "images" / (s.views[j].id + ".png"), s.gt_images[j]);
    write_pfm(dir / "gt_depth" / (s.views[j].id + ".pfm"), s.gt_depths[j]);
  }
  write_ply_cloud(dir / "gt_cloud.ply", s.gt_cloud);
  write_ply_cloud(dir / "sfm.ply", s.sfm_cloud);
  nlohmann::json meta;
  meta["preset"] = to_string(s.preset);
  meta["seed"] = s.seed;
  meta["views"] = s.views.size();
  meta["occluders"] = s.occluders.size();
  std::ofstream(dir / "scene.json") << meta.dump(2) << "\n";
}

SceneFiles read_scene(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("scene directory " + dir.string() + " does not exist");
  for (const char* f : {"cameras.jsonl", "lod2.ply", "gt_cloud.ply"}) {
    if (!fs::exists(dir / f)) throw ValidationError("scene is missing " + (dir / f).string());
  }
  SceneFiles sf;
  sf.views = read_cameras(dir / "cameras.jsonl");
  for (const auto& v : sf.views) {
    const auto img = dir / "images" / (v.id + ".png");
    if (!fs::exists(img)) throw ValidationError("scene is missing " + img.string());
  }
  for (const auto& v : sf.views) {
    sf.images.push_back(read_png_srgb(dir / "images" / (v.id + ".png")));
    if (!sf.images.back().same_shape(v.width, v.height)) {
      throw ValidationError("image size does not match camera " + v.id);
    }
  }
  sf.lod2_mesh = read_mesh(dir / "lod2.ply");
  sf.gt_cloud = read_ply_cloud(dir / "gt_cloud.ply");
  sf.sfm_path = dir / "sfm.ply";
  return sf;
}

}  // namespace priorsplat
