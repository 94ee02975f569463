#include "priorsplat/priors.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>
#include <map>
#include <memory>

#include "json.hpp"
#include "priorsplat/kdtree.hpp"
#include "priorsplat/mesh_io.hpp"

namespace priorsplat {

size_t PriorBundle::masked_count() const {
  size_t n = 0;
  for (uint8_t m : mask.data) n += m ? 1 : 0;
  return n;
}

namespace {

PriorBundle empty_bundle(const CameraView& view) {
  PriorBundle b;
  b.view_id = view.id;
  b.depth = ScalarMap(view.width, view.height, 0.0);
  b.normal = ColorMap(view.width, view.height, Vec3::Zero());
  b.mask = MaskMap(view.width, view.height, 0);
  return b;
}

}  // namespace

PriorBundle raycast_priors(const BvhIndex& index, const CameraView& view, int threads) {
  PriorBundle b = empty_bundle(view);
  parallel_for(static_cast<size_t>(view.height), threads, [&](size_t y0, size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < view.width; ++x) {
        const Ray ray = pixel_ray(view, x, y);
        auto hit = index.closest_hit(ray);
        if (!hit) continue;
        const double z = view.to_camera(hit->point).z();
        if (!(z > 0)) continue;
        b.depth.at(x, y) = z;
        b.normal.at(x, y) = hit->normal;
        b.mask.at(x, y) = 1;
      }
    }
  });
  return b;
}

PriorBundle raycast_priors(const TriangleMesh& mesh, const CameraView& view, int threads) {
  if (mesh.empty()) return empty_bundle(view);
  return raycast_priors(BvhIndex(mesh), view, threads);
}

double expected_depth(const Vec3& p, const CameraView& view) { return (p - camera_center(view)).norm(); }

bool is_visible(const Vec3& p, const CameraView& view, const BvhIndex& index, double eps) {
  if (!project(view, p)) return false;
  const Vec3 c = camera_center(view);
  const double d_exp = (p - c).norm();
  if (d_exp <= 0) return false;
  const Ray ray{c, (p - c) / d_exp};
  auto hit = index.closest_hit(ray);
  if (!hit) return false;
  return std::abs(hit->t - d_exp) < eps;
}

InitPointCloud build_init_cloud(const TriangleMesh& mesh, const std::vector<CameraView>& views,
                                const InitCloudParams& params) {
  if (views.empty()) throw ValidationError("build_init_cloud: no views");
  if (params.n_samples < 1) throw ValidationError("build_init_cloud: n_samples must be >= 1");
  if (params.k < 1) throw ValidationError("build_init_cloud: k must be >= 1");
  if (!(params.eps > 0)) throw ValidationError("build_init_cloud: eps must be positive");
  if (params.k > static_cast<int>(views.size())) {
    throw EmptyResultError("no point can be visible in k=" + std::to_string(params.k) + " of " +
                           std::to_string(views.size()) + " views; lower k");
  }
  const BvhIndex index(mesh);
  const auto samples = sample_surface(mesh, params.n_samples, params.seed);

  std::vector<std::vector<Observation>> obs(samples.size());
  parallel_for(samples.size(), params.threads, [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) {
      for (size_t j = 0; j < views.size(); ++j) {
        if (!is_visible(samples[i].point, views[j], index, params.eps)) continue;
        const auto px = project(views[j], samples[i].point);
        obs[i].push_back(Observation{static_cast<int>(j), px->u, px->v});
      }
    }
  });

  InitPointCloud cloud;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<int>(obs[i].size()) < params.k) continue;
    cloud.points.push_back(samples[i].point);
    cloud.normals.push_back(samples[i].normal);
    cloud.colors.push_back(Vec3::Constant(0.5));
    cloud.observations.push_back(std::move(obs[i]));
  }
  if (cloud.points.empty()) {
    throw EmptyResultError("no sampled point is visible in >= " + std::to_string(params.k) +
                           " views (eps=" + std::to_string(params.eps) +
                           "); lower k or raise eps");
  }
  return cloud;
}

InitPointCloud init_cloud_from_points(const PointCloud& pc, int neighbors) {
  if (pc.empty()) throw ValidationError("external point cloud is empty");
  InitPointCloud cloud;
  cloud.points = pc.points;
  cloud.observations.resize(pc.size());
  cloud.colors = pc.colors.empty() ? std::vector<Vec3>(pc.size(), Vec3::Constant(0.5)) : pc.colors;
  if (pc.has_normals()) {
    cloud.normals = pc.normals;
    for (auto& n : cloud.normals) {
      const double len = n.norm();
      n = len > 0 ? Vec3(n / len) : Vec3(0, 0, 1);
    }
    return cloud;
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pc.points) centroid += p;
  centroid /= static_cast<double>(pc.size());
  const KdTree tree(pc.points);
  cloud.normals.resize(pc.size());
  for (size_t i = 0; i < pc.size(); ++i) {
    const auto nn = tree.knn(pc.points[i], static_cast<size_t>(neighbors) + 1);
    Vec3 mean = Vec3::Zero();
    for (const auto& [d2, j] : nn) mean += pc.points[j];
    mean /= static_cast<double>(nn.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& [d2, j] : nn) {
      const Vec3 d = pc.points[j] - mean;
      cov += d * d.transpose();
    }
    Vec3 n(0, 0, 1);
    if (nn.size() >= 3) {
      Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
      n = es.eigenvectors().col(0);
    }
    // Orient away from the cloud centroid.
    if (n.dot(pc.points[i] - centroid) < 0) n = -n;
    cloud.normals[i] = n.normalized();
  }
  return cloud;
}

void write_prior_bundle(const std::filesystem::path& dir, const PriorBundle& b) {
  std::filesystem::create_directories(dir);
  write_pfm(dir / ("depth_" + b.view_id + ".pfm"), b.depth);
  write_pfm(dir / ("normal_" + b.view_id + ".pfm"), b.normal);
  write_png_mask(dir / ("mask_" + b.view_id + ".png"), b.mask);
}

PriorBundle read_prior_bundle(const std::filesystem::path& dir, const std::string& view_id) {
  PriorBundle b;
  b.view_id = view_id;
  b.depth = read_pfm_scalar(dir / ("depth_" + view_id + ".pfm"));
  b.normal = read_pfm_color(dir / ("normal_" + view_id + ".pfm"));
  b.mask = read_png_mask(dir / ("mask_" + view_id + ".png"));
  if (!b.normal.same_shape(b.depth.width, b.depth.height) ||
      !b.mask.same_shape(b.depth.width, b.depth.height)) {
    throw ParseError("prior maps for view '" + view_id + "' have inconsistent sizes");
  }
  // Re-establish the mask/depth/normal equivalence after float32 storage.
  for (size_t i = 0; i < b.depth.size(); ++i) {
    if (b.mask[i] && b.depth[i] > 0 && b.normal[i].norm() > 0.5) {
      b.normal[i].normalize();
    } else {
      b.mask[i] = 0;
      b.depth[i] = 0;
      b.normal[i] = Vec3::Zero();
    }
  }
  return b;
}

void write_init_cloud(const std::filesystem::path& ply_path, const std::filesystem::path& obs_path,
                      const InitPointCloud& cloud, const std::vector<CameraView>& views) {
  PointCloud pc;
  pc.points = cloud.points;
  pc.normals = cloud.normals;
  pc.colors = cloud.colors;
  write_ply_cloud(ply_path, pc);
  std::ofstream out(obs_path);
  if (!out) throw Error("cannot open " + obs_path.string() + " for writing");
  for (size_t i = 0; i < cloud.observations.size(); ++i) {
    for (const auto& o : cloud.observations[i]) {
      nlohmann::json j;
      j["point_index"] = i;
      j["view_id"] = views.at(o.view).id;
      j["u"] = o.u;
      j["v"] = o.v;
      out << j.dump() << "\n";
    }
  }
}

InitPointCloud read_init_cloud(const std::filesystem::path& ply_path, const std::filesystem::path& obs_path,
                               const std::vector<CameraView>& views) {
  const PointCloud pc = read_ply_cloud(ply_path);
  InitPointCloud cloud = init_cloud_from_points(pc);
  std::map<std::string, int> view_index;
  for (size_t j = 0; j < views.size(); ++j) view_index[views[j].id] = static_cast<int>(j);
  std::ifstream in(obs_path);
  if (!in) return cloud;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const size_t idx = j.at("point_index").get<size_t>();
      const auto it = view_index.find(j.at("view_id").get<std::string>());
      if (idx >= cloud.size() || it == view_index.end()) {
        throw ParseError(obs_path.string() + ":" + std::to_string(line_no) + ": unknown point or view");
      }
      cloud.observations[idx].push_back(Observation{it->second, j.at("u").get<double>(), j.at("v").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(obs_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cloud;
}

}  // namespace priorsplat
