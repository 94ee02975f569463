#include "priorsplat/splats.hpp"

#include "priorsplat/kdtree.hpp"
#include "priorsplat/ply.hpp"

namespace priorsplat {

Mat3 quaternion_to_matrix(const Vec4& q_in) {
  const Vec4 q = q_in / q_in.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec4 quaternion_from_normal(const Vec3& n_in) {
  const Vec3 n = n_in.normalized();
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n);
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  return out / out.norm();
}

Mat3 Splat::rotation() const { return quaternion_to_matrix(rot); }

SplatGrad Splat::pack() const {
  SplatGrad p{};
  for (int i = 0; i < 3; ++i) p[kCenter + i] = center[i];
  for (int i = 0; i < 4; ++i) p[kRot + i] = rot[i];
  for (int i = 0; i < 2; ++i) p[kLogScale + i] = log_scale[i];
  p[kOpacityLogit] = opacity_logit;
  for (int i = 0; i < 3; ++i) p[kColorLogit + i] = color_logit[i];
  return p;
}

Splat Splat::unpack(const SplatGrad& p) {
  Splat s;
  for (int i = 0; i < 3; ++i) s.center[i] = p[kCenter + i];
  for (int i = 0; i < 4; ++i) s.rot[i] = p[kRot + i];
  for (int i = 0; i < 2; ++i) s.log_scale[i] = p[kLogScale + i];
  s.opacity_logit = p[kOpacityLogit];
  for (int i = 0; i < 3; ++i) s.color_logit[i] = p[kColorLogit + i];
  return s;
}

SplatFrame splat_frame(const Splat& s) {
  const Mat3 r = s.rotation();
  return SplatFrame{r.col(0), r.col(1), r.col(2)};
}

void SplatSet::reset_buffers() {
  grads.assign(splats.size(), SplatGrad{});
  reset_stats();
}

void SplatSet::zero_grads() {
  if (grads.size() != splats.size()) grads.resize(splats.size());
  std::fill(grads.begin(), grads.end(), SplatGrad{});
}

void SplatSet::reset_stats() {
  screen_grad_sum.assign(splats.size(), 0.0);
  screen_grad_count.assign(splats.size(), 0);
}

SplatSet init_splats(const InitPointCloud& cloud, double scene_extent) {
  if (cloud.size() < 4) {
    throw ValidationError("init_splats: need at least 4 points, got " + std::to_string(cloud.size()));
  }
  if (!(scene_extent > 0)) throw ValidationError("init_splats: scene extent must be positive");
  const KdTree tree(cloud.points);
  const double lo = 1e-4 * scene_extent;
  const double hi = 0.1 * scene_extent;
  SplatSet set;
  set.splats.resize(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    const auto nn = tree.knn(cloud.points[i], 4);
    double sum = 0;
    int used = 0;
    for (const auto& [d2, j] : nn) {
      if (j == static_cast<int>(i) || used == 3) continue;
      sum += std::sqrt(d2);
      ++used;
    }
    const double scale = std::clamp(used > 0 ? sum / used : lo, lo, hi);
    Splat& s = set.splats[i];
    s.center = cloud.points[i];
    s.rot = quaternion_from_normal(cloud.normals.empty() ? Vec3(0, 0, 1) : cloud.normals[i]);
    s.log_scale = Vec2::Constant(std::log(scale));
    s.opacity_logit = logit(0.1);
    const Vec3 c = cloud.colors.empty() ? Vec3::Constant(0.5) : cloud.colors[i];
    for (int k = 0; k < 3; ++k) s.color_logit[k] = logit(std::clamp(c[k], 1e-4, 1.0 - 1e-4));
  }
  set.reset_buffers();
  return set;
}

namespace {

const char* const kParamNames[kSplatParams] = {
    "x", "y", "z", "rot_0", "rot_1", "rot_2", "rot_3", "log_scale_0", "log_scale_1",
    "opacity_logit", "color_logit_0", "color_logit_1", "color_logit_2"};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SplatSet& set, int iteration) {
  ply::File file;
  file.comments.push_back("iteration " + std::to_string(iteration));
  auto& vertex = file.add("vertex", set.size());
  for (int k = 0; k < kSplatParams; ++k) {
    vertex.properties.push_back(ply::Property{kParamNames[k], ply::Type::Float64});
    auto& col = vertex.scalars[kParamNames[k]];
    col.resize(set.size());
    for (size_t i = 0; i < set.size(); ++i) col[i] = set.splats[i].pack()[k];
  }
  ply::write(path, file);
}

SplatSet load_checkpoint(const std::filesystem::path& path, int* iteration) {
  const ply::File file = ply::read(path);
  const ply::Element* vertex = file.find("vertex");
  if (!vertex) throw ParseError(path.string() + ": no vertex element");
  for (const char* name : kParamNames) {
    if (!vertex->has(name)) throw ParseError(path.string() + ": missing vertex property '" + name + "'");
  }
  SplatSet set;
  set.splats.resize(vertex->count);
  for (size_t i = 0; i < vertex->count; ++i) {
    SplatGrad p{};
    for (int k = 0; k < kSplatParams; ++k) p[k] = vertex->column(kParamNames[k])[i];
    set.splats[i] = Splat::unpack(p);
  }
  if (iteration) {
    *iteration = 0;
    for (const auto& c : file.comments) {
      if (c.rfind("iteration ", 0) == 0) *iteration = std::stoi(c.substr(10));
    }
  }
  set.reset_buffers();
  return set;
}

}  // namespace priorsplat
