#include "priorsplat/geometry.hpp"

#include <numeric>

namespace priorsplat {

Vec3 TriangleMesh::face_cross(size_t f) const {
  const auto& t = faces[f];
  return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
}

Vec3 TriangleMesh::face_normal(size_t f) const { return face_cross(f).normalized(); }

double TriangleMesh::face_area(size_t f) const { return 0.5 * face_cross(f).norm(); }

double TriangleMesh::surface_area() const {
  double a = 0;
  for (size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

void TriangleMesh::validate() const {
  const int nv = static_cast<int>(vertices.size());
  for (size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces[f][k] < 0 || faces[f][k] >= nv) {
        throw ValidationError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(faces[f][k]) + " of " + std::to_string(nv));
      }
    }
  }
  if (!face_albedo.empty() && face_albedo.size() != faces.size()) {
    throw ValidationError("face albedo count does not match face count");
  }
  if (!vertex_colors.empty() && vertex_colors.size() != vertices.size()) {
    throw ValidationError("vertex color count does not match vertex count");
  }
}

size_t TriangleMesh::drop_degenerate_faces(double min_area) {
  size_t kept = 0;
  for (size_t f = 0; f < faces.size(); ++f) {
    if (face_area(f) >= min_area) {
      faces[kept] = faces[f];
      if (!face_albedo.empty()) face_albedo[kept] = face_albedo[f];
      ++kept;
    }
  }
  const size_t dropped = faces.size() - kept;
  faces.resize(kept);
  if (!face_albedo.empty()) face_albedo.resize(kept);
  return dropped;
}

void TriangleMesh::append(const TriangleMesh& other) {
  const bool keep_albedo = (has_albedo() || faces.empty()) && other.has_albedo();
  const bool keep_colors = (!vertex_colors.empty() || vertices.empty()) && !other.vertex_colors.empty();
  const int base = static_cast<int>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& f : other.faces) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  if (keep_albedo) {
    face_albedo.insert(face_albedo.end(), other.face_albedo.begin(), other.face_albedo.end());
  } else {
    face_albedo.clear();
  }
  if (keep_colors) {
    vertex_colors.insert(vertex_colors.end(), other.vertex_colors.begin(), other.vertex_colors.end());
  } else {
    vertex_colors.clear();
  }
}

std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b,
                                         const Vec3& c, double t_max) {
  const Vec3& d = ray.direction;
  int kz = 0;
  if (std::abs(d.y()) > std::abs(d[kz])) kz = 1;
  if (std::abs(d.z()) > std::abs(d[kz])) kz = 2;
  int kx = (kz + 1) % 3;
  int ky = (kx + 1) % 3;
  if (d[kz] < 0) std::swap(kx, ky);
  if (d[kz] == 0) return std::nullopt;

  const double sx = d[kx] / d[kz];
  const double sy = d[ky] / d[kz];
  const double sz = 1.0 / d[kz];

  const Vec3 pa = a - ray.origin;
  const Vec3 pb = b - ray.origin;
  const Vec3 pc = c - ray.origin;

  const double ax = pa[kx] - sx * pa[kz];
  const double ay = pa[ky] - sy * pa[kz];
  const double bx = pb[kx] - sx * pb[kz];
  const double by = pb[ky] - sy * pb[kz];
  const double cx = pc[kx] - sx * pc[kz];
  const double cy = pc[ky] - sy * pc[kz];

  double u = cx * by - cy * bx;
  double v = ax * cy - ay * cx;
  double w = bx * ay - by * ax;
  if (u == 0 || v == 0 || w == 0) {
    using L = long double;
    u = static_cast<double>(L(cx) * L(by) - L(cy) * L(bx));
    v = static_cast<double>(L(ax) * L(cy) - L(ay) * L(cx));
    w = static_cast<double>(L(bx) * L(ay) - L(by) * L(ax));
  }
  if ((u < 0 || v < 0 || w < 0) && (u > 0 || v > 0 || w > 0)) return std::nullopt;
  const double det = u + v + w;
  if (det == 0) return std::nullopt;

  const double az = sz * pa[kz];
  const double bz = sz * pb[kz];
  const double cz = sz * pc[kz];
  const double t = (u * az + v * bz + w * cz) / det;
  if (!(t > kRayNearClip) || t > t_max) return std::nullopt;
  return t;
}

namespace {

RayHit make_hit(const TriangleMesh& mesh, const Ray& ray, int face, double t) {
  RayHit hit;
  hit.t = t;
  hit.face = face;
  hit.point = ray.origin + t * ray.direction;
  hit.normal = mesh.face_normal(face);
  if (hit.normal.dot(ray.direction) > 0) hit.normal = -hit.normal;
  return hit;
}

}  // namespace

std::optional<RayHit> brute_force_closest_hit(const TriangleMesh& mesh, const Ray& ray,
                                              double t_max) {
  int best_face = -1;
  double best_t = t_max;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    auto t = intersect_triangle(ray, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                mesh.vertices[tri[2]], best_t);
    if (t && (best_face < 0 || *t < best_t)) {
      best_t = *t;
      best_face = static_cast<int>(f);
    }
  }
  if (best_face < 0) return std::nullopt;
  return make_hit(mesh, ray, best_face, best_t);
}

Aabb bounds_of(const std::vector<Vec3>& points) {
  Aabb b;
  for (const auto& p : points) b.grow(p);
  return b;
}

BvhIndex::BvhIndex(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  if (mesh_.faces.empty()) throw ValidationError("cannot build a BVH over an empty mesh");
  mesh_.validate();
  const int n = static_cast<int>(mesh_.faces.size());
  std::vector<Vec3> centroids(n);
  for (int f = 0; f < n; ++f) {
    const auto& t = mesh_.faces[f];
    centroids[f] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * n);
  build(0, n, centroids);
}

int BvhIndex::build(int begin, int end, const std::vector<Vec3>& centroids) {
  const int idx = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, cbox;
  for (int i = begin; i < end; ++i) {
    const auto& t = mesh_.faces[order_[i]];
    for (int k = 0; k < 3; ++k) box.grow(mesh_.vertices[t[k]]);
    cbox.grow(centroids[order_[i]]);
  }
  // Pad so slab tests never reject a ray that grazes a face on the boundary.
  const double pad = 1e-9 * (1.0 + box.extent().maxCoeff() + box.lo.cwiseAbs().maxCoeff() +
                             box.hi.cwiseAbs().maxCoeff());
  box.lo.array() -= pad;
  box.hi.array() += pad;
  nodes_[idx].box = box;

  const int count = end - begin;
  int axis = 0;
  const Vec3 ext = cbox.extent();
  if (ext.y() > ext[axis]) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;
  if (count <= 4 || ext[axis] <= 0) {
    nodes_[idx].leaf = true;
    nodes_[idx].left = begin;
    nodes_[idx].right = count;
    return idx;
  }
  const int mid = begin + count / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (centroids[a][axis] != centroids[b][axis]) {
                       return centroids[a][axis] < centroids[b][axis];
                     }
                     return a < b;
                   });
  const int l = build(begin, mid, centroids);
  const int r = build(mid, end, centroids);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

namespace {

// Entry distance of the ray into the box, or NaN when missed within t_max.
double slab_entry(const Aabb& box, const Vec3& o, const Vec3& d, const Vec3& inv, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < box.lo[k] || o[k] > box.hi[k]) return std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double a = (box.lo[k] - o[k]) * inv[k];
    double b = (box.hi[k] - o[k]) * inv[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::numeric_limits<double>::quiet_NaN();
  }
  return t0;
}

}  // namespace

std::optional<RayHit> BvhIndex::closest_hit(const Ray& ray, double t_max) const {
  const Vec3 inv = ray.direction.cwiseInverse();
  int best_face = -1;
  double best_t = t_max;

  int stack[128];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    // Inclusive bound: a box entered exactly at best_t may still hold a
    // lower-index face at the same distance.
    if (!(slab_entry(node.box, ray.origin, ray.direction, inv, best_t) <= best_t)) continue;
    if (node.leaf) {
      for (int i = node.left; i < node.left + node.right; ++i) {
        const int f = order_[i];
        const auto& tri = mesh_.faces[f];
        auto t = intersect_triangle(ray, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]],
                                    mesh_.vertices[tri[2]], best_t);
        if (!t) continue;
        if (best_face < 0 || *t < best_t || (*t == best_t && f < best_face)) {
          best_t = *t;
          best_face = f;
        }
      }
      continue;
    }
    const Node& l = nodes_[node.left];
    const Node& r = nodes_[node.right];
    const double tl = slab_entry(l.box, ray.origin, ray.direction, inv, best_t);
    const double tr = slab_entry(r.box, ray.origin, ray.direction, inv, best_t);
    // Push the farther child first so the nearer one is visited next.
    if (std::isnan(tr) || tl <= tr) {
      if (tr <= best_t) stack[sp++] = node.right;
      if (tl <= best_t) stack[sp++] = node.left;
    } else {
      if (tl <= best_t) stack[sp++] = node.left;
      if (tr <= best_t) stack[sp++] = node.right;
    }
  }
  if (best_face < 0) return std::nullopt;
  return make_hit(mesh_, ray, best_face, best_t);
}

std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, size_t n, uint64_t seed) {
  if (mesh.faces.empty()) throw ValidationError("cannot sample an empty mesh");
  if (n == 0) throw ValidationError("sample count must be >= 1");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cdf[f] = total;
  }
  if (!(total > 0)) throw ValidationError("mesh has zero surface area");

  Rng rng(seed);
  std::vector<SurfaceSample> out(n);
  for (size_t i = 0; i < n; ++i) {
    const double r = rng.uniform() * total;
    size_t f = static_cast<size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    if (f >= cdf.size()) f = cdf.size() - 1;
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const auto& tri = mesh.faces[f];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    out[i].point = (1.0 - s) * a + s * (1.0 - r2) * b + s * r2 * c;
    out[i].normal = mesh.face_normal(f);
    out[i].face = static_cast<int>(f);
  }
  return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.rotation = rotation.transpose();
  inv.scale = 1.0 / scale;
  inv.translation = -(inv.scale * (inv.rotation * translation));
  return inv;
}

void SimilarityTransform::validate(double tol) const {
  if (!(scale > 0)) throw ValidationError("similarity scale must be positive");
  if (((rotation * rotation.transpose()) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
    throw ValidationError("similarity rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > tol) {
    throw ValidationError("similarity rotation must have determinant +1");
  }
}

TriangleMesh apply_transform(const TriangleMesh& mesh, const SimilarityTransform& xf) {
  TriangleMesh out = mesh;
  const bool identity = xf.scale == 1.0 && xf.translation.isZero(0) &&
                        xf.rotation == Mat3::Identity();
  if (identity) return out;
  for (auto& v : out.vertices) v = xf.apply(v);
  return out;
}

}  // namespace priorsplat
