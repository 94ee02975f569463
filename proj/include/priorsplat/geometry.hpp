#pragma once

#include <array>
#include <optional>
#include <vector>

#include "priorsplat/common.hpp"

namespace priorsplat {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  // Optional linear-RGB albedo, one per face (empty when absent).
  std::vector<Vec3> face_albedo;
  // Optional linear-RGB vertex colors (empty when absent).
  std::vector<Vec3> vertex_colors;

  bool empty() const { return faces.empty(); }
  bool has_albedo() const { return !face_albedo.empty(); }

  // Unnormalized (2 * area) normal from the counter-clockwise winding.
  Vec3 face_cross(size_t f) const;
  Vec3 face_normal(size_t f) const;
  double face_area(size_t f) const;
  double surface_area() const;

  // Throws ValidationError on out-of-range indices or size mismatches.
  void validate() const;

  // Removes faces with area below min_area; returns the number removed.
  size_t drop_degenerate_faces(double min_area = 1e-12);

  // Appends another mesh (albedo kept only if both carry it).
  void append(const TriangleMesh& other);
};

// Free-standing point set with optional per-point normals and colors.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty or points.size()
  std::vector<Vec3> colors;   // empty or points.size(), linear RGB

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

struct RayHit {
  double t = 0;
  int face = -1;
  Vec3 point;
  Vec3 normal;  // geometric face normal flipped to oppose the ray
};

// Distances at or below this are not hits.
inline constexpr double kRayNearClip = 1e-6;

// Watertight ray/triangle test. Returns t when the hit lies in
// (kRayNearClip, t_max].
std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b,
                                         const Vec3& c, double t_max);

// Exhaustive first hit over all faces; ties in t go to the lowest face index.
std::optional<RayHit> brute_force_closest_hit(const TriangleMesh& mesh, const Ray& ray,
                                              double t_max);

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool valid() const { return (lo.array() <= hi.array()).all(); }
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
};

Aabb bounds_of(const std::vector<Vec3>& points);

// Bounding volume hierarchy over an immutable copy of the mesh. Median split
// on the widest centroid axis. Read-only queries are thread-safe.
class BvhIndex {
 public:
  explicit BvhIndex(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  const Aabb& bounds() const { return nodes_.front().box; }

  std::optional<RayHit> closest_hit(const Ray& ray,
                                    double t_max = std::numeric_limits<double>::infinity()) const;

 private:
  struct Node {
    Aabb box;
    int left = -1;   // child index, or first primitive for leaves
    int right = -1;  // child index, or primitive count for leaves
    bool leaf = false;
  };

  int build(int begin, int end, const std::vector<Vec3>& centroids);

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
  int face = -1;
};

// Area-weighted uniform sampling; deterministic for a given seed.
std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, size_t n, uint64_t seed);

struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& v) const { return scale * (rotation * v) + translation; }
  SimilarityTransform inverse() const;
  // Throws ValidationError unless rotation is orthonormal with det +1 and
  // scale > 0.
  void validate(double tol = 1e-9) const;
};

TriangleMesh apply_transform(const TriangleMesh& mesh, const SimilarityTransform& xf);

}  // namespace priorsplat
