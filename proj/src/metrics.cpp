#include "priorsplat/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <charconv>
#include <iomanip>
#include <numeric>
#include <unordered_map>

#include "priorsplat/kdtree.hpp"

namespace priorsplat {

namespace {

void check_same(const ColorMap& a, const ColorMap& b) {
  if (!a.same_shape(b.width, b.height)) {
    throw ValidationError("image size mismatch: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                          " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  if (a.size() == 0) throw ValidationError("empty image");
}

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_or_nan(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

}  // namespace

double psnr(const ColorMap& a, const ColorMap& b) {
  check_same(a, b);
  double se = 0;
  for (size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]).squaredNorm();
  const double mse = se / (3.0 * a.size());
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

ScalarMap to_gray(const ColorMap& image) {
  ScalarMap g(image.width, image.height);
  for (size_t i = 0; i < image.size(); ++i) {
    g[i] = 0.299 * image[i].x() + 0.587 * image[i].y() + 0.114 * image[i].z();
  }
  return g;
}

double ssim_gray(const ScalarMap& a, const ScalarMap& b) {
  constexpr int win = 11;
  constexpr double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  if (!a.same_shape(b.width, b.height)) throw ValidationError("image size mismatch");
  if (a.width < win || a.height < win) throw ValidationError("images smaller than the 11x11 SSIM window");
  double taps[win];
  double tsum = 0;
  for (int i = 0; i < win; ++i) {
    const double x = i - win / 2;
    taps[i] = std::exp(-x * x / (2 * sigma * sigma));
    tsum += taps[i];
  }
  for (double& t : taps) t /= tsum;

  const int ow = a.width - win + 1, oh = a.height - win + 1;
  // Horizontal pass into (ow x H) buffers of the five moments, then vertical.
  std::vector<std::array<double, 5>> h(size_t(ow) * a.height);
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < ow; ++x) {
      std::array<double, 5> m{};
      for (int k = 0; k < win; ++k) {
        const double va = a.at(x + k, y), vb = b.at(x + k, y);
        m[0] += taps[k] * va;
        m[1] += taps[k] * vb;
        m[2] += taps[k] * va * va;
        m[3] += taps[k] * vb * vb;
        m[4] += taps[k] * va * vb;
      }
      h[size_t(y) * ow + x] = m;
    }
  }
  double total = 0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      std::array<double, 5> m{};
      for (int k = 0; k < win; ++k) {
        const auto& r = h[size_t(y + k) * ow + x];
        for (int c = 0; c < 5; ++c) m[c] += taps[k] * r[c];
      }
      const double va = m[2] - m[0] * m[0], vb = m[3] - m[1] * m[1], cov = m[4] - m[0] * m[1];
      total += ((2 * m[0] * m[1] + c1) * (2 * cov + c2)) /
               ((m[0] * m[0] + m[1] * m[1] + c1) * (va + vb + c2));
    }
  }
  return total / (double(ow) * oh);
}

double ssim(const ColorMap& a, const ColorMap& b) {
  check_same(a, b);
  return ssim_gray(to_gray(a), to_gray(b));
}

std::vector<double> nn_distances(const std::vector<Vec3>& queries, const std::vector<Vec3>& target, int threads) {
  if (target.empty()) throw ValidationError("nearest-neighbor target cloud is empty");
  const KdTree tree(target);
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), resolve_threads(threads), [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) out[i] = std::sqrt(tree.nearest(queries[i]).second);
  });
  return out;
}

double chamfer(const PointCloud& a, const PointCloud& b, int threads) {
  if (a.empty() || b.empty()) throw ValidationError("chamfer distance needs two nonempty clouds");
  const auto dab = nn_distances(a.points, b.points, threads);
  const auto dba = nn_distances(b.points, a.points, threads);
  const double mab = std::accumulate(dab.begin(), dab.end(), 0.0) / dab.size();
  const double mba = std::accumulate(dba.begin(), dba.end(), 0.0) / dba.size();
  return 0.5 * (mab + mba);
}

M3c2Result m3c2(const PointCloud& reference, const PointCloud& compared, const M3c2Params& p, int threads) {
  if (reference.size() < 10) throw ValidationError("m3c2 needs at least 10 reference points");
  if (compared.empty()) throw ValidationError("m3c2 compared cloud is empty");
  if (!(p.normal_scale > 0 && p.projection_scale > 0 && p.max_depth > 0)) {
    throw ValidationError("m3c2 scales must be > 0");
  }
  std::vector<size_t> order(reference.size());
  std::iota(order.begin(), order.end(), size_t(0));
  Rng rng(p.seed);
  rng.shuffle(order);
  order.resize(std::min(p.core_count, reference.size()));
  std::sort(order.begin(), order.end());

  Vec3 centroid = Vec3::Zero();
  for (const auto& q : compared.points) centroid += q;
  centroid /= double(compared.size());

  const KdTree ref_tree(reference.points);
  const KdTree cmp_tree(compared.points);
  const double rcyl = 0.5 * p.projection_scale;
  std::vector<double> dist(order.size(), std::numeric_limits<double>::quiet_NaN());

  parallel_for(order.size(), resolve_threads(threads), [&](size_t b, size_t e) {
    for (size_t c = b; c < e; ++c) {
      const Vec3& core = reference.points[order[c]];
      const auto nbrs = ref_tree.radius(core, 0.5 * p.normal_scale);
      if (nbrs.size() < 3) continue;
      Vec3 mean = Vec3::Zero();
      for (int i : nbrs) mean += reference.points[i];
      mean /= double(nbrs.size());
      Mat3 cov = Mat3::Zero();
      for (int i : nbrs) {
        const Vec3 d = reference.points[i] - mean;
        cov += d * d.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
      Vec3 n = es.eigenvectors().col(0).normalized();
      if (n.dot(centroid - core) < 0) n = -n;

      auto cylinder_mean = [&](const KdTree& tree, const std::vector<Vec3>& pts, int& count) {
        double sum = 0;
        count = 0;
        for (int i : tree.capsule(core - p.max_depth * n, core + p.max_depth * n, rcyl)) {
          const Vec3 d = pts[i] - core;
          const double h = d.dot(n);
          if (std::abs(h) > p.max_depth) continue;
          if ((d - h * n).squaredNorm() > rcyl * rcyl) continue;
          sum += h;
          ++count;
        }
        return count > 0 ? sum / count : 0.0;
      };
      int nr = 0, nc = 0;
      const double mr = cylinder_mean(ref_tree, reference.points, nr);
      const double mc = cylinder_mean(cmp_tree, compared.points, nc);
      if (nr < p.min_points || nc < p.min_points) continue;
      dist[c] = mc - mr;
    }
  });

  M3c2Result res;
  for (double d : dist) {
    if (std::isnan(d)) continue;
    res.mean_abs += std::abs(d);
    res.mean_signed += d;
    ++res.valid_cores;
  }
  if (res.valid_cores == 0) throw EmptyResultError("m3c2: no core point has enough neighbors in both clouds");
  res.mean_abs /= double(res.valid_cores);
  res.mean_signed /= double(res.valid_cores);
  res.valid_fraction = double(res.valid_cores) / double(order.size());
  return res;
}

std::vector<double> completeness(const PointCloud& reference, const PointCloud& recon,
                                 const std::vector<double>& thresholds, int threads) {
  if (reference.empty()) throw ValidationError("completeness reference cloud is empty");
  std::vector<double> out(thresholds.size(), 0.0);
  if (recon.empty()) return out;
  const auto d = nn_distances(reference.points, recon.points, threads);
  for (size_t t = 0; t < thresholds.size(); ++t) {
    size_t hit = 0;
    for (double v : d) hit += v < thresholds[t];
    out[t] = double(hit) / double(d.size());
  }
  return out;
}

double voc(const PointCloud& reference, const PointCloud& recon, double voxel_size, int min_points) {
  if (reference.empty()) throw ValidationError("voc reference cloud is empty");
  if (!(voxel_size > 0)) throw ValidationError("voc voxel size must be > 0");
  if (min_points < 1) throw ValidationError("voc min_points must be >= 1");
  const Vec3 lo = bounds_of(reference.points).lo;
  auto key = [&](const Vec3& q) {
    const Vec3 r = (q - lo) / voxel_size;
    const int64_t i = int64_t(std::floor(r.x())), j = int64_t(std::floor(r.y())), k = int64_t(std::floor(r.z()));
    return uint64_t((i + (1 << 20)) & 0x1fffff) << 42 | uint64_t((j + (1 << 20)) & 0x1fffff) << 21 |
           uint64_t((k + (1 << 20)) & 0x1fffff);
  };
  auto occupied = [&](const PointCloud& c) {
    std::unordered_map<uint64_t, int> counts;
    for (const auto& q : c.points) ++counts[key(q)];
    std::vector<uint64_t> occ;
    for (const auto& [k, n] : counts) {
      if (n >= min_points) occ.push_back(k);
    }
    std::sort(occ.begin(), occ.end());
    return occ;
  };
  const auto ref = occupied(reference);
  if (ref.empty()) return 0.0;
  const auto rec = occupied(recon);
  std::vector<uint64_t> both;
  std::set_intersection(ref.begin(), ref.end(), rec.begin(), rec.end(), std::back_inserter(both));
  return double(both.size()) / double(ref.size());
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["psnr"] = psnr ? nlohmann::json(*psnr) : nlohmann::json(nullptr);
  j["ssim"] = ssim ? nlohmann::json(*ssim) : nlohmann::json(nullptr);
  j["cd"] = finite_or_null(cd);
  j["m3c2_mean_abs"] = finite_or_null(m3c2_mean_abs);
  j["m3c2_mean_signed"] = finite_or_null(m3c2_mean_signed);
  j["m3c2_valid_fraction"] = finite_or_null(m3c2_valid_fraction);
  nlohmann::json comp = nlohmann::json::object();
  for (const auto& [t, v] : completeness_at) comp[shortest(t)] = v;
  j["completeness_at"] = comp;
  j["voc"] = voc;
  j["recon_points"] = recon_points;
  j["reference_points"] = reference_points;
  return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    if (!j.at("psnr").is_null()) r.psnr = j.at("psnr").get<double>();
    if (!j.at("ssim").is_null()) r.ssim = j.at("ssim").get<double>();
    r.cd = number_or_nan(j.at("cd"));
    r.m3c2_mean_abs = number_or_nan(j.at("m3c2_mean_abs"));
    r.m3c2_mean_signed = number_or_nan(j.at("m3c2_mean_signed"));
    r.m3c2_valid_fraction = number_or_nan(j.at("m3c2_valid_fraction"));
    for (const auto& [k, v] : j.at("completeness_at").items()) r.completeness_at[std::stod(k)] = v.get<double>();
    r.voc = j.at("voc");
    r.recon_points = j.at("recon_points");
    r.reference_points = j.at("reference_points");
  } catch (const std::exception& e) {
    throw ParseError(std::string("metric report: ") + e.what());
  }
  return r;
}

std::string MetricReport::csv_header() { return "label,psnr,ssim,cd,m3c2,completeness,voc"; }

std::string MetricReport::csv_row(const std::string& label) const {
  std::ostringstream os;
  os << std::setprecision(10) << label << ',';
  if (psnr) os << *psnr;
  os << ',';
  if (ssim) os << *ssim;
  os << ',' << cd << ',' << m3c2_mean_abs << ',';
  bool first = true;
  for (const auto& [t, v] : completeness_at) {
    if (!first) os << ';';
    os << shortest(t) << ':' << v;
    first = false;
  }
  os << ',' << voc;
  return os.str();
}

PointCloud cloud_from_mesh(const TriangleMesh& mesh, size_t samples, uint64_t seed) {
  PointCloud c;
  if (mesh.empty()) return c;
  for (const auto& s : sample_surface(mesh, samples, seed)) {
    c.points.push_back(s.point);
    c.normals.push_back(s.normal);
  }
  return c;
}

MetricReport evaluate(const PointCloud& recon, const PointCloud& reference,
                      const std::vector<std::pair<ColorMap, ColorMap>>& images, const EvalParams& params) {
  if (reference.empty()) throw ValidationError("reference cloud is empty");
  MetricReport r;
  r.recon_points = recon.size();
  r.reference_points = reference.size();
  if (!images.empty()) {
    double ps = 0, ss = 0;
    for (const auto& [a, b] : images) {
      ps += psnr(a, b);
      ss += ssim(a, b);
    }
    r.psnr = ps / images.size();
    r.ssim = ss / images.size();
  }
  const auto comp = completeness(reference, recon, params.thresholds, params.threads);
  for (size_t i = 0; i < comp.size(); ++i) r.completeness_at[params.thresholds[i]] = comp[i];
  r.voc = voc(reference, recon, params.voc_voxel, params.voc_min_points);
  if (recon.empty()) {
    r.cd = std::numeric_limits<double>::infinity();
    return r;
  }
  r.cd = chamfer(recon, reference, params.threads);
  try {
    const auto m = m3c2(reference, recon, params.m3c2, params.threads);
    r.m3c2_mean_abs = m.mean_abs;
    r.m3c2_mean_signed = m.mean_signed;
    r.m3c2_valid_fraction = m.valid_fraction;
  } catch (const EmptyResultError&) {
    r.m3c2_mean_abs = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace priorsplat
