#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace priorsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Bad arguments or inconsistent inputs detected before compute starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage produced nothing usable (e.g. no retained init points).
class EmptyResultError : public Error {
 public:
  using Error::Error;
};

// Deterministic random source. Uniform doubles are built directly from the
// 64-bit engine output so sequences do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (!is) throw ParseError("invalid rng state");
  }

 private:
  std::mt19937_64 engine_;
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Splits [0, n) into `chunks` contiguous ranges and runs fn(chunk, begin, end)
// on up to `threads` workers. Chunk boundaries depend only on n and chunks.
template <typename Fn>
void parallel_chunks(size_t n, int chunks, int threads, Fn&& fn) {
  if (n == 0) return;
  chunks = std::max(1, std::min<int>(chunks, static_cast<int>(n)));
  auto range = [&](int c) {
    const size_t b = n * static_cast<size_t>(c) / static_cast<size_t>(chunks);
    const size_t e = n * static_cast<size_t>(c + 1) / static_cast<size_t>(chunks);
    return std::pair<size_t, size_t>(b, e);
  };
  threads = std::max(1, std::min(threads, chunks));
  if (threads == 1) {
    for (int c = 0; c < chunks; ++c) {
      auto [b, e] = range(c);
      fn(c, b, e);
    }
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (int c = t; c < chunks; c += threads) {
        auto [b, e] = range(c);
        fn(c, b, e);
      }
    });
  }
  for (auto& w : workers) w.join();
}

template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
  parallel_chunks(n, threads, threads,
                  [&](int, size_t b, size_t e) { fn(b, e); });
}

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace priorsplat
