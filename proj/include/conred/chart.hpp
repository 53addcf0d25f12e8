#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "conred/expr.hpp"

namespace conred {

/// Seed used for every deterministic sample-point draw unless a scene says
/// otherwise.
inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

using Point = std::vector<double>;

struct ChartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A single coordinate chart: named coordinates plus a closed sampling box.
class Chart {
 public:
  Chart() = default;

  Chart(std::vector<std::string> coords, std::vector<std::array<double, 2>> domain)
      : coords_(std::move(coords)), domain_(std::move(domain)) {
    if (coords_.empty()) throw ChartError("chart needs at least one coordinate");
    if (domain_.size() != coords_.size()) throw ChartError("chart domain size != coordinate count");
    std::set<std::string> seen;
    for (const auto& c : coords_) {
      if (!seen.insert(c).second) throw ChartError("duplicate coordinate name '" + c + "'");
    }
    for (const auto& iv : domain_) {
      if (!(iv[0] < iv[1])) throw ChartError("chart domain interval must satisfy lo < hi");
    }
  }

  /// Chart with every axis sampled over the same interval.
  static Chart box(std::vector<std::string> coords, double lo, double hi) {
    std::vector<std::array<double, 2>> dom(coords.size(), {lo, hi});
    return Chart(std::move(coords), std::move(dom));
  }

  int dim() const { return static_cast<int>(coords_.size()); }
  const std::vector<std::string>& coords() const { return coords_; }
  const std::string& coord(int i) const { return coords_.at(i); }
  const std::vector<std::array<double, 2>>& domain() const { return domain_; }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < coords_.size(); ++i)
      if (coords_[i] == name) return static_cast<int>(i);
    return -1;
  }

  bool operator==(const Chart& other) const {
    return coords_ == other.coords_ && domain_ == other.domain_;
  }
  bool operator!=(const Chart& other) const { return !(*this == other); }

  bool same_coords(const Chart& other) const { return coords_ == other.coords_; }

  bool contains(const Point& p, double slack = 0.0) const {
    if (static_cast<int>(p.size()) != dim()) return false;
    for (int i = 0; i < dim(); ++i)
      if (p[i] < domain_[i][0] - slack || p[i] > domain_[i][1] + slack) return false;
    return true;
  }

  Point center() const {
    Point p(coords_.size());
    for (std::size_t i = 0; i < coords_.size(); ++i) p[i] = 0.5 * (domain_[i][0] + domain_[i][1]);
    return p;
  }

  ScalarExpr var(int i) const { return ScalarExpr::variable(coord(i)); }

  EvalEnv env(const Point& p) const {
    if (p.size() != coords_.size()) throw ChartError("point dimension mismatch");
    EvalEnv env;
    env.reserve(coords_.size());
    for (std::size_t i = 0; i < coords_.size(); ++i) env.emplace(coords_[i], p[i]);
    return env;
  }

  /// Deterministic sample set: the box center followed by `count` uniform
  /// draws.  The generator and the [0,1) mapping are pinned down explicitly
  /// so reports are reproducible across platforms.
  std::vector<Point> sample_points(std::uint64_t seed = kDefaultSeed, int count = 50) const {
    std::vector<Point> pts;
    pts.reserve(count + 1);
    pts.push_back(center());
    std::mt19937_64 gen(seed);
    for (int k = 0; k < count; ++k) {
      Point p(coords_.size());
      for (std::size_t i = 0; i < coords_.size(); ++i) {
        const double u = (gen() >> 11) * 0x1.0p-53;
        p[i] = domain_[i][0] + u * (domain_[i][1] - domain_[i][0]);
      }
      pts.push_back(std::move(p));
    }
    return pts;
  }

 private:
  std::vector<std::string> coords_;
  std::vector<std::array<double, 2>> domain_;
};

/// Uniform double in [lo, hi] from a caller-owned engine, with the same
/// portable mapping used by Chart::sample_points.
inline double uniform_in(std::mt19937_64& gen, double lo, double hi) {
  const double u = (gen() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

}  // namespace conred
