#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "conred/chart.hpp"

namespace conred {

/// One named residual check: worst residual over the sampled points, the
/// witness point where it occurred, and the verdict against the tolerance.
struct CheckItem {
  std::string name;
  bool pass = false;
  double max_residual = 0.0;
  double tolerance = 0.0;
  Point witness;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckItem> items;

  CheckItem& add(CheckItem item) {
    items.push_back(std::move(item));
    return items.back();
  }

  void append(const CheckReport& other) {
    items.insert(items.end(), other.items.begin(), other.items.end());
  }

  bool overall_pass() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
};

/// Evaluates `residual_at` over the points, tracking the worst value and its
/// witness.
inline CheckItem residual_check(std::string name, double tolerance,
                                const std::vector<Point>& points,
                                const std::function<double(const Point&)>& residual_at) {
  CheckItem item;
  item.name = std::move(name);
  item.tolerance = tolerance;
  for (const auto& p : points) {
    const double r = residual_at(p);
    if (r >= item.max_residual) {
      item.max_residual = r;
      item.witness = p;
    }
  }
  item.pass = item.max_residual <= tolerance;
  return item;
}

}  // namespace conred
