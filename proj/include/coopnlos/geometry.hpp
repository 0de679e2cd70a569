#pragma once

#include <cmath>

#include "coopnlos/common.hpp"

namespace coopnlos {

/// Planar metric with optional periodic wrap per axis (period 0 = open axis).
/// Displacements use the minimum image, so on a torus every node sees the
/// same neighbourhood statistics regardless of where it sits.
struct FieldMetric {
  double period_x = 0.0;
  double period_y = 0.0;

  static FieldMetric plane() { return {}; }
  static FieldMetric torus(double px, double py) { return {px, py}; }

  Vec2 diff(const Vec2& a, const Vec2& b) const {
    Vec2 d = a - b;
    if (period_x > 0.0) d.x() -= period_x * std::round(d.x() / period_x);
    if (period_y > 0.0) d.y() -= period_y * std::round(d.y() / period_y);
    return d;
  }
  double distance(const Vec2& a, const Vec2& b) const { return diff(a, b).norm(); }
};

}  // namespace coopnlos
