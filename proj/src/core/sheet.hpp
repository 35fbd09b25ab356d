#pragma once

#include <array>
#include <vector>

#include "geometry.hpp"

namespace curlvis {

// Parametric sheet geometry. Frame: origin on the centerline at the near back
// boundary, +y down-sheet, +x right, z up. The house center sits hog_to_tee
// down-sheet of the origin; the near hogline is hog_to_tee beyond the house.
struct SheetSpec {
  double width = 4.75;
  double hog_to_tee = 6.40;
  double hog_to_hog = 21.945;
  double house_outer_radius = 1.829;
  std::vector<double> house_inner_radii = {1.219, 0.610, 0.152};
  double stone_radius = 0.145;
  double handle_circle_radius = 0.065;
  double handle_height = 0.115;
  double sideline_deviation_tolerance = 0.064;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  Vec2 house_center() const { return {0.0, hog_to_tee}; }
  double hogline_near_y() const { return hog_to_tee + hog_to_tee; }
  double hogline_far_y() const { return hogline_near_y() + hog_to_hog; }
  double teeline_y() const { return hog_to_tee; }
  double far_teeline_y() const { return hogline_far_y() + hog_to_tee; }
  double length() const { return far_teeline_y() + hog_to_tee; }
  double half_width() const { return 0.5 * width; }

  bool inside(const Vec2& p, double margin = 0.0) const {
    return std::abs(p.x()) <= half_width() + margin && p.y() >= -margin &&
           p.y() <= length() + margin;
  }
};

enum class SheetLineKind {
  hogline_near,
  hogline_far,
  sideline_left,
  sideline_right,
  centerline,
  teeline,
};
const char* to_string(SheetLineKind k);

struct SheetLine {
  SheetLineKind kind;
  Vec2 a, b;  // endpoints, meters

  Vec2 direction() const { return (b - a).normalized(); }
};

// The house-circle extremes of the outer ring, ordered [left, right, near, far].
std::array<Vec2, 4> canonical_four_points(const SheetSpec& spec);

std::vector<SheetLine> ideal_lines(const SheetSpec& spec);

}  // namespace curlvis
