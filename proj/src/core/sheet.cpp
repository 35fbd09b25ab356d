#include "sheet.hpp"

#include <stdexcept>

namespace curlvis {

void SheetSpec::validate() const {
  if (!(width > 0)) throw std::invalid_argument("sheet.width must be > 0");
  if (!(hog_to_tee > 0)) throw std::invalid_argument("sheet.hog_to_tee must be > 0");
  if (!(hog_to_hog > 0)) throw std::invalid_argument("sheet.hog_to_hog must be > 0");
  if (!(house_outer_radius > 0))
    throw std::invalid_argument("sheet.house_outer_radius must be > 0");
  if (!(width > 2.0 * house_outer_radius))
    throw std::invalid_argument("sheet.width must exceed the house diameter");
  for (double r : house_inner_radii)
    if (!(r > 0 && r < house_outer_radius))
      throw std::invalid_argument("sheet.house_inner_radii must be in (0, house_outer_radius)");
  if (!(stone_radius > 0)) throw std::invalid_argument("sheet.stone_radius must be > 0");
  if (!(handle_circle_radius > 0))
    throw std::invalid_argument("sheet.handle_circle_radius must be > 0");
  if (!(handle_circle_radius < stone_radius))
    throw std::invalid_argument("sheet.handle_circle_radius must be < sheet.stone_radius");
  if (!(handle_height > 0)) throw std::invalid_argument("sheet.handle_height must be > 0");
  if (!(sideline_deviation_tolerance >= 0))
    throw std::invalid_argument("sheet.sideline_deviation_tolerance must be >= 0");
}

const char* to_string(SheetLineKind k) {
  switch (k) {
    case SheetLineKind::hogline_near: return "hogline_near";
    case SheetLineKind::hogline_far: return "hogline_far";
    case SheetLineKind::sideline_left: return "sideline_left";
    case SheetLineKind::sideline_right: return "sideline_right";
    case SheetLineKind::centerline: return "centerline";
    case SheetLineKind::teeline: return "teeline";
  }
  return "?";
}

std::array<Vec2, 4> canonical_four_points(const SheetSpec& spec) {
  spec.validate();
  const Vec2 c = spec.house_center();
  const double R = spec.house_outer_radius;
  return {Vec2(c.x() - R, c.y()), Vec2(c.x() + R, c.y()), Vec2(c.x(), c.y() - R),
          Vec2(c.x(), c.y() + R)};
}

std::vector<SheetLine> ideal_lines(const SheetSpec& spec) {
  spec.validate();
  const double hw = spec.half_width();
  const double y0 = 0.0, y1 = spec.length();
  std::vector<SheetLine> lines;
  lines.push_back({SheetLineKind::hogline_near, {-hw, spec.hogline_near_y()}, {hw, spec.hogline_near_y()}});
  lines.push_back({SheetLineKind::hogline_far, {-hw, spec.hogline_far_y()}, {hw, spec.hogline_far_y()}});
  lines.push_back({SheetLineKind::sideline_left, {-hw, y0}, {-hw, y1}});
  lines.push_back({SheetLineKind::sideline_right, {hw, y0}, {hw, y1}});
  lines.push_back({SheetLineKind::centerline, {0.0, y0}, {0.0, y1}});
  lines.push_back({SheetLineKind::teeline, {-hw, spec.teeline_y()}, {hw, spec.teeline_y()}});
  return lines;
}

}  // namespace curlvis
