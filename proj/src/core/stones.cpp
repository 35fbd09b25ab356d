#include "stones.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace curlvis {

const char* to_string(HandleColor c) {
  switch (c) {
    case HandleColor::unknown: return "unknown";
    case HandleColor::red: return "red";
    case HandleColor::yellow: return "yellow";
  }
  return "unknown";
}

std::vector<BoundingBox> group_boxes(const std::vector<Vec2>& pixels, double gap) {
  if (gap <= 0.0) throw std::invalid_argument("group_boxes: gap must be positive");
  const size_t n = pixels.size();
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), size_t(0));
  const auto find = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const double gap2 = gap * gap;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if ((pixels[i] - pixels[j]).squaredNorm() <= gap2) parent[find(i)] = find(j);

  std::vector<int> slot(n, -1);
  std::vector<BoundingBox> boxes;
  for (size_t i = 0; i < n; ++i) {
    const size_t root = find(i);
    if (slot[root] < 0) {
      slot[root] = int(boxes.size());
      boxes.push_back({pixels[i], pixels[i], 0});
    }
    BoundingBox& b = boxes[size_t(slot[root])];
    b.min = b.min.cwiseMin(pixels[i]);
    b.max = b.max.cwiseMax(pixels[i]);
  }
  const Vec2 pad(gap / 2.0, gap / 2.0);
  for (auto& b : boxes) {
    b.min -= pad;
    b.max += pad;
  }
  return boxes;
}

std::vector<EdgePoint> mask_boxed_edges(const std::vector<EdgePoint>& edges,
                                        const std::vector<BoundingBox>& boxes) {
  std::vector<EdgePoint> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    bool boxed = false;
    for (const auto& b : boxes)
      if (b.contains(e.pixel)) {
        boxed = true;
        break;
      }
    if (!boxed) out.push_back(e);
  }
  return out;
}

ObservationFrame mask_boxed_edges(const ObservationFrame& frame,
                                  const std::vector<BoundingBox>& boxes) {
  ObservationFrame out = frame;
  out.edge_points = mask_boxed_edges(frame.edge_points, boxes);
  return out;
}

PlaneAccumulator vote_circle_centers(const std::vector<Vec2>& plane_points, double radius,
                                     double cell, const Vec2& lo, const Vec2& hi) {
  PlaneAccumulator acc;
  acc.origin = lo;
  acc.cell = cell;
  acc.nx = std::max(1, int(std::floor((hi.x() - lo.x()) / cell)) + 1);
  acc.ny = std::max(1, int(std::floor((hi.y() - lo.y()) / cell)) + 1);
  acc.votes.assign(size_t(acc.nx) * size_t(acc.ny), 0);
  const double reach = radius + cell;
  for (const auto& p : plane_points) {
    // Conservative index window, exact distance test per cell: the window may
    // be a cell generous on each side, the predicate decides membership, so
    // the counts are identical to a full-grid scan.
    const int iy0 = std::max(0, int(std::ceil((p.y() - reach - lo.y()) / cell)) - 1);
    const int iy1 = std::min(acc.ny - 1, int(std::floor((p.y() + reach - lo.y()) / cell)) + 1);
    const int ix0 = std::max(0, int(std::ceil((p.x() - reach - lo.x()) / cell)) - 1);
    const int ix1 = std::min(acc.nx - 1, int(std::floor((p.x() + reach - lo.x()) / cell)) + 1);
    for (int iy = iy0; iy <= iy1; ++iy) {
      const double dy = lo.y() + iy * cell - p.y();
      for (int ix = ix0; ix <= ix1; ++ix) {
        const double dx = lo.x() + ix * cell - p.x();
        if (std::abs(std::sqrt(dx * dx + dy * dy) - radius) <= cell) ++acc.at(ix, iy);
      }
    }
  }
  return acc;
}

double ideal_ring_votes(const CameraModel& camera, const SheetSpec& spec, const Vec2& plane_point,
                        double edge_spacing_px) {
  constexpr int kSegments = 256;
  double perimeter_px = 0.0;
  bool have_prev = false;
  Vec2 prev = Vec2::Zero();
  for (int i = 0; i <= kSegments; ++i) {
    const double a = 2.0 * M_PI * double(i) / kSegments;
    const Vec3 w(plane_point.x() + spec.handle_circle_radius * std::cos(a),
                 plane_point.y() + spec.handle_circle_radius * std::sin(a), spec.handle_height);
    const auto px = camera.project(w);
    const bool ok = px.ok() && camera.intrinsics().contains(px.value());
    if (ok && have_prev) perimeter_px += (px.value() - prev).norm();
    have_prev = ok;
    if (ok) prev = px.value();
  }
  return perimeter_px / edge_spacing_px;
}

namespace {

// Stones are only swept on the camera's side of the playing area; clutter
// backprojects to wild ranges and would blow the accumulator up otherwise.
bool in_detection_zone(const SheetSpec& spec, const Vec2& p, double margin) {
  return spec.inside(p, margin) && p.y() <= spec.hogline_near_y() + margin;
}

// Fixed-radius circle-center polish, Gauss-Newton on the backprojected
// points. Backprojection stretches pixel noise strongly along the viewing
// direction (the plane is seen at a shallow angle), so each point carries the
// local pixel-to-plane covariance and its residual is weighted by the inverse
// variance along its own radial direction — the depth-noisy arcs then inform
// the fit at their true worth instead of being clipped or over-trusted. The
// inlier band scales the same way. Occluded arcs leave the normal matrix
// ill-conditioned, so it is ridged and the total displacement capped.
Vec2 refine_circle_center(const std::vector<Vec2>& pts,
                          const std::vector<Eigen::Matrix2d>& covs, Vec2 c, double radius,
                          double cell, double max_shift, const std::vector<Vec2>& rivals = {}) {
  const Vec2 seed = c;
  for (int it = 0; it < 12; ++it) {
    Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
    Vec2 g = Vec2::Zero();
    int n = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
      const Vec2 d = c - pts[i];
      const double dist = d.norm();
      if (dist < 1e-9) continue;
      const double res = std::abs(dist - radius);
      // A point belongs to whichever detected ring it matches best.
      bool taken = false;
      for (const auto& r : rivals)
        if (std::abs((r - pts[i]).norm() - radius) < res) {
          taken = true;
          break;
        }
      if (taken) continue;
      const Vec2 u = d / dist;
      const double var = std::max(1e-8, double(u.transpose() * covs[i] * u));
      const double band = std::clamp(3.0 * std::sqrt(var), 2.0 * cell, 0.08);
      if (res > band) continue;
      const double w = 1.0 / var;
      H += w * (u * u.transpose());
      g += w * u * (dist - radius);
      ++n;
    }
    if (n < 3) return seed;
    H += 1e-6 * H.trace() * Eigen::Matrix2d::Identity();
    const Vec2 step = -H.ldlt().solve(g);
    c += step;
    if ((c - seed).norm() > max_shift) return seed + (c - seed).normalized() * max_shift;
    if (step.norm() < 1e-10) break;
  }
  return c;
}

}  // namespace

std::vector<StoneDetection> detect_stones(const std::vector<Vec2>& edge_pixels,
                                          const PoseEstimate& pose, const CameraModel& camera,
                                          const SheetSpec& spec, const StoneVoteConfig& cfg) {
  if (cfg.cell <= 0.0) throw std::invalid_argument("detect_stones: cell must be positive");
  if (!pose.in_range)
    throw std::invalid_argument("detect_stones: pose was not accepted by the range check");

  const CameraModel cam = camera.with_pose(pose.pose);
  const double zone = 0.3 + spec.stone_radius;
  std::vector<Vec2> plane;
  std::vector<Eigen::Matrix2d> covs;  // pixel-to-plane covariance per point
  plane.reserve(edge_pixels.size());
  for (const auto& px : edge_pixels) {
    const auto p = cam.backproject_to_plane(px, spec.handle_height);
    if (!p.ok() || !in_detection_zone(spec, p.value(), zone)) continue;
    const auto pu = cam.backproject_to_plane(px + Vec2(0.5, 0.0), spec.handle_height);
    const auto pv = cam.backproject_to_plane(px + Vec2(0.0, 0.5), spec.handle_height);
    if (!pu.ok() || !pv.ok()) continue;
    Eigen::Matrix2d J;
    J.col(0) = (pu.value() - p.value()) / 0.5;
    J.col(1) = (pv.value() - p.value()) / 0.5;
    plane.push_back(p.value());
    covs.push_back(J * J.transpose());
  }
  if (plane.empty()) return {};

  Vec2 lo = plane.front(), hi = plane.front();
  for (const auto& p : plane) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 margin(spec.stone_radius + cfg.cell, spec.stone_radius + cfg.cell);
  PlaneAccumulator acc =
      vote_circle_centers(plane, spec.handle_circle_radius, cfg.cell, lo - margin, hi + margin);

  // The loop can stop once the strongest cell cannot clear the lowest bar
  // anywhere in the region (the far corners see the smallest rings).
  double floor_bar = std::numeric_limits<double>::infinity();
  for (const Vec2& corner : {Vec2(lo.x(), lo.y()), Vec2(hi.x(), lo.y()), Vec2(lo.x(), hi.y()),
                             Vec2(hi.x(), hi.y())})
    floor_bar = std::min(floor_bar,
                         cfg.threshold_fraction * ideal_ring_votes(cam, spec, corner,
                                                                   cfg.edge_spacing_px));
  floor_bar = std::max(floor_bar, 2.0);

  std::vector<StoneDetection> out;
  const double suppress = 2.0 * spec.stone_radius;
  for (;;) {
    // Counts are small, so several cells usually tie at the max along a
    // ridge; break ties by surrounding vote mass to sit on the ridge center
    // rather than its end, then row-major for determinism.
    int best = 0, bx = -1, by = -1, best_mass = -1;
    for (int iy = 0; iy < acc.ny; ++iy)
      for (int ix = 0; ix < acc.nx; ++ix) {
        const int v = acc.at(ix, iy);
        if (v < best || v == 0) continue;
        int mass = 0;
        for (int jy = std::max(0, iy - 2); jy <= std::min(acc.ny - 1, iy + 2); ++jy)
          for (int jx = std::max(0, ix - 2); jx <= std::min(acc.nx - 1, ix + 2); ++jx)
            mass += acc.at(jx, jy);
        if (v > best || mass > best_mass) {
          best = v;
          best_mass = mass;
          bx = ix;
          by = iy;
        }
      }
    if (bx < 0 || double(best) < floor_bar) break;
    // Polish on the plane points: the raw argmax drifts with backprojection
    // noise, and for the second stone of a close pair it is also pushed
    // outward by the first stone's suppression disk. The point fit sees
    // through both.
    const Vec2 center = refine_circle_center(plane, covs, acc.center_of(bx, by),
                                             spec.handle_circle_radius, cfg.cell, 0.06);
    const double bar =
        cfg.threshold_fraction * ideal_ring_votes(cam, spec, center, cfg.edge_spacing_px);
    if (double(best) >= bar && in_detection_zone(spec, center, 0.3))
      out.push_back({center, best, HandleColor::unknown});
    // Suppress a stone diameter around the peak whether or not it was
    // emitted, so weaker but distinct neighbours can surface next.
    for (int iy = 0; iy < acc.ny; ++iy)
      for (int ix = 0; ix < acc.nx; ++ix)
        if ((acc.center_of(ix, iy) - center).norm() <= suppress) acc.at(ix, iy) = 0;
  }

  // Joint polish: each ring refits with the others as rivals, so close pairs
  // stop trading points; a second round lets both members settle. Any pair
  // that still ends up closer than a stone diameter cannot be two stones —
  // keep the stronger.
  for (int round = 0; round < 2; ++round)
    for (size_t i = 0; i < out.size(); ++i) {
      std::vector<Vec2> rivals;
      for (size_t j = 0; j < out.size(); ++j)
        if (j != i) rivals.push_back(out[j].center);
      out[i].center = refine_circle_center(plane, covs, out[i].center,
                                           spec.handle_circle_radius, cfg.cell, 0.06, rivals);
    }
  std::sort(out.begin(), out.end(), [](const StoneDetection& a, const StoneDetection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.center.x() != b.center.x()) return a.center.x() < b.center.x();
    return a.center.y() < b.center.y();
  });
  std::vector<StoneDetection> kept;
  for (const auto& d : out) {
    bool clear = true;
    for (const auto& k : kept)
      if ((k.center - d.center).norm() < suppress) clear = false;
    if (clear) kept.push_back(d);
  }
  return kept;
}

namespace {

enum class CellVote { neither, red, yellow };

CellVote classify_cell(const Eigen::Vector3d& rgb) {
  const double r = rgb.x(), g = rgb.y(), b = rgb.z();
  if (r >= 180.0 && g >= 150.0 && b <= 120.0) return CellVote::yellow;
  if (r >= 150.0 && g <= 110.0) return CellVote::red;
  return CellVote::neither;
}

}  // namespace

std::vector<StoneDetection> assign_colors(std::vector<StoneDetection> detections,
                                          const ColorRaster* raster, const PoseSE3& pose,
                                          const CameraModel& camera, const SheetSpec& spec) {
  if (!raster || raster->width <= 0 || raster->height <= 0) return detections;
  const CameraModel cam = camera.with_pose(pose);
  const auto& intr = cam.intrinsics();
  for (auto& det : detections) {
    // Sample the handle disk and tally the distinct raster cells underneath;
    // cells showing an occluder read neutral and drop out of the majority.
    std::set<std::pair<int, int>> cells;
    const double R = 0.9 * spec.handle_circle_radius;
    constexpr int kRings = 4, kSpokes = 12;
    for (int ri = 0; ri < kRings; ++ri) {
      const double rr = R * double(ri) / (kRings - 1);
      const int spokes = ri == 0 ? 1 : kSpokes;
      for (int si = 0; si < spokes; ++si) {
        const double a = 2.0 * M_PI * double(si) / spokes;
        const Vec3 w(det.center.x() + rr * std::cos(a), det.center.y() + rr * std::sin(a),
                     spec.handle_height);
        const auto px = cam.project(w);
        if (!px.ok() || !intr.contains(px.value())) continue;
        const int ix = std::clamp(int(px.value().x() * raster->width / intr.width), 0,
                                  raster->width - 1);
        const int iy = std::clamp(int(px.value().y() * raster->height / intr.height), 0,
                                  raster->height - 1);
        cells.insert({ix, iy});
      }
    }
    int red = 0, yellow = 0;
    for (const auto& [ix, iy] : cells) {
      switch (classify_cell(raster->at(ix, iy))) {
        case CellVote::red: ++red; break;
        case CellVote::yellow: ++yellow; break;
        case CellVote::neither: break;
      }
    }
    if (red > yellow)
      det.color = HandleColor::red;
    else if (yellow > red)
      det.color = HandleColor::yellow;
    else
      det.color = HandleColor::unknown;
  }
  return detections;
}

Expected<StoneStageResult, NearPoseError> detect_stationary_stones(const ObservationFrame& frame,
                                                                   const CameraModel& camera,
                                                                   const SheetSpec& spec,
                                                                   const StoneStageConfig& cfg) {
  // Scouting pass: anything near an extracted line or the winning ring
  // ellipse is sheet pattern; the rest are stone suspects. A failed scout
  // still yields its lines, just no ring to exclude.
  std::vector<Vec3> pattern_lines;
  std::optional<Mat3> ring;
  const auto scout = estimate_pose_near(frame, camera, spec, cfg.pose);
  if (scout.ok()) {
    for (const auto& c : scout.value().refined) pattern_lines.push_back(c.line());
    ring = scout.value().detail.ellipse.matrix();
  } else {
    const FrameFeatures features = undistort_frame(frame, camera);
    for (const auto& c : extract_lines(features.edges, cfg.pose.lines))
      pattern_lines.push_back(c.line());
  }

  const auto& intr = camera.intrinsics();
  std::vector<Vec2> suspects;
  for (const auto& e : frame.edge_points) {
    const auto n = camera.undistort(e.pixel);
    if (!n.ok()) continue;
    const Vec2 up = intr.to_pixel(n.value());
    bool pattern = false;
    for (const auto& l : pattern_lines)
      if (point_line_distance(up, l) <= cfg.line_band_px) {
        pattern = true;
        break;
      }
    if (!pattern && ring && conic_point_distance(*ring, up) <= cfg.ellipse_band_px)
      pattern = true;
    if (!pattern) suspects.push_back(e.pixel);
  }

  std::vector<BoundingBox> boxes;
  for (const auto& b : group_boxes(suspects, cfg.gap_px)) {
    if (b.size().norm() > cfg.max_box_px) continue;  // pattern-sized, not a stone group
    int members = 0;
    for (const auto& p : suspects)
      if (b.contains(p)) ++members;
    if (members >= cfg.min_box_points) boxes.push_back(b);
  }

  auto final_pose = estimate_pose_near(mask_boxed_edges(frame, boxes), camera, spec, cfg.pose);
  if (!final_pose.ok()) return final_pose.error();

  StoneStageResult out;
  out.boxes = std::move(boxes);
  out.pose = std::move(final_pose.value());

  std::vector<StoneDetection> all;
  for (const auto& b : out.boxes) {
    std::vector<Vec2> in_box;
    for (const auto& e : frame.edge_points)
      if (b.contains(e.pixel)) in_box.push_back(e.pixel);
    const auto dets = detect_stones(in_box, out.pose.estimate, camera, spec, cfg.vote);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  // Padded boxes can overlap and see the same stone twice; keep the stronger
  // detection of any pair closer than a stone diameter.
  std::sort(all.begin(), all.end(), [](const StoneDetection& a, const StoneDetection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.center.x() != b.center.x()) return a.center.x() < b.center.x();
    return a.center.y() < b.center.y();
  });
  std::vector<StoneDetection> kept;
  for (const auto& d : all) {
    bool dup = false;
    for (const auto& k : kept)
      if ((k.center - d.center).norm() < 2.0 * spec.stone_radius) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back(d);
  }
  out.stones = assign_colors(std::move(kept),
                             frame.color_raster ? &*frame.color_raster : nullptr,
                             out.pose.estimate.pose, camera, spec);
  return out;
}

}  // namespace curlvis
