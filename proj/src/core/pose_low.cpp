#include "pose_low.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace curlvis {

const char* to_string(HFitError) { return "NoTriple"; }
const char* to_string(TriggerError) { return "NeverTriggered"; }

namespace {

// Intersection range of the line p0 + t*d with the sensor rectangle.
std::optional<std::pair<double, double>> clip_to_sensor(const Vec2& p0, const Vec2& d,
                                                        const Intrinsics& intr) {
  double lo = -1e18, hi = 1e18;
  const double bounds[2][2] = {{0.0, double(intr.width)}, {0.0, double(intr.height)}};
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(d[axis]) < 1e-12) {
      if (p0[axis] < bounds[axis][0] || p0[axis] > bounds[axis][1]) return std::nullopt;
      continue;
    }
    double t0 = (bounds[axis][0] - p0[axis]) / d[axis];
    double t1 = (bounds[axis][1] - p0[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (lo >= hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

std::vector<GroundLine> backproject_lines(const std::vector<LineCandidate>& candidates,
                                          const Intrinsics& intr, double tilt, double height,
                                          int* dropped) {
  if (height <= 0.0) throw std::invalid_argument("backproject_lines: height must be > 0");
  if (dropped) *dropped = 0;
  // Ground frame = a camera at the origin with the measured tilt and height;
  // rays use the same pose algebra as the rest of the rig.
  const PoseSE3 mount = camera_pose({0.0, 0.0, height}, 0.0, tilt);
  const Mat3 cam_to_ground = mount.rotation.transpose();

  std::vector<GroundLine> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const Vec2 p0(c.rho * std::cos(c.theta), c.rho * std::sin(c.theta));
    const Vec2 d(-std::sin(c.theta), std::cos(c.theta));
    const auto range = clip_to_sensor(p0, d, intr);
    if (!range) {
      if (dropped) ++*dropped;
      continue;
    }
    const auto ray_at = [&](double t) {
      const Vec2 n = intr.to_normalized(p0 + t * d);
      return Vec3(cam_to_ground * Vec3(n.x(), n.y(), 1.0));
    };
    // The image of a ground line crosses the horizon at its vanishing point,
    // so only part of the in-sensor span may descend to the ice. The descent
    // rate is affine along the line; keep the sub-span whose rays land within
    // 100 m (the shallower rest is the sky side or numerically worthless).
    const double z_need = -height / 100.0;
    double vlo = range->first, vhi = range->second;
    const double zlo = ray_at(vlo).z(), zhi = ray_at(vhi).z();
    if (zlo > z_need && zhi > z_need) {
      if (dropped) ++*dropped;
      continue;
    }
    if (std::abs(zhi - zlo) > 1e-15) {
      const double t_cut = vlo + (z_need - zlo) / (zhi - zlo) * (vhi - vlo);
      if (zlo > z_need) vlo = t_cut;
      else if (zhi > z_need) vhi = t_cut;
    }
    const auto to_ground = [&](double t) -> std::optional<Vec2> {
      const Vec3 dir = ray_at(t);
      if (dir.z() >= -1e-12) return std::nullopt;
      const double s = -height / dir.z();
      return Vec2(s * dir.x(), s * dir.y());
    };
    const double span = vhi - vlo;
    const auto g1 = to_ground(vlo + 0.25 * span);
    const auto g2 = to_ground(vlo + 0.75 * span);
    if (!g1 || !g2 || (*g2 - *g1).norm() < 1e-9) {
      if (dropped) ++*dropped;
      continue;
    }
    GroundLine g;
    g.point = *g1;
    g.direction = (*g2 - *g1).normalized();
    g.source = c;
    out.push_back(g);
  }
  return out;
}

Expected<HShapeFit, HFitError> fit_H(const std::vector<GroundLine>& lines, double sheet_width,
                                     const HWeights& weights) {
  if (sheet_width <= 0.0) throw std::invalid_argument("fit_H: sheet_width must be > 0");
  const int n = int(lines.size());
  if (n < 3) return HFitError::NoTriple;

  HShapeFit best;
  double best_err = std::numeric_limits<double>::infinity();
  bool found = false;

  const auto intercept = [](const GroundLine& a, const GroundLine& b) -> std::optional<Vec2> {
    const double den = cross2(a.direction, b.direction);
    if (std::abs(den) < 1e-9) return std::nullopt;
    const double t = cross2(b.point - a.point, b.direction) / den;
    return Vec2(a.point + t * a.direction);
  };

  for (int h = 0; h < n; ++h) {
    for (int i = 0; i < n; ++i) {
      if (i == h) continue;
      for (int j = i + 1; j < n; ++j) {
        if (j == h) continue;
        const auto pi = intercept(lines[h], lines[i]);
        const auto pj = intercept(lines[h], lines[j]);
        if (!pi || !pj) continue;
        // Roles within the pair: x grows to the camera's right.
        int li = i, ri = j;
        Vec2 pl = *pi, pr = *pj;
        if (pl.x() > pr.x()) {
          std::swap(li, ri);
          std::swap(pl, pr);
        }
        const double e_l = std::abs(lines[li].direction.dot(lines[h].direction));
        const double e_r = std::abs(lines[ri].direction.dot(lines[h].direction));
        const double e_w = std::abs((pl - pr).norm() - sheet_width);
        const double err = weights.perpendicular_left * e_l +
                           weights.perpendicular_right * e_r + weights.width * e_w;
        if (err < best_err) {
          best_err = err;
          best.hogline = lines[h];
          best.left = lines[li];
          best.right = lines[ri];
          best.interceptions = {pl, pr};
          best.error = err;
          best.selected = {h, li, ri};
          found = true;
        }
      }
    }
  }
  if (!found) return HFitError::NoTriple;

  // Derived pose pieces: all in the camera's ground frame (origin = camera
  // foot), so the distance is a plain point-to-line drop.
  best.distance_to_hogline = std::abs(cross2(best.hogline.point, best.hogline.direction));
  const Vec2 mid = 0.5 * (best.interceptions[0] + best.interceptions[1]);
  const Vec2 across = (best.interceptions[1] - best.interceptions[0]).normalized();
  best.lateral_offset = -mid.dot(across);
  // Heading against the uprights: they run down-sheet, so the angle between
  // the camera's forward axis (+y here) and their mean direction is the yaw.
  Vec2 dl = best.left.direction, dr = best.right.direction;
  if (dl.y() < 0.0) dl = -dl;
  if (dr.y() < 0.0) dr = -dr;
  const Vec2 mean = (dl + dr).normalized();
  best.yaw = rad2deg(std::atan2(-mean.x(), mean.y()));
  return best;
}

Expected<LowPoseResult, HFitError> estimate_pose_low(const ObservationFrame& frame,
                                                     const CameraModel& camera,
                                                     double sheet_width,
                                                     const LowPoseConfig& cfg) {
  const FrameFeatures features = undistort_frame(frame, camera);
  auto refined = extract_lines(features.edges, cfg.lines);

  // The uprights converge toward a shared vanishing point, where each line's
  // refine band swallows the other's points and tilts the fit by several
  // hundredths of a degree. Re-polish jointly: a point only counts for the
  // nearest detected line.
  for (size_t i = 0; i < refined.size(); ++i) {
    std::vector<Vec3> rivals;
    rivals.reserve(refined.size() - 1);
    for (size_t j = 0; j < refined.size(); ++j)
      if (j != i) rivals.push_back(refined[j].line());
    refined[i] = refine_line(refined[i], features.edges, rivals, cfg.refine_band);
  }

  LowPoseResult result;
  result.candidate_count = int(refined.size());
  int dropped = 0;
  auto ground = backproject_lines(refined, camera.intrinsics(), camera.mount_pitch(),
                                  camera.mount_height(), &dropped);
  // Grazing-angle lines are metrically useless and would alias the far
  // crossbar; range-gate on the perpendicular foot of each line.
  std::erase_if(ground, [&](const GroundLine& g) {
    const bool far = std::abs(cross2(g.point, g.direction)) > cfg.max_ground_range;
    if (far) ++dropped;
    return far;
  });
  result.dropped = dropped;

  const auto fit = fit_H(ground, sheet_width, cfg.weights);
  if (!fit.ok()) return fit.error();
  result.fit = fit.value();
  return result;
}

Expected<double, TriggerError> release_trigger(const std::vector<TimedFit>& fits, double target,
                                               double nominal_speed, double latency) {
  if (target <= 0.0) throw std::invalid_argument("release_trigger: target must be > 0");
  if (latency < 0.0) throw std::invalid_argument("release_trigger: latency must be >= 0");
  if (nominal_speed <= 0.0)
    throw std::invalid_argument("release_trigger: nominal_speed must be > 0");

  bool have_prev = false;
  double prev_t = 0.0, prev_d = 0.0;
  for (size_t i = 0; i < fits.size(); ++i) {
    const double t = fits[i].timestamp;
    const double d = fits[i].fit.distance_to_hogline;
    if (have_prev && t <= prev_t)
      throw std::invalid_argument("release_trigger: fits must be time-ordered");
    double v = nominal_speed;
    if (have_prev) v = (prev_d - d) / (t - prev_t);
    have_prev = true;
    prev_t = t;
    prev_d = d;
    if (v <= 1e-9) continue;  // not closing on the line
    const double t_release = t + (d - target) / v;
    const double t_fire = t_release - latency;
    if (t_fire <= t) return t;  // due now (or overdue): fire at this frame
    const double t_next =
        i + 1 < fits.size() ? fits[i + 1].timestamp : std::numeric_limits<double>::infinity();
    // Fire between frames when no fresher estimate would arrive first.
    if (t_fire < t_next) return t_fire;
  }
  return TriggerError::NeverTriggered;
}

}  // namespace curlvis
