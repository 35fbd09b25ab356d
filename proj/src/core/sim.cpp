#include "sim.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace curlvis {

const char* to_string(StoneColor c) { return c == StoneColor::red ? "red" : "yellow"; }

const char* to_string(StoneStatus s) {
  switch (s) {
    case StoneStatus::stationary: return "stationary";
    case StoneStatus::moving: return "moving";
    case StoneStatus::out: return "out";
  }
  return "?";
}

const char* to_string(CameraId id) {
  switch (id) {
    case CameraId::near_view: return "near";
    case CameraId::far_view: return "far";
    case CameraId::low_view: return "low";
  }
  return "?";
}

const char* to_string(EdgeSourceKind k) {
  switch (k) {
    case EdgeSourceKind::hogline: return "hogline";
    case EdgeSourceKind::hogline_far: return "hogline_far";
    case EdgeSourceKind::sideline_left: return "sideline_left";
    case EdgeSourceKind::sideline_right: return "sideline_right";
    case EdgeSourceKind::ring_contour: return "ring_contour";
    case EdgeSourceKind::stone_handle: return "stone_handle";
    case EdgeSourceKind::clutter: return "clutter";
  }
  return "?";
}

const StoneState* Scene::stone_by_id(int id) const {
  for (const auto& s : stones)
    if (s.id == id) return &s;
  return nullptr;
}

RenderOptions default_render_options(CameraId id) {
  RenderOptions opt;
  switch (id) {
    case CameraId::near_view:
      opt.raster = true;
      break;
    case CameraId::far_view:
      opt.pattern_lines = false;
      opt.ring = false;
      break;
    case CameraId::low_view:
      opt.ring = false;
      opt.stones = false;
      opt.far_hogline = true;
      break;
  }
  return opt;
}

namespace {

struct Curve {
  EdgeSourceKind source = EdgeSourceKind::clutter;
  int stone_id = -1;
  double t0 = 0.0, t1 = 1.0;
  std::function<Vec3(double)> at;
};

struct Sample {
  double t = 0.0;
  Vec3 world = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
  bool occluded = false;
};

// Projection skipping the distortion model (used to seed clutter lines in the
// straight-line space the detector works in).
std::optional<Vec2> project_nodist(const CameraModel& cam, const Vec3& world) {
  const Vec3 c = cam.pose().to_camera(world);
  if (c.z() <= 1e-9) return std::nullopt;
  return cam.intrinsics().to_pixel({c.x() / c.z(), c.y() / c.z()});
}

std::optional<Vec2> project_visible(const CameraModel& cam, const Vec3& world) {
  const Vec3 c = cam.pose().to_camera(world);
  if (c.z() <= 0.05) return std::nullopt;  // clip close to the camera plane
  auto px = cam.project(world);
  if (!px.ok() || !cam.intrinsics().contains(*px)) return std::nullopt;
  return *px;
}

// March along the curve keeping projected samples ~arc_px apart.
std::vector<Sample> sample_curve(const Curve& curve, const CameraModel& cam, double arc_px) {
  std::vector<Sample> out;
  const double span = curve.t1 - curve.t0;
  const double coarse = span / 1000.0;
  const double eps = span * 1e-7;
  double t = curve.t0;
  for (int guard = 0; guard < 60000 && t < curve.t1; ++guard) {
    const Vec3 world = curve.at(t);
    const auto px = project_visible(cam, world);
    double step = coarse;
    if (px) {
      out.push_back({t, world, *px, false});
      if (const auto px2 = project_visible(cam, curve.at(t + eps))) {
        const double speed = (*px2 - *px).norm() / eps;  // px per unit t
        if (speed > 1e-12) step = std::clamp(arc_px / speed, span / 50000.0, span / 8.0);
      }
    }
    t += step;
  }
  return out;
}

Curve segment_curve(EdgeSourceKind source, const Vec2& a, const Vec2& b, double z) {
  Curve c;
  c.source = source;
  c.at = [=](double t) { return Vec3(a.x() + t * (b.x() - a.x()), a.y() + t * (b.y() - a.y()), z); };
  return c;
}

Curve circle_curve(EdgeSourceKind source, int stone_id, const Vec2& center, double radius,
                   double z) {
  Curve c;
  c.source = source;
  c.stone_id = stone_id;
  c.t0 = 0.0;
  c.t1 = 2.0 * M_PI;
  c.at = [=](double a) {
    return Vec3(center.x() + radius * std::cos(a), center.y() + radius * std::sin(a), z);
  };
  return c;
}

// Does the open segment camera->target pass through any stone cylinder?
// Occluders reach above the handle plane (the grip bar protrudes), otherwise a
// camera above stone height could never lose sight of a handle boundary.
bool ray_blocked(const Vec3& origin, const Vec3& target, const Scene& scene, int skip_id) {
  const Vec3 d = target - origin;
  const double h = 2.0 * scene.sheet.handle_height;
  const double r = scene.sheet.stone_radius;
  for (const auto& s : scene.stones) {
    if (s.id == skip_id || s.status == StoneStatus::out) continue;
    const Vec2 oc(origin.x() - s.position.x(), origin.y() - s.position.y());
    const Vec2 dxy(d.x(), d.y());
    const double a = dxy.squaredNorm();
    if (a < 1e-18) continue;
    const double b = dxy.dot(oc);
    const double c = oc.squaredNorm() - r * r;
    const double disc = b * b - a * c;
    if (disc <= 0.0) continue;
    const double sq = std::sqrt(disc);
    double u1 = (-b - sq) / a, u2 = (-b + sq) / a;
    // Window where the ray height is inside the cylinder band [0, h].
    double z1 = 0.0, z2 = 1.0;
    if (std::abs(d.z()) > 1e-15) {
      z1 = (0.0 - origin.z()) / d.z();
      z2 = (h - origin.z()) / d.z();
      if (z1 > z2) std::swap(z1, z2);
    } else if (origin.z() < 0.0 || origin.z() > h) {
      continue;
    }
    const double lo = std::max({u1, z1, 1e-9});
    const double hi = std::min({u2, z2, 1.0 - 1e-6});
    if (lo < hi) return true;
  }
  return false;
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

struct RasterHit {
  RasterLabel label = RasterLabel::ice;
  Eigen::Vector3d color = {245, 246, 250};
};

Eigen::Vector3d raster_color(RasterLabel label) {
  switch (label) {
    case RasterLabel::ice: return {245, 246, 250};
    case RasterLabel::ring_blue: return {25, 70, 165};
    case RasterLabel::ring_red: return {200, 30, 45};
    case RasterLabel::stone_red: return {190, 35, 50};
    case RasterLabel::stone_yellow: return {235, 200, 40};
    case RasterLabel::granite: return {120, 125, 130};
  }
  return {245, 246, 250};
}

const Eigen::Vector3d kBackgroundColor = {150, 152, 158};

RasterHit trace_raster_ray(const Vec3& origin, const Vec3& dir, const Scene& scene) {
  const double h = scene.sheet.handle_height;
  const double r = scene.sheet.stone_radius;
  double best_u = std::numeric_limits<double>::infinity();
  RasterHit hit;
  bool found = false;
  for (const auto& s : scene.stones) {
    if (s.status == StoneStatus::out) continue;
    const Vec2 oc(origin.x() - s.position.x(), origin.y() - s.position.y());
    const Vec2 dxy(dir.x(), dir.y());
    const double a = dxy.squaredNorm();
    const double b = dxy.dot(oc);
    const double c = oc.squaredNorm() - r * r;
    const double disc = b * b - a * c;
    if (a < 1e-18 || disc <= 0.0) continue;
    const double sq = std::sqrt(disc);
    double u1 = (-b - sq) / a, u2 = (-b + sq) / a;
    double z1, z2;
    if (std::abs(dir.z()) > 1e-15) {
      z1 = (0.0 - origin.z()) / dir.z();
      z2 = (h - origin.z()) / dir.z();
      if (z1 > z2) std::swap(z1, z2);
    } else {
      if (origin.z() < 0.0 || origin.z() > h) continue;
      z1 = -std::numeric_limits<double>::infinity();
      z2 = std::numeric_limits<double>::infinity();
    }
    const double lo = std::max({u1, z1, 1e-9});
    const double hi = std::min(u2, z2);
    if (lo >= hi || lo >= best_u) continue;
    best_u = lo;
    found = true;
    const double entry_z = origin.z() + lo * dir.z();
    const Vec2 entry_xy(origin.x() + lo * dir.x() - s.position.x(),
                        origin.y() + lo * dir.y() - s.position.y());
    if (std::abs(entry_z - h) < 1e-9 && entry_xy.norm() <= scene.sheet.handle_circle_radius) {
      hit.label = s.color == StoneColor::red ? RasterLabel::stone_red : RasterLabel::stone_yellow;
    } else {
      hit.label = RasterLabel::granite;
    }
    hit.color = raster_color(hit.label);
  }
  if (found) return hit;

  if (dir.z() >= -1e-12) {  // above the horizon: arena background
    hit.label = RasterLabel::ice;
    hit.color = kBackgroundColor;
    return hit;
  }
  const double s = -origin.z() / dir.z();
  const Vec2 g(origin.x() + s * dir.x(), origin.y() + s * dir.y());
  const double rad = (g - scene.sheet.house_center()).norm();
  const auto& inner = scene.sheet.house_inner_radii;
  RasterLabel label = RasterLabel::ice;
  if (rad <= scene.sheet.house_outer_radius) {
    label = RasterLabel::ring_blue;
    if (inner.size() >= 1 && rad <= inner[0]) label = RasterLabel::ice;
    if (inner.size() >= 2 && rad <= inner[1]) label = RasterLabel::ring_red;
    if (inner.size() >= 3 && rad <= inner[2]) label = RasterLabel::ice;
  }
  hit.label = label;
  hit.color = raster_color(label);
  return hit;
}

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

}  // namespace

ObservationFrame render_frame(const Scene& scene, const CameraModel& camera, CameraId camera_id,
                              const NoiseConfig& noise, double timestamp,
                              const RenderOptions& options) {
  scene.sheet.validate();
  if (noise.dropout_fraction < 0.0 || noise.dropout_fraction > 1.0)
    throw std::invalid_argument("noise.dropout_fraction must be in [0,1]");
  if (noise.pixel_sigma < 0.0) throw std::invalid_argument("noise.pixel_sigma must be >= 0");

  ObservationFrame frame;
  frame.camera_id = camera_id;
  frame.timestamp = timestamp;
  frame.true_pose = camera.pose();

  const SheetSpec& sheet = scene.sheet;
  std::vector<Curve> curves;
  if (options.pattern_lines) {
    const double y0 = 0.0, y1 = sheet.length();
    const double hog_y = sheet.hogline_near_y();
    curves.push_back(segment_curve(EdgeSourceKind::hogline, {-sheet.half_width(), hog_y},
                                   {sheet.half_width(), hog_y}, 0.0));
    if (options.far_hogline) {
      const double far_y = sheet.hogline_far_y();
      curves.push_back(segment_curve(EdgeSourceKind::hogline_far, {-sheet.half_width(), far_y},
                                     {sheet.half_width(), far_y}, 0.0));
    }
    curves.push_back(segment_curve(EdgeSourceKind::sideline_left, {scene.sideline_left_x(), y0},
                                   {scene.sideline_left_x(), y1}, 0.0));
    curves.push_back(segment_curve(EdgeSourceKind::sideline_right, {scene.sideline_right_x(), y0},
                                   {scene.sideline_right_x(), y1}, 0.0));
  }
  if (options.ring) {
    curves.push_back(circle_curve(EdgeSourceKind::ring_contour, -1, sheet.house_center(),
                                  sheet.house_outer_radius, 0.0));
  }
  if (options.stones) {
    std::vector<const StoneState*> by_id;
    for (const auto& s : scene.stones)
      if (s.status != StoneStatus::out) by_id.push_back(&s);
    std::sort(by_id.begin(), by_id.end(),
              [](const StoneState* a, const StoneState* b) { return a->id < b->id; });
    for (const StoneState* s : by_id)
      curves.push_back(circle_curve(EdgeSourceKind::stone_handle, s->id, s->position,
                                    sheet.handle_circle_radius, sheet.handle_height));
  }

  Rng rng(noise.seed);
  const Vec3 cam_center = camera.pose().camera_center();
  const auto emit = [&](const Vec2& raw_px, EdgeSourceKind source, int stone_id) {
    if (rng.uniform() < noise.dropout_fraction) return;
    Vec2 px = raw_px;
    if (noise.pixel_sigma > 0.0)
      px += Vec2(rng.gaussian(noise.pixel_sigma), rng.gaussian(noise.pixel_sigma));
    if (!camera.intrinsics().contains(px)) return;
    frame.edge_points.push_back({px, source, stone_id});
  };

  for (const auto& curve : curves) {
    auto samples = sample_curve(curve, camera, options.arc_px);
    for (auto& s : samples)
      s.occluded = ray_blocked(cam_center, s.world, scene, curve.stone_id);
    if (curve.source == EdgeSourceKind::stone_handle && !samples.empty()) {
      const size_t visible =
          size_t(std::count_if(samples.begin(), samples.end(),
                               [](const Sample& s) { return !s.occluded; }));
      if (double(visible) < options.min_handle_visibility * double(samples.size())) {
        // Keep the camera-facing rim of the handle arc: the handle boundary is
        // never entirely hidden even in clusters.
        const StoneState* stone = scene.stone_by_id(curve.stone_id);
        const double to_cam = std::atan2(cam_center.y() - stone->position.y(),
                                         cam_center.x() - stone->position.x());
        for (auto& s : samples)
          if (std::abs(wrap_angle(s.t - to_cam)) <= options.min_handle_visibility * M_PI)
            s.occluded = false;
      }
    }
    for (const auto& s : samples)
      if (!s.occluded) emit(s.pixel, curve.source, curve.stone_id);
  }

  // Straight clutter lines, generated in the undistorted space where real
  // scene lines are straight, then mapped through the lens model.
  if (noise.outlier_line_count > 0) {
    std::vector<std::pair<double, double>> bases;  // (rho, theta) undistorted px
    if (options.pattern_lines) {
      const double y1 = sheet.length();
      const Vec2 ideal[3][2] = {
          {{-sheet.half_width(), sheet.hogline_near_y()}, {sheet.half_width(), sheet.hogline_near_y()}},
          {{scene.sideline_left_x(), 0.0}, {scene.sideline_left_x(), y1}},
          {{scene.sideline_right_x(), 0.0}, {scene.sideline_right_x(), y1}},
      };
      for (const auto& seg : ideal) {
        const auto a = project_nodist(camera, {seg[0].x(), seg[0].y(), 0.0});
        const auto b = project_nodist(camera, {seg[1].x(), seg[1].y(), 0.0});
        if (!a || !b || (*a - *b).norm() < 1.0) continue;
        double rho, theta;
        polar_from_line(line_through(*a, *b), rho, theta);
        bases.emplace_back(rho, theta);
      }
    }
    if (bases.empty()) {
      const auto& intr = camera.intrinsics();
      bases = {{intr.width / 2.0, 0.0},
               {intr.height / 3.0, M_PI / 2.0},
               {2.0 * intr.height / 3.0, M_PI / 2.0}};
    }
    for (int i = 0; i < noise.outlier_line_count; ++i) {
      const auto [rho0, theta0] = bases[size_t(i) % bases.size()];
      const double drho = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(20.0, 80.0);
      const double dtheta =
          (rng.uniform() < 0.5 ? -1.0 : 1.0) * deg2rad(rng.uniform(2.0, 8.0));
      double rho = rho0 + drho, theta = theta0 + dtheta;
      if (theta < 0.0) {
        theta += M_PI;
        rho = -rho;
      } else if (theta >= M_PI) {
        theta -= M_PI;
        rho = -rho;
      }
      const Vec2 p0(rho * std::cos(theta), rho * std::sin(theta));
      const Vec2 dir(-std::sin(theta), std::cos(theta));
      const auto range = clip_to_sensor(p0, dir, camera.intrinsics());
      if (!range) continue;
      for (double t = range->first; t <= range->second; t += options.arc_px) {
        const Vec2 ideal_px = p0 + t * dir;
        const Vec2 n = camera.intrinsics().to_normalized(ideal_px);
        emit(camera.intrinsics().to_pixel(camera.distortion().apply(n)),
             EdgeSourceKind::clutter, -1);
      }
    }
  }

  for (int i = 0; i < noise.outlier_count; ++i) {
    const Vec2 px(rng.uniform(0.0, camera.intrinsics().width),
                  rng.uniform(0.0, camera.intrinsics().height));
    frame.edge_points.push_back({px, EdgeSourceKind::clutter, -1});
  }

  if (options.raster) {
    ColorRaster raster;
    raster.width = options.raster_width;
    raster.height = options.raster_height;
    raster.cells.resize(size_t(raster.width) * raster.height);
    raster.true_labels.resize(raster.cells.size());
    for (int y = 0; y < raster.height; ++y) {
      for (int x = 0; x < raster.width; ++x) {
        const Vec2 px = raster.cell_center_px(x, y, camera.intrinsics());
        RasterHit hit;
        if (auto ray = camera.pixel_ray(px); ray.ok())
          hit = trace_raster_ray(ray->first, ray->second, scene);
        raster.at(x, y) = hit.color;
        raster.true_labels[size_t(y) * raster.width + x] = uint8_t(hit.label);
      }
    }
    frame.color_raster = std::move(raster);
  }
  return frame;
}

// ---------------------------------------------------------------------------

namespace {

struct Derivative {
  Vec2 dp, dv;
};

Derivative motion_derivative(const Vec2& vel, double decel, double curl_acc) {
  const double v = vel.norm();
  if (v < 1e-9) return {Vec2::Zero(), Vec2::Zero()};
  const Vec2 heading = vel / v;
  const Vec2 lateral(-heading.y(), heading.x());
  return {vel, -decel * heading + curl_acc * lateral};
}

void rk4_advance(StoneState& s, double h, double decel, double curl_acc) {
  const auto k1 = motion_derivative(s.velocity, decel, curl_acc);
  const auto k2 = motion_derivative(s.velocity + 0.5 * h * k1.dv, decel, curl_acc);
  const auto k3 = motion_derivative(s.velocity + 0.5 * h * k2.dv, decel, curl_acc);
  const auto k4 = motion_derivative(s.velocity + h * k3.dv, decel, curl_acc);
  s.position += h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  s.velocity += h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
}

}  // namespace

std::vector<std::pair<double, StoneState>> ThrowLog::thrown_trajectory() const {
  std::vector<std::pair<double, StoneState>> out;
  for (const auto& step : steps)
    for (const auto& s : step.stones)
      if (s.id == thrown_id) out.emplace_back(step.t, s);
  return out;
}

Scene scene_at_step(const Scene& initial, const ThrowLog& log, size_t step_index) {
  Scene scene = initial;
  scene.stones = log.steps.at(step_index).stones;
  return scene;
}

ThrowLog simulate_throw(const Scene& initial, const ThrowParams& params, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("throw.dt must be > 0");
  if (!(params.release_speed > 0))
    throw std::invalid_argument("throw.release_speed must be > 0");
  if (!(params.deceleration > 0))
    throw std::invalid_argument("throw.deceleration must be > 0");
  initial.sheet.validate();

  ThrowLog log;
  std::vector<StoneState> stones = initial.stones;
  int max_id = -1;
  for (const auto& s : stones) max_id = std::max(max_id, s.id);
  log.thrown_id = max_id + 1;

  StoneState thrown;
  thrown.id = log.thrown_id;
  thrown.position = params.release_position;
  thrown.velocity = params.release_speed *
                    Vec2(std::sin(params.release_angle), -std::cos(params.release_angle));
  thrown.color = StoneColor::red;
  thrown.status = StoneStatus::moving;
  stones.push_back(thrown);

  log.steps.push_back({0.0, stones});

  const SheetSpec& sheet = initial.sheet;
  const double contact_dist = 2.0 * sheet.stone_radius;
  const int substeps = 8;
  const double h_full = dt / substeps;
  double t = 0.0;

  const auto curl_of = [&](const StoneState& s) {
    return s.id == log.thrown_id ? params.curl_sign * params.curl_rate : 0.0;
  };

  const auto advance_all = [&](double h) {
    for (auto& s : stones) {
      if (s.status != StoneStatus::moving) continue;
      const double v = s.velocity.norm();
      const double t_stop = v / params.deceleration;
      if (t_stop <= h) {
        if (t_stop > 1e-12) rk4_advance(s, t_stop, params.deceleration, curl_of(s));
        s.velocity = Vec2::Zero();
        s.status = StoneStatus::stationary;
        if (s.id == log.thrown_id && !log.stop_time) log.stop_time = t + t_stop;
      } else {
        rk4_advance(s, h, params.deceleration, curl_of(s));
      }
    }
  };

  const auto resolve_contacts = [&](double h_used) {
    for (int round = 0; round < 8; ++round) {
      bool any = false;
      for (size_t i = 0; i < stones.size() && !any; ++i) {
        if (stones[i].status != StoneStatus::moving) continue;
        for (size_t j = 0; j < stones.size() && !any; ++j) {
          if (i == j || stones[j].status == StoneStatus::out) continue;
          const Vec2 q = stones[j].position - stones[i].position;
          const double dist = q.norm();
          if (dist >= contact_dist || dist < 1e-12) continue;
          const Vec2 n = q / dist;
          const double vi_n = stones[i].velocity.dot(n);
          const double vj_n = stones[j].velocity.dot(n);
          if (vi_n - vj_n <= 0.0) continue;  // separating already
          // Roll back to the contact instant within this substep (motion is
          // effectively linear at substep scale).
          const Vec2 w = stones[i].velocity - stones[j].velocity;
          const double a = w.squaredNorm();
          double back = 0.0;
          if (a > 1e-15) {
            const double b = (-q).dot(w);  // q measured j-i; relative pos i-j = -q
            const double c = q.squaredNorm() - contact_dist * contact_dist;
            const double disc = b * b - a * c;
            if (disc > 0.0) {
              // Solve |(-q) + tau*w| = contact_dist for tau < 0 (into the past);
              // c < 0 here, so the negative root is (-b - sqrt(disc)) / a.
              back = std::clamp((-b - std::sqrt(disc)) / a, -h_used, 0.0);
            }
          }
          if (back < 0.0) {
            stones[i].position += back * stones[i].velocity;
            stones[j].position += back * stones[j].velocity;
          }
          const Vec2 q2 = stones[j].position - stones[i].position;
          const Vec2 n2 = q2.norm() > 1e-12 ? Vec2(q2 / q2.norm()) : n;
          const double ui = stones[i].velocity.dot(n2);
          const double uj = stones[j].velocity.dot(n2);
          stones[i].velocity += (uj - ui) * n2;
          stones[j].velocity += (ui - uj) * n2;
          if (stones[j].velocity.norm() > 1e-9) stones[j].status = StoneStatus::moving;
          if (stones[i].velocity.norm() < 1e-9 && stones[i].status == StoneStatus::moving) {
            stones[i].velocity = Vec2::Zero();
            stones[i].status = StoneStatus::stationary;
            if (int(stones[i].id) == log.thrown_id && !log.stop_time) log.stop_time = t;
          }
          // Replay the rolled-back time with the exchanged velocities.
          if (back < 0.0) {
            stones[i].position += -back * stones[i].velocity;
            stones[j].position += -back * stones[j].velocity;
          }
          log.collisions.push_back({t + back, stones[i].id, stones[j].id, stones[i].position});
          any = true;
        }
      }
      if (!any) break;
    }
  };

  const auto mark_out = [&]() {
    for (auto& s : stones) {
      if (s.status == StoneStatus::out) continue;
      if (std::abs(s.position.x()) > sheet.half_width() || s.position.y() < 0.0 ||
          s.position.y() > sheet.length()) {
        s.status = StoneStatus::out;
        s.velocity = Vec2::Zero();
      }
    }
  };

  const auto thrown_state = [&]() -> const StoneState& {
    for (const auto& s : stones)
      if (s.id == log.thrown_id) return s;
    return stones.back();
  };

  const double far_y = sheet.hogline_far_y();
  const double near_y = sheet.hogline_near_y();
  int guard = 0;
  const int max_steps = int(240.0 / dt) + 1;
  while (guard++ < max_steps) {
    bool any_moving = false;
    for (const auto& s : stones) any_moving |= (s.status == StoneStatus::moving);
    if (!any_moving) break;
    for (int sub = 0; sub < substeps; ++sub) {
      const double y_before = thrown_state().position.y();
      advance_all(h_full);
      t += h_full;
      resolve_contacts(h_full);
      mark_out();
      const double y_after = thrown_state().position.y();
      const auto record_cross = [&](double line_y, std::optional<double>& slot) {
        if (!slot && y_before > line_y && y_after <= line_y) {
          const double frac = (y_before - line_y) / (y_before - y_after);
          slot = t - h_full + frac * h_full;
        }
      };
      record_cross(far_y, log.far_hog_cross);
      record_cross(near_y, log.near_hog_cross);
    }
    log.steps.push_back({log.steps.size() * dt, stones});
  }
  return log;
}

}  // namespace curlvis
