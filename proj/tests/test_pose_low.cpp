#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "core/pose_low.hpp"
#include "core/rng.hpp"
#include "core/sim.hpp"

using namespace curlvis;

namespace {

LineCandidate cand(double rho, double theta) {
  LineCandidate c;
  c.rho = rho;
  c.theta = theta;
  c.score = 100;
  return c;
}

// Undistorted-pixel image of the segment a-b (ground plane) under a pose.
LineCandidate ground_segment_cand(const PoseSE3& pose, const Intrinsics& intr, const Vec2& a,
                                  const Vec2& b) {
  const auto px = [&](const Vec2& w) {
    const Vec3 c = pose.to_camera({w.x(), w.y(), 0.0});
    REQUIRE(c.z() > 0.0);
    return intr.to_pixel({c.x() / c.z(), c.y() / c.z()});
  };
  double rho, theta;
  polar_from_line(line_through(px(a), px(b)), rho, theta);
  return cand(rho, theta);
}

// World ground point expressed in the camera's ground frame (origin at the
// camera foot, y along the horizontal heading, x to the right).
Vec2 world_to_ground(const PoseSE3& pose, const Vec2& w) {
  const double psi = yaw_of_pose(pose).value();
  const Vec2 fwd(std::sin(psi), std::cos(psi));
  const Vec2 right(fwd.y(), -fwd.x());
  const Vec2 rel = w - Vec2(pose.camera_center().x(), pose.camera_center().y());
  return {rel.dot(right), rel.dot(fwd)};
}

GroundLine ground_line(const Vec2& point, const Vec2& dir) {
  GroundLine g;
  g.point = point;
  g.direction = dir.normalized();
  return g;
}

double h_error(const GroundLine& hog, const GroundLine& l, const GroundLine& r, double width) {
  const auto meet = [](const GroundLine& a, const GroundLine& b) {
    const double den = a.direction.x() * b.direction.y() - a.direction.y() * b.direction.x();
    const Vec2 rel = b.point - a.point;
    const double t = (rel.x() * b.direction.y() - rel.y() * b.direction.x()) / den;
    return Vec2(a.point + t * a.direction);
  };
  const Vec2 pl = meet(hog, l), pr = meet(hog, r);
  return std::abs(l.direction.dot(hog.direction)) + std::abs(r.direction.dot(hog.direction)) +
         std::abs((pl - pr).norm() - width);
}

}  // namespace

TEST_CASE("image lines of ground lines backproject onto them exactly") {
  const auto rig = CameraRig::standard();
  const double tilt = rig.low_view.mount_pitch();
  const double height = rig.low_view.mount_height();
  Rng rng(441);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    const PoseSE3 pose = camera_pose({rng.uniform(-1.0, 1.0), 40.0, height},
                                     M_PI + deg2rad(rng.uniform(-5.0, 5.0)), tilt);
    // A ground segment crossing the view a few meters ahead.
    const double y1 = 40.0 - rng.uniform(2.0, 8.0);
    const Vec2 a(rng.uniform(-3.0, 0.0), y1);
    const Vec2 b(rng.uniform(0.5, 3.0), y1 - rng.uniform(-1.5, 1.5));
    const auto c = ground_segment_cand(pose, rig.low_view.intrinsics(), a, b);
    const auto g = backproject_lines({c}, rig.low_view.intrinsics(), tilt, height);
    if (g.empty()) continue;  // segment projected outside the usable span
    ++checked;
    const Vec3 l = g[0].line();
    CHECK(point_line_distance(world_to_ground(pose, a), l) < 1e-6);
    CHECK(point_line_distance(world_to_ground(pose, b), l) < 1e-6);
  }
  CHECK(checked >= 30);
}

TEST_CASE("rays at or above the horizon are dropped, not backprojected") {
  const auto rig = CameraRig::standard();
  const auto& intr = rig.low_view.intrinsics();
  int dropped = 0;
  // Level camera: the optical-axis row maps to the horizon, anything above
  // never descends.
  const auto g1 = backproject_lines({cand(intr.cy, M_PI / 2)}, intr, 0.0, 0.5, &dropped);
  CHECK(g1.empty());
  CHECK(dropped == 1);
  const auto g2 = backproject_lines({cand(intr.cy / 2, M_PI / 2)}, intr, 0.0, 0.5, &dropped);
  CHECK(g2.empty());
  CHECK(dropped == 1);
  // Tilted camera: a row just below its horizon still lands.
  const double tilt = deg2rad(-15.0);
  const double horizon_row = intr.cy - intr.fy * std::tan(15.0 * M_PI / 180.0);
  const auto g3 = backproject_lines({cand(horizon_row + 60.0, M_PI / 2)}, intr, tilt, 0.5,
                                    &dropped);
  CHECK(g3.size() == 1);
  CHECK(dropped == 0);
}

TEST_CASE("a vertical centerline ahead of a level camera maps to the forward axis") {
  const auto rig = CameraRig::standard();
  const auto& intr = rig.low_view.intrinsics();
  const auto g = backproject_lines({cand(intr.cx, 0.0)}, intr, 0.0, 0.5);
  REQUIRE(g.size() == 1);
  CHECK(std::abs(g[0].point.x()) < 1e-9);
  CHECK(std::abs(std::abs(g[0].direction.y()) - 1.0) < 1e-12);
}

TEST_CASE("the H fit is exact on the true lines and finds the enumerated minimum") {
  const SheetSpec spec;
  // Lines given directly in the camera ground frame; the upright midline sits
  // 0.2 m to the camera's left, so the camera is 0.2 m left of center and the
  // rightward offset is -0.2.
  std::vector<GroundLine> lines;
  const double width = spec.width;
  lines.push_back(ground_line({0.0, 2.755}, {1.0, 0.0}));               // crossbar, 2.755 m out
  lines.push_back(ground_line({width / 2 + 0.2, 1.0}, {0.0, 1.0}));     // camera-right upright
  lines.push_back(ground_line({-width / 2 + 0.2, 0.5}, {0.0, 1.0}));    // camera-left upright
  const auto fit = fit_H(lines, width);
  REQUIRE(fit.ok());
  CHECK(fit.value().error < 1e-9);
  CHECK(fit.value().distance_to_hogline == doctest::Approx(2.755).epsilon(1e-9));
  CHECK(fit.value().lateral_offset == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK(std::abs(fit.value().yaw) < 1e-9);
  CHECK(fit.value().selected == std::array<int, 3>{0, 2, 1});

  // Random line soups: the returned triple always carries the smallest error
  // among every enumeration, recomputed here from scratch.
  Rng rng(2718);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GroundLine> soup;
    const int n = 5 + int(rng.uniform(0.0, 3.99));
    for (int i = 0; i < n; ++i) {
      const double a = rng.uniform(0.0, M_PI);
      soup.push_back(ground_line({rng.uniform(-4.0, 4.0), rng.uniform(0.5, 9.0)},
                                 {std::cos(a), std::sin(a)}));
    }
    const auto f = fit_H(soup, width);
    if (!f.ok()) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int h = 0; h < n; ++h)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          if (i == h || j == h) continue;
          const double den =
              std::abs(soup[h].direction.x() * soup[i].direction.y() -
                       soup[h].direction.y() * soup[i].direction.x());
          const double den2 =
              std::abs(soup[h].direction.x() * soup[j].direction.y() -
                       soup[h].direction.y() * soup[j].direction.x());
          if (den < 1e-9 || den2 < 1e-9) continue;
          best = std::min(best, h_error(soup[h], soup[i], soup[j], width));
        }
    CHECK(f.value().error == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("fewer than three usable lines cannot form an H") {
  const SheetSpec spec;
  std::vector<GroundLine> two = {ground_line({-2.375, 0.0}, {0.0, 1.0}),
                                 ground_line({2.375, 0.0}, {0.0, 1.0})};
  const auto f2 = fit_H(two, spec.width);
  REQUIRE(!f2.ok());
  CHECK(f2.error() == HFitError::NoTriple);
  // Three parallels never intercept.
  std::vector<GroundLine> par = two;
  par.push_back(ground_line({0.0, 0.0}, {0.0, 1.0}));
  const auto f3 = fit_H(par, spec.width);
  REQUIRE(!f3.ok());
  CHECK(f3.error() == HFitError::NoTriple);
  CHECK_THROWS_AS((void)fit_H(par, 0.0), std::invalid_argument);
}

TEST_CASE("clutter whose triples all score worse cannot move the fit") {
  const SheetSpec spec;
  std::vector<GroundLine> lines;
  lines.push_back(ground_line({0.0, 3.0}, {1.0, 0.0}));
  lines.push_back(ground_line({-2.375, 0.0}, {0.0, 1.0}));
  lines.push_back(ground_line({2.375, 0.0}, {0.0, 1.0}));
  const auto base = fit_H(lines, spec.width);
  REQUIRE(base.ok());
  // Slanted extras: far from perpendicular to anything and spaced off-width.
  lines.push_back(ground_line({1.0, 4.0}, {std::cos(0.6), std::sin(0.6)}));
  lines.push_back(ground_line({-0.5, 6.0}, {std::cos(2.2), std::sin(2.2)}));
  lines.push_back(ground_line({0.3, 1.2}, {std::cos(1.1), std::sin(1.1)}));
  const auto refit = fit_H(lines, spec.width);
  REQUIRE(refit.ok());
  CHECK(refit.value().error == base.value().error);
  CHECK(refit.value().distance_to_hogline == base.value().distance_to_hogline);
  CHECK(refit.value().lateral_offset == base.value().lateral_offset);
  CHECK(refit.value().yaw == base.value().yaw);
  CHECK(refit.value().selected == base.value().selected);
}

TEST_CASE("the full body-camera stage is exact on a noiseless frame") {
  const auto rig = CameraRig::standard();
  const SheetSpec spec;
  const double delta = deg2rad(2.0);
  const PoseSE3 truth = camera_pose({0.30, 40.0, rig.low_view.mount_height()}, M_PI + delta,
                                    rig.low_view.mount_pitch());
  Scene scene;
  scene.sheet = spec;
  const auto frame =
      render_frame(scene, rig.low_view.with_pose(truth), CameraId::low_view, NoiseConfig{}, 0.0);
  const auto res = estimate_pose_low(frame, rig.low_view, spec.width);
  REQUIRE(res.ok());
  const auto& fit = res.value().fit;
  CHECK(fit.error < 1e-9);
  CHECK(std::abs(fit.distance_to_hogline - (40.0 - spec.hogline_far_y())) < 1e-6);
  CHECK(std::abs(fit.lateral_offset - (-0.30)) < 1e-6);
  CHECK(std::abs(fit.yaw - 2.0) < 1e-6);
  // The distant house-end crossbar must have been discarded by the range
  // gate, not offered to the shape search.
  CHECK(res.value().dropped >= 1);
}

TEST_CASE("noisy frames with clutter keep the crossbar distance within five centimeters") {
  const auto rig = CameraRig::standard();
  const SheetSpec spec;
  Rng srng(5150);
  int good = 0;
  const int runs = 40;
  for (int i = 0; i < runs; ++i) {
    const double x = srng.uniform(-0.3, 0.3);
    const double delta = deg2rad(srng.uniform(-3.0, 3.0));
    const double y = spec.hogline_far_y() + 5.0;
    const PoseSE3 truth = camera_pose({x, y, rig.low_view.mount_height()}, M_PI + delta,
                                      rig.low_view.mount_pitch());
    Scene scene;
    scene.sheet = spec;
    NoiseConfig noise;
    noise.pixel_sigma = 1.0;
    noise.outlier_count = 20;
    noise.outlier_line_count = 3;
    noise.dropout_fraction = 0.05;
    noise.seed = 9000 + i;
    const auto frame =
        render_frame(scene, rig.low_view.with_pose(truth), CameraId::low_view, noise, 0.0);
    const auto res = estimate_pose_low(frame, rig.low_view, spec.width);
    if (!res.ok()) continue;
    if (std::abs(res.value().fit.distance_to_hogline - 5.0) < 0.05) ++good;
  }
  CHECK(good == runs);
}

TEST_CASE("crossbar distance decreases monotonically along a straight run") {
  const auto rig = CameraRig::standard();
  const SheetSpec spec;
  double prev = std::numeric_limits<double>::infinity();
  for (double y = 40.0; y > spec.hogline_far_y() + 0.4; y -= 0.45) {
    const PoseSE3 truth =
        camera_pose({0.0, y, rig.low_view.mount_height()}, M_PI, rig.low_view.mount_pitch());
    Scene scene;
    scene.sheet = spec;
    const auto frame = render_frame(scene, rig.low_view.with_pose(truth), CameraId::low_view,
                                    NoiseConfig{}, 0.0);
    const auto res = estimate_pose_low(frame, rig.low_view, spec.width);
    REQUIRE(res.ok());
    const double d = res.value().fit.distance_to_hogline;
    // Micrometre-level floor: at the closest pose (~0.4 m) the iterative lens
    // inversion tolerance dominates.
    CHECK(std::abs(d - (y - spec.hogline_far_y())) < 1e-5);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("the release trigger interpolates a constant-speed run to the target") {
  std::vector<TimedFit> fits;
  const double v = 2.0, d0 = 4.0, latency = 0.05, target = 0.5;
  for (int k = 0; k < 70; ++k) {
    TimedFit f;
    f.timestamp = k / 30.0;
    f.fit.distance_to_hogline = d0 - v * f.timestamp;
    fits.push_back(f);
  }
  const auto trig = release_trigger(fits, target, v, latency);
  REQUIRE(trig.ok());
  const double expected = (d0 - target) / v - latency;
  CHECK(trig.value() == doctest::Approx(expected).epsilon(1e-9));
  // Release happens one latency later; the stone leaves within 3 cm of the
  // intended point (exactly, for uniform motion).
  const double release_distance = d0 - v * (trig.value() + latency);
  CHECK(std::abs(release_distance - target) < 0.03);
}

TEST_CASE("a fit sampled exactly at the target fires immediately under zero latency") {
  std::vector<TimedFit> fits;
  for (int k = 0; k <= 10; ++k) {
    TimedFit f;
    f.timestamp = k * 0.1;
    f.fit.distance_to_hogline = 1.5 - k * 0.1;  // hits 0.5 exactly at t = 1.0
    fits.push_back(f);
  }
  const auto trig = release_trigger(fits, 0.5, 1.0, 0.0);
  REQUIRE(trig.ok());
  CHECK(trig.value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a run that stalls above the target never triggers") {
  std::vector<TimedFit> fits;
  for (int k = 0; k < 60; ++k) {
    TimedFit f;
    f.timestamp = k / 30.0;
    f.fit.distance_to_hogline = std::max(1.0, 3.0 - 1.5 * f.timestamp);
    fits.push_back(f);
  }
  const auto trig = release_trigger(fits, 0.5, 1.5, 0.05);
  REQUIRE(!trig.ok());
  CHECK(trig.error() == TriggerError::NeverTriggered);
}

TEST_CASE("the trigger compensates deceleration to a centimeter") {
  // True motion d(t) = d0 - v0 t + a t^2 / 2 (slowing approach).
  const double d0 = 3.5, v0 = 2.2, a = 0.25, latency = 0.05, target = 0.5;
  std::vector<TimedFit> fits;
  for (int k = 0; k < 80; ++k) {
    TimedFit f;
    f.timestamp = k / 30.0;
    f.fit.distance_to_hogline = d0 - v0 * f.timestamp + 0.5 * a * f.timestamp * f.timestamp;
    fits.push_back(f);
  }
  const auto trig = release_trigger(fits, target, v0, latency);
  REQUIRE(trig.ok());
  const double t_rel = trig.value() + latency;
  const double release_distance = d0 - v0 * t_rel + 0.5 * a * t_rel * t_rel;
  CHECK(std::abs(release_distance - target) < 0.01);
}

TEST_CASE("the trigger rejects malformed streams and parameters") {
  std::vector<TimedFit> fits(2);
  fits[0].timestamp = 0.1;
  fits[0].fit.distance_to_hogline = 2.0;
  fits[1].timestamp = 0.1;  // not strictly increasing
  fits[1].fit.distance_to_hogline = 1.9;
  CHECK_THROWS_AS((void)release_trigger(fits, 0.5, 2.0, 0.05), std::invalid_argument);
  fits[1].timestamp = 0.2;
  CHECK_THROWS_AS((void)release_trigger(fits, -0.5, 2.0, 0.05), std::invalid_argument);
  CHECK_THROWS_AS((void)release_trigger(fits, 0.5, 0.0, 0.05), std::invalid_argument);
  CHECK_THROWS_AS((void)release_trigger(fits, 0.5, 2.0, -0.01), std::invalid_argument);
}

TEST_CASE("a noisy tracked run releases near the intended point") {
  const auto rig = CameraRig::standard();
  const SheetSpec spec;
  Rng srng(31337);
  int good = 0;
  const int runs = 6;
  for (int i = 0; i < runs; ++i) {
    const double v = srng.uniform(1.5, 3.0);
    const double x = srng.uniform(-0.2, 0.2);
    const double delta = deg2rad(srng.uniform(-2.0, 2.0));
    const double latency = 0.05, target = 0.5, fps = 30.0;
    const double y0 = spec.hogline_far_y() + 3.5;
    std::vector<TimedFit> fits;
    for (int k = 0;; ++k) {
      const double t = k / fps;
      const double y = y0 - v * t;
      if (y < spec.hogline_far_y() + 0.3) break;
      const PoseSE3 truth = camera_pose({x, y, rig.low_view.mount_height()}, M_PI + delta,
                                        rig.low_view.mount_pitch());
      Scene scene;
      scene.sheet = spec;
      NoiseConfig noise;
      noise.pixel_sigma = 0.5;
      noise.outlier_count = 15;
      noise.outlier_line_count = 3;
      noise.dropout_fraction = 0.05;
      noise.seed = uint64_t(i) * 1000 + k;
      const auto frame =
          render_frame(scene, rig.low_view.with_pose(truth), CameraId::low_view, noise, t);
      const auto res = estimate_pose_low(frame, rig.low_view, spec.width);
      if (!res.ok()) continue;
      fits.push_back({t, res.value().fit});
    }
    const auto trig = release_trigger(fits, target, v, latency);
    REQUIRE(trig.ok());
    const double y_rel = y0 - v * (trig.value() + latency);
    if (std::abs(y_rel - spec.hogline_far_y() - target) <= 0.05) ++good;
  }
  CHECK(good == runs);
}
