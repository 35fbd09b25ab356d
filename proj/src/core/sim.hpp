#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "camera.hpp"
#include "rng.hpp"
#include "sheet.hpp"

namespace curlvis {

enum class StoneColor : uint8_t { red, yellow };
enum class StoneStatus : uint8_t { stationary, moving, out };
const char* to_string(StoneColor c);
const char* to_string(StoneStatus s);

struct StoneState {
  int id = 0;
  Vec2 position = Vec2::Zero();  // sheet frame, m
  Vec2 velocity = Vec2::Zero();  // m/s
  StoneColor color = StoneColor::red;
  StoneStatus status = StoneStatus::stationary;
};

enum class CameraId : uint8_t { near_view, far_view, low_view };
const char* to_string(CameraId id);

enum class EdgeSourceKind : uint8_t {
  hogline,
  hogline_far,
  sideline_left,
  sideline_right,
  ring_contour,
  stone_handle,
  clutter,
};
const char* to_string(EdgeSourceKind k);

struct EdgePoint {
  Vec2 pixel = Vec2::Zero();  // raw (distorted) sensor coordinates
  EdgeSourceKind source = EdgeSourceKind::clutter;
  int stone_id = -1;  // valid for stone_handle only
};

// Semantic ground-truth channel accompanying the color raster.
enum class RasterLabel : uint8_t {
  ice = 0,
  ring_blue,
  ring_red,
  stone_red,
  stone_yellow,
  granite,
};

struct ColorRaster {
  int width = 0, height = 0;
  std::vector<Eigen::Vector3d> cells;   // row-major RGB, [0,255]
  std::vector<uint8_t> true_labels;     // RasterLabel; withheld from the pipeline

  const Eigen::Vector3d& at(int x, int y) const { return cells[size_t(y) * width + x]; }
  Eigen::Vector3d& at(int x, int y) { return cells[size_t(y) * width + x]; }
  // Center of a raster cell in full-resolution sensor coordinates.
  Vec2 cell_center_px(int x, int y, const Intrinsics& intr) const {
    return {(x + 0.5) * intr.width / double(width), (y + 0.5) * intr.height / double(height)};
  }
};

struct NoiseConfig {
  double pixel_sigma = 0.0;
  int outlier_count = 0;
  int outlier_line_count = 0;
  double dropout_fraction = 0.0;
  uint64_t seed = 0;
};

struct ThrowParams {
  double release_speed = 2.5;   // m/s
  double release_angle = 0.0;   // rad from straight down-sheet (toward -y), + toward +x
  int curl_sign = +1;
  double deceleration = 0.12;   // m/s^2 along the path
  double curl_rate = 0.0;       // m/s^2 lateral
  Vec2 release_position{0.0, 35.245};  // just up-sheet of the far hogline
};

struct Scene {
  SheetSpec sheet;
  std::vector<StoneState> stones;
  // The painted sidelines may deviate from the ideal positions (fraction of
  // width allowed by the spec); pose estimation must not trust them metrically.
  double sideline_shift_left = 0.0;   // +x displacement of the left line, m
  double sideline_shift_right = 0.0;

  double sideline_left_x() const { return -sheet.half_width() + sideline_shift_left; }
  double sideline_right_x() const { return sheet.half_width() + sideline_shift_right; }
  const StoneState* stone_by_id(int id) const;
};

struct ObservationFrame {
  CameraId camera_id = CameraId::near_view;
  double timestamp = 0.0;
  std::vector<EdgePoint> edge_points;
  std::optional<ColorRaster> color_raster;
  PoseSE3 true_pose;  // ground truth for tests; the pipeline must not read it
};

struct RenderOptions {
  bool pattern_lines = true;  // near hogline + both sidelines
  bool far_hogline = false;   // delivery-end hogline, seen by the body camera
  bool ring = true;           // outer house circle contour
  bool stones = true;         // handle circles
  bool raster = false;
  int raster_width = 320, raster_height = 200;
  double arc_px = 2.0;                 // target sample spacing along curves
  double min_handle_visibility = 0.3;  // fraction of handle arc always emitted
};

RenderOptions default_render_options(CameraId id);

ObservationFrame render_frame(const Scene& scene, const CameraModel& camera, CameraId camera_id,
                              const NoiseConfig& noise, double timestamp,
                              const RenderOptions& options);

inline ObservationFrame render_frame(const Scene& scene, const CameraModel& camera,
                                     CameraId camera_id, const NoiseConfig& noise,
                                     double timestamp) {
  return render_frame(scene, camera, camera_id, noise, timestamp,
                      default_render_options(camera_id));
}

// ---------------------------------------------------------------------------
// Throw simulation

struct CollisionEvent {
  double t = 0.0;
  int moving_id = -1;
  int struck_id = -1;
  Vec2 position = Vec2::Zero();  // of the moving stone at contact
};

struct ThrowStep {
  double t = 0.0;
  std::vector<StoneState> stones;
};

struct ThrowLog {
  std::vector<ThrowStep> steps;  // step k at t = k*dt, step 0 = release instant
  int thrown_id = -1;
  std::vector<CollisionEvent> collisions;
  std::optional<double> stop_time;          // thrown stone at rest
  std::optional<double> far_hog_cross;      // thrown stone passes the far hogline
  std::optional<double> near_hog_cross;     // ... and the near one
  std::optional<double> true_hog_to_hog() const {
    if (far_hog_cross && near_hog_cross) return *near_hog_cross - *far_hog_cross;
    return std::nullopt;
  }
  std::vector<std::pair<double, StoneState>> thrown_trajectory() const;
};

// Integrates the thrown stone (id = max existing id + 1) through the scene:
// linear speed decay, constant lateral curl, equal-mass elastic contacts with
// other stones, out-of-sheet marking. Steps recorded every dt until all stones
// are at rest or out.
ThrowLog simulate_throw(const Scene& initial, const ThrowParams& params, double dt);

// Scene snapshot at step k of a log (stone list replaces the initial one).
Scene scene_at_step(const Scene& initial, const ThrowLog& log, size_t step_index);

}  // namespace curlvis
