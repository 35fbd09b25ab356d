#pragma once

#include "pose_near.hpp"

namespace curlvis {

// Coarse axis-aligned pixel box around one cluster of suspected stone edges.
struct BoundingBox {
  Vec2 min = Vec2::Zero();  // raw sensor px
  Vec2 max = Vec2::Zero();
  int member_hint = 0;  // expected stones inside, 0 = unknown

  bool contains(const Vec2& px, double margin = 0.0) const {
    return px.x() >= min.x() - margin && px.x() <= max.x() + margin &&
           px.y() >= min.y() - margin && px.y() <= max.y() + margin;
  }
  Vec2 center() const { return 0.5 * (min + max); }
  Vec2 size() const { return max - min; }
};

// Single-linkage clustering with linkage distance gap: points chain into one
// cluster whenever some pair sits within gap. One box per cluster, padded by
// gap/2 on every side. Throws std::invalid_argument when gap <= 0.
std::vector<BoundingBox> group_boxes(const std::vector<Vec2>& pixels, double gap);

// Everything outside the boxes, in the original order. Lets the line and
// ring stages run on edges that no suspected stone touches.
std::vector<EdgePoint> mask_boxed_edges(const std::vector<EdgePoint>& edges,
                                        const std::vector<BoundingBox>& boxes);
// Frame copy with boxed edge points removed; raster and metadata carry over.
ObservationFrame mask_boxed_edges(const ObservationFrame& frame,
                                  const std::vector<BoundingBox>& boxes);

enum class HandleColor : uint8_t { unknown, red, yellow };
const char* to_string(HandleColor c);

struct StoneDetection {
  Vec2 center = Vec2::Zero();  // sheet frame, m
  int score = 0;               // accumulator votes at the winning cell
  HandleColor color = HandleColor::unknown;
};

// Vote grid over the handle plane. Cell (ix, iy) is centered at
// origin + cell * (ix, iy); votes are plain counts.
struct PlaneAccumulator {
  Vec2 origin = Vec2::Zero();
  double cell = 0.01;
  int nx = 0, ny = 0;
  std::vector<int> votes;

  int at(int ix, int iy) const { return votes[size_t(iy) * nx + ix]; }
  int& at(int ix, int iy) { return votes[size_t(iy) * nx + ix]; }
  Vec2 center_of(int ix, int iy) const {
    return origin + cell * Vec2(double(ix), double(iy));
  }
};

// Each plane point raises every cell whose center lies radius +- cell away:
// the centers a circle of that radius through the point could have. Counting
// is associative, so the result is independent of point order and never
// decreases when points are added. The grid covers [lo, hi] inclusive.
PlaneAccumulator vote_circle_centers(const std::vector<Vec2>& plane_points, double radius,
                                     double cell, const Vec2& lo, const Vec2& hi);

struct StoneVoteConfig {
  double cell = 0.01;                // accumulator resolution, m
  double threshold_fraction = 0.35;  // of an ideal full handle ring's votes
  double edge_spacing_px = 2.0;      // front-end edge sample spacing
};

// Votes a complete, unobstructed handle ring centered at plane_point would
// cast: its projected image perimeter (the part on the sensor) divided by the
// edge sample spacing. The acceptance bar for a peak scales with this, so
// distant small rings are not held to a nearby ring's count.
double ideal_ring_votes(const CameraModel& camera, const SheetSpec& spec, const Vec2& plane_point,
                        double edge_spacing_px = 2.0);

// Handle-circle voting over one box's edge pixels: backproject to the handle
// plane, vote circle centers over the cloud's bounding region plus a stone
// radius, then repeatedly take the strongest cell. A peak at or above its
// local bar (threshold_fraction of the ideal ring votes at that spot) becomes
// a detection; either way a stone diameter around it is zeroed so weaker
// stones underneath can surface. Stops when the strongest cell falls below
// the lowest bar anywhere in the region. Colors stay unknown here.
// Throws std::invalid_argument when cell <= 0 or the pose was not accepted.
std::vector<StoneDetection> detect_stones(const std::vector<Vec2>& edge_pixels,
                                          const PoseEstimate& pose, const CameraModel& camera,
                                          const SheetSpec& spec, const StoneVoteConfig& cfg = {});

// Majority color of the raster cells under the projected handle disk;
// occluded cells show the occluder and vote neither way. Without a raster
// every detection stays unknown.
std::vector<StoneDetection> assign_colors(std::vector<StoneDetection> detections,
                                          const ColorRaster* raster, const PoseSE3& pose,
                                          const CameraModel& camera, const SheetSpec& spec);

struct StoneStageConfig {
  NearPoseConfig pose;     // both the scouting and the final pose pass
  StoneVoteConfig vote;
  double gap_px = 14.0;          // single-linkage distance for boxing
  double line_band_px = 4.0;     // scouting: edges this close to a line are pattern
  double ellipse_band_px = 4.0;  // scouting: edges this close to the ring are pattern
  int min_box_points = 4;        // smaller clusters are noise, not stones
  double max_box_px = 220.0;     // larger clusters are pattern, not stone groups
};

struct StoneStageResult {
  std::vector<BoundingBox> boxes;
  NearPoseResult pose;  // from the masked frame
  std::vector<StoneDetection> stones;
};

// Two-pass near-view stage. A scouting pose pass marks pattern edges (near an
// extracted line or the winning ring ellipse); the rest cluster into boxes.
// The definitive pose pass runs with boxed edges masked out, then each box is
// swept for handle circles with that pose and detections are colored from the
// raster. Boxes are kept even when they yield no stones.
Expected<StoneStageResult, NearPoseError> detect_stationary_stones(const ObservationFrame& frame,
                                                                   const CameraModel& camera,
                                                                   const SheetSpec& spec,
                                                                   const StoneStageConfig& cfg = {});

}  // namespace curlvis
