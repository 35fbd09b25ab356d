#pragma once

#include "detect.hpp"
#include "pose_near.hpp"

namespace curlvis {

// An image line mapped onto the ice plane, expressed in the body camera's
// ground frame: origin on the ice directly under the camera, y along the
// horizontal projection of the optical axis, x to the camera's right.
struct GroundLine {
  Vec2 point = Vec2::Zero();      // m
  Vec2 direction = Vec2::UnitY(); // unit
  LineCandidate source;

  Vec3 line() const {
    return line_through(point, Vec2(point + direction));
  }
};

// Maps each detected line to the ice plane using only the pre-measured mount
// tilt and height (the running robot knows neither its heading nor its
// position). Two well-separated pixels on the candidate are cast through the
// tilted camera; lines whose rays do not descend to the ice (at or above the
// horizon) are dropped, counted in `dropped` when given.
std::vector<GroundLine> backproject_lines(const std::vector<LineCandidate>& candidates,
                                          const Intrinsics& intr, double tilt, double height,
                                          int* dropped = nullptr);

struct HWeights {
  double perpendicular_left = 1.0;
  double perpendicular_right = 1.0;
  double width = 1.0;
};

struct HShapeFit {
  GroundLine hogline, left, right;
  std::array<Vec2, 2> interceptions{};      // hogline x left, hogline x right (m)
  double error = 0.0;                       // weighted shape error, m
  double distance_to_hogline = 0.0;         // camera foot to hogline, m
  double lateral_offset = 0.0;              // from the sideline midline, + to the right
  double yaw = 0.0;                         // deg, heading vs the sidelines
  std::array<int, 3> selected{-1, -1, -1};  // winning (hog, left, right) indices
};

enum class HFitError { NoTriple };
const char* to_string(HFitError e);

// Exhaustive H-shape search over the ground lines: every choice of crossbar
// and pair of uprights is scored by how far the uprights are from
// perpendicular to the crossbar (|cos| of the meeting angle, a 1 m lever
// turns it into meters) plus how far the interception gap is from the sheet
// width handed down by the arm-up calibration. Roles within the pair follow
// the interceptions' x order. Returns the exact minimizer.
Expected<HShapeFit, HFitError> fit_H(const std::vector<GroundLine>& lines, double sheet_width,
                                     const HWeights& weights = {});

struct LowPoseConfig {
  // Lower vote floors than the house-end stage: the only structures here are
  // thin pattern lines, and even the faint across-sheet line at the far end
  // must be extracted (not merely ignored) so that its crossings with the
  // uprights are owned by a rival instead of polluting their fits.
  LineExtractConfig lines{.min_score = 20, .min_refined_score = 25};
  HWeights weights;
  double refine_band = 5.0;  // joint re-polish band after extraction
  // Ground lines farther than this are discarded before the shape search. At
  // 0.5 m lens height a pixel subtends meters of ground range past ~15 m, so
  // such lines (the house-end hogline seen across the sheet) carry no metric
  // value and would tie the shape error on clean frames.
  double max_ground_range = 15.0;
};

struct LowPoseResult {
  HShapeFit fit;
  int candidate_count = 0;  // extracted image lines
  int dropped = 0;          // rays that missed the ice or lines out of range
};

// Full body-camera stage: undistort, extract lines, map them to the ice with
// the mount tilt/height, and fit the H. The camera's mounted pose supplies
// only tilt and height; its heading and position are the unknowns.
Expected<LowPoseResult, HFitError> estimate_pose_low(const ObservationFrame& frame,
                                                     const CameraModel& camera,
                                                     double sheet_width,
                                                     const LowPoseConfig& cfg = {});

struct TimedFit {
  double timestamp = 0.0;
  HShapeFit fit;
};

enum class TriggerError { NeverTriggered };
const char* to_string(TriggerError e);

// Scans a time-ordered fit stream and returns the moment to fire the release
// signal so the stone leaves the gripper `target` meters before the hogline.
// Closing speed comes from the last two fits (the nominal speed seeds the
// first frame); the crossing time is interpolated between frames and the
// actuation latency is subtracted from it. A trigger that lands before new
// information would arrive is returned immediately; one already in the past
// fires at the current frame.
Expected<double, TriggerError> release_trigger(const std::vector<TimedFit>& fits, double target,
                                               double nominal_speed, double latency);

}  // namespace curlvis
