#pragma once

#include "detect.hpp"

namespace curlvis {

// Candidate pools per class, straight from line classification.
using CandidateSets = LineClasses;

// The two sideline-tangency contacts and the two hogline-direction tangency
// contacts on the outer house circle, paired with their sheet positions.
struct FourPointCorrespondence {
  std::array<Vec2, 4> image_points;  // [left, right, near, far], undistorted px
  std::array<Vec2, 4> sheet_points;  // canonical circle landmarks, m
};

enum class FourPointError { VPInsideEllipse, ParallelSidelines };
const char* to_string(FourPointError e);

// Fig-4-style construction: the sideline vanishing point's polar w.r.t. the
// ellipse is the tee-line image; its conic intersections are the left/right
// contacts. The hogline meets that polar in the cross-sheet vanishing point,
// whose polar yields the near/far contacts. Works in homogeneous coordinates,
// so parallel sidelines (vanishing point at infinity) need no special case.
// The prior pose only disambiguates the left/right and near/far orderings.
Expected<FourPointCorrespondence, FourPointError> four_points(const LineCandidate& hogline,
                                                              const LineCandidate& left,
                                                              const LineCandidate& right,
                                                              const EllipseFit& ellipse,
                                                              const PoseSE3& prior_pose,
                                                              const Intrinsics& intr,
                                                              const SheetSpec& spec);

enum class PnpError { DegenerateConfiguration, SolverDivergence };
const char* to_string(PnpError e);

struct PnpResult {
  PoseSE3 pose;
  double reprojection_error = 0.0;  // RMS px over the correspondences
  double initial_error = 0.0;       // RMS px of the homography seed pose
};

// Pose from four coplanar correspondences: normalized homography DLT, planar
// decomposition with column orthonormalization, then line-searched
// Gauss-Newton on the six pose parameters. Image points are undistorted
// pixel coordinates.
Expected<PnpResult, PnpError> planar_pnp(const FourPointCorrespondence& corr,
                                         const Intrinsics& intr);

// Acceptance window around the rig mounting for an estimated pose.
struct RangeTolerances {
  double height_tol = 0.3;            // m around the mount height
  double pitch_tol = deg2rad(10.0);   // rad around the mount pitch
  double position_margin = 3.0;       // m beyond the sheet boundary
};

bool pose_in_range(const PoseSE3& pose, const CameraModel& camera, const SheetSpec& spec,
                   const RangeTolerances& tol = {});

struct PoseEstimate {
  PoseSE3 pose;
  double reprojection_error = 0.0;
  std::array<int, 3> selected{-1, -1, -1};  // winning (h, l, r) indices
  double yaw = 0.0;                         // deg
  bool in_range = false;
};

// Frame features in undistorted pixel space plus the color raster view.
struct FrameFeatures {
  std::vector<Vec2> edges;                // undistorted px
  const ColorRaster* raster = nullptr;    // borrowed from the frame
};

// Undistorts every edge point (dropping the few that do not invert) and
// exposes the raster; the result borrows the frame's raster storage.
FrameFeatures undistort_frame(const ObservationFrame& frame, const CameraModel& camera);

enum class SelectError { NoFeasibleTriple };

// Per-triple audit record of the selection loop.
struct TripleOutcome {
  std::array<int, 3> indices{-1, -1, -1};
  bool feasible = false;
  double reprojection_error = 0.0;  // valid when feasible
};

// Winning-triple internals, for reports and debugging.
struct SelectionDetail {
  EllipseFit ellipse;
  FourPointCorrespondence correspondence;
  std::vector<TripleOutcome> outcomes;  // one per enumerated triple
};

// Exhaustive scan of hogline x left x right triples. Each triple bounds a
// segmentation region; the ring contour inside it is fitted to an ellipse
// (polished on nearby edge points), the four-point construction and planar
// PnP produce a pose, and the minimum-reprojection-error pose inside the
// acceptance range wins. Ties keep the first triple in (h, l, r) order.
Expected<PoseEstimate, SelectError> select_best(const CandidateSets& sets,
                                                const FrameFeatures& frame,
                                                const CameraModel& camera, const SheetSpec& spec,
                                                const RangeTolerances& range = {},
                                                SelectionDetail* detail = nullptr);

// Heading of a pose in degrees, (-180, 180], measured from straight
// down-sheet.
Expected<double, PoseAngleError> yaw_of(const PoseSE3& pose);

struct BiasCalibration {
  double bias = 0.0;            // deg
  double run_distance = 0.0;    // m
  double lateral_offset = 0.0;  // m
};

// Mounting-bias angle implied by the lateral drift of a straight test run.
BiasCalibration bias_from_run(double lateral_offset, double run_distance);

struct NearPoseConfig {
  LineExtractConfig lines;
  double refine_band = 5.0;  // joint re-polish band after classification
  ClassifyTolerances classify;
  RangeTolerances range;
};

struct NearPoseResult {
  PoseEstimate estimate;
  CandidateSets classes;               // refined + classified candidates fed to selection
  SelectionDetail detail;              // winning ellipse and correspondence
  std::vector<LineCandidate> refined;  // every extracted line, classified or not
  int candidate_count = 0;             // refined.size(), kept for reports
};

struct NearPoseError {
  LineKind missing = LineKind::none;  // set when a class stayed empty
  bool no_feasible_triple = false;
};

// Full near-view stage: undistort, vote lines, polish, classify against the
// mount prior, then pick the best candidate triple.
Expected<NearPoseResult, NearPoseError> estimate_pose_near(const ObservationFrame& frame,
                                                           const CameraModel& camera,
                                                           const SheetSpec& spec,
                                                           const NearPoseConfig& cfg = {});

}  // namespace curlvis
