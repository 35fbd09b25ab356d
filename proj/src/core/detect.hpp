#pragma once

#include <array>
#include <vector>

#include "camera.hpp"
#include "expected.hpp"
#include "geometry.hpp"
#include "sheet.hpp"
#include "sim.hpp"

namespace curlvis {

// ---------------------------------------------------------------------------
// Line voting

enum class LineKind : uint8_t { hogline, sideline_left, sideline_right, none };
const char* to_string(LineKind k);

struct LineCandidate {
  double rho = 0.0;    // signed normal distance, px
  double theta = 0.0;  // [0, pi)
  int score = 0;       // votes / inliers
  LineKind kind = LineKind::none;

  Vec3 line() const { return line_from_polar(rho, theta); }
};

// Standard (rho, theta) accumulator; local maxima above min_score with +-2
// cell non-max suppression (theta axis wraps with the rho sign flip), sorted
// by score descending.
std::vector<LineCandidate> hough_lines(const std::vector<Vec2>& edges, double rho_res,
                                       double theta_res, int min_score);

// Total-least-squares polish of a coarse candidate on its inlier band,
// shrinking the band each round. Score becomes the final inlier count.
LineCandidate refine_line(const LineCandidate& coarse, const std::vector<Vec2>& edges,
                          double band_px = 5.0, int rounds = 3);

// Same, but an edge point only counts when this line is at least as close to
// it as every rival line. Crossing lines otherwise leak points into each
// other's bands near the intersection and skew the fit.
LineCandidate refine_line(const LineCandidate& coarse, const std::vector<Vec2>& edges,
                          const std::vector<Vec3>& rivals, double band_px = 5.0, int rounds = 3);

// Bow of the inlier set about the line: mean perpendicular offset of the
// middle third (ordered along the line) minus the outer thirds. Straight
// edges average to ~0 regardless of noise; a tangent chord clipped from a
// curve bows systematically and can be rejected on it.
double line_bow(const LineCandidate& cand, const std::vector<Vec2>& edges, double band_px = 1.5);

struct LineExtractConfig {
  // Pixel noise smears votes across rho bins, so the bins are 2 px wide and
  // the floor sits above the strongest curved-arc response while still
  // catching short segments under heavy smear.
  double rho_res = 2.0;
  double theta_res = deg2rad(0.5);
  int min_score = 25;
  // First-fit band, sized to the accumulator quantization (about 2.3 px at
  // the image edge). A wider seed band lets two lines crossing at a shallow
  // angle pull the fit onto their bisector, which then masquerades as one
  // strong line; a tight seed falls into the nearest line's basin instead.
  double seed_band = 2.5;
  // Floor on inliers after the final fit; curved arcs that sneak past the
  // coarse vote floor as tangent chords are caught by the bow veto instead,
  // since the flat top of a house-sized ellipse bows ~1.3 px across its
  // chord while a straight edge stays near zero even under pixel noise.
  int min_refined_score = 35;
  double max_bow = 0.5;
  double claim_band = 1.5;  // support erased around an accepted line
};

// Iterative extraction with erasure: vote, polish the strongest acceptable
// peak, take its support out of the pool, and vote again. A single shared
// accumulator lets strong structures smear ridge artifacts that outrank
// weaker true peaks and seed fits wedged between parallel neighbours; a
// fresh vote after each erasure keeps every remaining peak honest. When
// `claimed` is given it is resized to the edge count and marks the points
// absorbed by accepted lines.
std::vector<LineCandidate> extract_lines(const std::vector<Vec2>& edges,
                                         const LineExtractConfig& cfg = {},
                                         std::vector<char>* claimed = nullptr);

struct ClassifyTolerances {
  double theta_tol = deg2rad(10.0);
  double rho_tol = 80.0;  // px
};

struct LineClasses {
  std::vector<LineCandidate> hog, left, right;
};

struct ClassifyError {
  LineKind missing = LineKind::none;  // the class that stayed empty
};

// Projects the ideal hogline/sidelines with the prior pose (undistorted pixel
// space) and assigns each candidate to the nearest predicted class within the
// tolerances; everything else stays unclassified.
Expected<LineClasses, ClassifyError> classify_lines(const std::vector<LineCandidate>& candidates,
                                                    const PoseSE3& prior_pose,
                                                    const CameraModel& camera,
                                                    const SheetSpec& spec,
                                                    const ClassifyTolerances& tol = {});

// Predicted (rho, theta) of one ideal sheet line under a pose; empty when the
// line is not in front of the camera.
std::optional<std::pair<double, double>> project_sheet_line(const PoseSE3& pose,
                                                            const Intrinsics& intr,
                                                            const Vec2& a, const Vec2& b);

// ---------------------------------------------------------------------------
// Color segmentation

struct KmeansResult {
  std::vector<uint8_t> labels;  // per cell; 255 = excluded by mask
  std::vector<Eigen::Vector3d> centroids;
  std::vector<int> counts;
  std::vector<double> wcss_history;  // within-cluster sum of squares per iteration
};

enum class SegmentError { DegenerateColors };

// Lloyd's algorithm with deterministic farthest-point seeding. Labels are
// remapped so cluster 0 is the largest region. An optional mask (nonzero =
// include) restricts the segmented region.
Expected<KmeansResult, SegmentError> kmeans_segment(const ColorRaster& raster, int k,
                                                    uint64_t seed,
                                                    const std::vector<uint8_t>* mask = nullptr);

// ---------------------------------------------------------------------------
// Contours

struct Contour {
  std::vector<Vec2> points;  // ordered cell coordinates
  bool closed = false;
};

// Outer borders of 4-connected components carrying the target label
// (Moore-neighbour tracing).
std::vector<Contour> trace_contours(const std::vector<uint8_t>& labels, int width, int height,
                                    uint8_t target);

// ---------------------------------------------------------------------------
// Ellipse fitting

struct EllipseFit {
  Vec2 center = Vec2::Zero();      // px
  double a = 0.0, b = 0.0;         // semi-axes, a >= b
  double angle = 0.0;              // rad, major axis vs +x
  double residual = 0.0;           // RMS geometric px
  std::array<double, 6> conic{};   // A,B,C,D,E,F with |coeffs| = 1, A > 0
  bool degenerate_angle = false;   // circle: angle is arbitrary

  Mat3 matrix() const {
    return conic_matrix(conic[0], conic[1], conic[2], conic[3], conic[4], conic[5]);
  }
};

enum class EllipseError { NotAnEllipse, TooFewPoints };
const char* to_string(EllipseError e);

// Direct least-squares conic fit constrained to an ellipse (eigenvalue
// formulation, numerically stabilised by point normalization).
Expected<EllipseFit, EllipseError> fit_ellipse(const std::vector<Vec2>& points);

// Approximate geometric distance |F(p)| / |grad F(p)| of a point to a conic.
double conic_point_distance(const Mat3& C, const Vec2& p);

}  // namespace curlvis
