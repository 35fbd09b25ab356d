#include "pose_near.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace curlvis {

const char* to_string(FourPointError e) {
  return e == FourPointError::VPInsideEllipse ? "VPInsideEllipse" : "ParallelSidelines";
}

const char* to_string(PnpError e) {
  return e == PnpError::DegenerateConfiguration ? "DegenerateConfiguration" : "SolverDivergence";
}

namespace {

std::optional<Vec2> project_nodist(const PoseSE3& pose, const Intrinsics& intr, const Vec3& w) {
  const Vec3 c = pose.to_camera(w);
  if (c.z() <= 1e-9) return std::nullopt;
  return intr.to_pixel({c.x() / c.z(), c.y() / c.z()});
}

// Assigns the unordered pair (c0, c1) to the guess pair (ga, gb) by total
// distance; returns true when c0 -> ga.
bool pair_by_guess(const Vec2& c0, const Vec2& c1, const Vec2& ga, const Vec2& gb) {
  const double straight = (c0 - ga).norm() + (c1 - gb).norm();
  const double crossed = (c0 - gb).norm() + (c1 - ga).norm();
  return straight <= crossed;
}

}  // namespace

Expected<FourPointCorrespondence, FourPointError> four_points(const LineCandidate& hogline,
                                                              const LineCandidate& left,
                                                              const LineCandidate& right,
                                                              const EllipseFit& ellipse,
                                                              const PoseSE3& prior_pose,
                                                              const Intrinsics& intr,
                                                              const SheetSpec& spec) {
  const Mat3 C = ellipse.matrix();
  const Vec3 l_left = normalized_line(left.line());
  const Vec3 l_right = normalized_line(right.line());
  const Vec3 l_hog = normalized_line(hogline.line());

  const Vec3 vp1 = intersect_lines_h(l_left, l_right);
  if (vp1.norm() < 1e-12) return FourPointError::ParallelSidelines;  // identical lines

  // Chord of contact of the tangents from vp1 (the tee-line image).
  const Vec3 t_line = conic_polar(C, vp1);
  Vec3 contacts1[2];
  if (intersect_conic_line(C, t_line, contacts1) != 2) return FourPointError::VPInsideEllipse;

  const Vec3 vp2 = intersect_lines_h(l_hog, t_line);
  if (vp2.norm() < 1e-12) return FourPointError::VPInsideEllipse;  // hogline on the t-line
  Vec3 contacts2[2];
  if (intersect_conic_line(C, conic_polar(C, vp2), contacts2) != 2)
    return FourPointError::VPInsideEllipse;

  std::array<Vec2, 4> img;
  for (int i = 0; i < 2; ++i) {
    const auto p1 = dehomogenize(contacts1[i]);
    const auto p2 = dehomogenize(contacts2[i]);
    if (!p1 || !p2) return FourPointError::VPInsideEllipse;
    img[i] = *p1;
    img[2 + i] = *p2;
  }
  if ((img[0] - img[1]).norm() < 1e-9 || (img[2] - img[3]).norm() < 1e-9)
    return FourPointError::VPInsideEllipse;

  // Order by where the prior expects each landmark.
  const auto sheet = canonical_four_points(spec);
  std::array<Vec2, 4> guess;
  for (int i = 0; i < 4; ++i) {
    const auto g = project_nodist(prior_pose, intr, {sheet[i].x(), sheet[i].y(), 0.0});
    if (!g) throw std::invalid_argument("four_points prior pose must view the house");
    guess[i] = *g;
  }
  FourPointCorrespondence corr;
  corr.sheet_points = sheet;
  const bool lr = pair_by_guess(img[0], img[1], guess[0], guess[1]);
  corr.image_points[0] = lr ? img[0] : img[1];
  corr.image_points[1] = lr ? img[1] : img[0];
  const bool nf = pair_by_guess(img[2], img[3], guess[2], guess[3]);
  corr.image_points[2] = nf ? img[2] : img[3];
  corr.image_points[3] = nf ? img[3] : img[2];
  return corr;
}

// ---------------------------------------------------------------------------

namespace {

Mat3 exp_so3(const Vec3& w) {
  const double t = w.norm();
  Mat3 K;
  K << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (t < 1e-12) return Mat3::Identity() + K;
  return Mat3::Identity() + (std::sin(t) / t) * K + ((1 - std::cos(t)) / (t * t)) * (K * K);
}

// Similarity moving the centroid to the origin, mean radius to sqrt(2).
Mat3 hartley_transform(const std::array<Vec2, 4>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= 4.0;
  double spread = 0.0;
  for (const auto& p : pts) spread += (p - mean).norm();
  spread /= 4.0;
  const double s = spread > 1e-12 ? std::sqrt(2.0) / spread : 1.0;
  Mat3 T;
  T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return T;
}

// Sum of squared reprojection errors over the four correspondences.
double reprojection_sse(const PoseSE3& pose, const FourPointCorrespondence& corr,
                        const Intrinsics& intr) {
  double sse = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec3 c = pose.to_camera({corr.sheet_points[i].x(), corr.sheet_points[i].y(), 0.0});
    if (c.z() <= 1e-9) return std::numeric_limits<double>::infinity();
    const Vec2 px = intr.to_pixel({c.x() / c.z(), c.y() / c.z()});
    sse += (px - corr.image_points[i]).squaredNorm();
  }
  return sse;
}

}  // namespace

Expected<PnpResult, PnpError> planar_pnp(const FourPointCorrespondence& corr,
                                         const Intrinsics& intr) {
  // No three image points may be (near-)collinear.
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      for (int c = b + 1; c < 4; ++c) {
        const Vec2 u = corr.image_points[b] - corr.image_points[a];
        const Vec2 v = corr.image_points[c] - corr.image_points[a];
        const double cross = u.x() * v.y() - u.y() * v.x();
        if (std::abs(cross) <= 1e-9 * u.norm() * v.norm() + 1e-18)
          return PnpError::DegenerateConfiguration;
      }

  const Mat3 Ti = hartley_transform(corr.image_points);
  const Mat3 Ts = hartley_transform(corr.sheet_points);
  Eigen::Matrix<double, 8, 9> A;
  for (int i = 0; i < 4; ++i) {
    const Vec3 X = Ts * Vec3(corr.sheet_points[i].x(), corr.sheet_points[i].y(), 1.0);
    const Vec3 x = Ti * Vec3(corr.image_points[i].x(), corr.image_points[i].y(), 1.0);
    const double u = x.x() / x.z(), v = x.y() / x.z();
    A.row(2 * i) << 0, 0, 0, -X.x(), -X.y(), -X.z(), v * X.x(), v * X.y(), v * X.z();
    A.row(2 * i + 1) << X.x(), X.y(), X.z(), 0, 0, 0, -u * X.x(), -u * X.y(), -u * X.z();
  }
  const Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(A, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 H = Ti.inverse() * Hn * Ts;

  Mat3 K;
  K << intr.fx, 0, intr.cx, 0, intr.fy, intr.cy, 0, 0, 1;
  const Mat3 M = K.inverse() * H;
  const double n1 = M.col(0).norm(), n2 = M.col(1).norm();
  if (!(n1 > 1e-12) || !(n2 > 1e-12)) return PnpError::DegenerateConfiguration;
  double lambda = 2.0 / (n1 + n2);

  Vec2 centroid = Vec2::Zero();
  for (const auto& p : corr.sheet_points) centroid += p;
  centroid /= 4.0;
  const auto build = [&](double lam) {
    Mat3 R0;
    R0.col(0) = lam * M.col(0);
    R0.col(1) = lam * M.col(1);
    R0.col(2) = R0.col(0).cross(R0.col(1));
    return std::make_pair(R0, Vec3(lam * M.col(2)));
  };
  auto [R0, t] = build(lambda);
  if ((R0 * Vec3(centroid.x(), centroid.y(), 0.0) + t).z() < 0) {
    lambda = -lambda;
    std::tie(R0, t) = build(lambda);
  }
  const Eigen::JacobiSVD<Mat3> rsvd(R0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = rsvd.matrixU() * rsvd.matrixV().transpose();
  if (R.determinant() < 0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1;
    R = rsvd.matrixU() * flip * rsvd.matrixV().transpose();
  }

  // Gauss-Newton on (rotation, translation) with backtracking so the
  // reprojection error never increases.
  PoseSE3 pose{R, t};
  double sse = reprojection_sse(pose, corr, intr);
  if (!std::isfinite(sse)) return PnpError::SolverDivergence;
  const double initial_rms = std::sqrt(sse / 4.0);
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::Matrix<double, 8, 6> J;
    Eigen::Matrix<double, 8, 1> r;
    for (int i = 0; i < 4; ++i) {
      const Vec3 Xw(corr.sheet_points[i].x(), corr.sheet_points[i].y(), 0.0);
      const Vec3 c = pose.to_camera(Xw);
      if (c.z() <= 1e-9) return PnpError::SolverDivergence;
      const Vec2 px = intr.to_pixel({c.x() / c.z(), c.y() / c.z()});
      r.segment<2>(2 * i) = px - corr.image_points[i];
      Eigen::Matrix<double, 2, 3> duv;
      duv << intr.fx / c.z(), 0, -intr.fx * c.x() / (c.z() * c.z()), 0, intr.fy / c.z(),
          -intr.fy * c.y() / (c.z() * c.z());
      const Vec3 v = pose.rotation * Xw;
      Mat3 skew;
      skew << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
      Eigen::Matrix<double, 3, 6> dc;
      dc.block<3, 3>(0, 0) = -skew;  // left perturbation exp(w) applied to R
      dc.block<3, 3>(0, 3) = Mat3::Identity();
      J.block<2, 6>(2 * i, 0) = duv * dc;
    }
    const Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
    const Eigen::Matrix<double, 6, 1> g = J.transpose() * r;
    const Eigen::Matrix<double, 6, 1> step = JtJ.ldlt().solve(-g);
    if (!step.allFinite()) return PnpError::SolverDivergence;

    double alpha = 1.0;
    PoseSE3 next = pose;
    double next_sse = sse;
    bool improved = false;
    for (int back = 0; back < 30; ++back) {
      PoseSE3 trial;
      trial.rotation = exp_so3(alpha * step.head<3>()) * pose.rotation;
      trial.translation = pose.translation + alpha * step.tail<3>();
      const double trial_sse = reprojection_sse(trial, corr, intr);
      if (trial_sse < sse) {
        next = trial;
        next_sse = trial_sse;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
    const double drop = sse - next_sse;
    pose = next;
    sse = next_sse;
    if (alpha * step.norm() < 1e-12 || drop < 1e-20) break;
  }
  if (!pose.is_orthonormal(1e-6)) return PnpError::SolverDivergence;
  return PnpResult{pose, std::sqrt(sse / 4.0), initial_rms};
}

// ---------------------------------------------------------------------------

bool pose_in_range(const PoseSE3& pose, const CameraModel& camera, const SheetSpec& spec,
                   const RangeTolerances& tol) {
  const Vec3 c = pose.camera_center();
  if (std::abs(c.z() - camera.mount_height()) > tol.height_tol) return false;
  if (std::abs(pitch_of_pose(pose) - camera.mount_pitch()) > tol.pitch_tol) return false;
  if (std::abs(c.x()) > spec.half_width() + tol.position_margin) return false;
  if (c.y() < -tol.position_margin || c.y() > spec.length() + tol.position_margin) return false;
  return true;
}

FrameFeatures undistort_frame(const ObservationFrame& frame, const CameraModel& camera) {
  FrameFeatures f;
  f.edges.reserve(frame.edge_points.size());
  for (const auto& ep : frame.edge_points) {
    const auto n = camera.undistort(ep.pixel);
    if (n.ok()) f.edges.push_back(camera.intrinsics().to_pixel(n.value()));
  }
  if (frame.color_raster) f.raster = &*frame.color_raster;
  return f;
}

namespace {

constexpr double kRegionMarginPx = 60.0;   // slack around the bounding triple
constexpr double kRefineGatePx = 6.0;      // edge points this close join the polish
constexpr double kResidualAcceptPx = 2.0;  // max RMS residual of a ring ellipse
constexpr uint64_t kSegmentationSeed = 9001;
const Eigen::Vector3d kOuterRingReference(25, 70, 165);  // painted outer-band blue

struct CellCache {
  int width = 0, height = 0;
  std::vector<std::optional<Vec2>> px;  // undistorted full-res pixel per cell
};

CellCache undistort_cells(const ColorRaster& raster, const CameraModel& camera) {
  CellCache cache;
  cache.width = raster.width;
  cache.height = raster.height;
  cache.px.resize(raster.cells.size());
  for (int y = 0; y < raster.height; ++y)
    for (int x = 0; x < raster.width; ++x) {
      const auto n = camera.undistort(raster.cell_center_px(x, y, camera.intrinsics()));
      if (n.ok())
        cache.px[size_t(y) * raster.width + x] = camera.intrinsics().to_pixel(n.value());
    }
  return cache;
}

// Drop points far from the conic and refit once; keeps bitten ring contours
// and crossing clutter from skewing the estimate.
Expected<EllipseFit, EllipseError> trimmed_fit(const std::vector<Vec2>& pts, double floor_px) {
  auto fit = fit_ellipse(pts);
  if (!fit.ok()) return fit;
  std::vector<Vec2> kept = pts;
  for (int round = 0; round < 3; ++round) {
    const double gate = std::max(2.5 * fit.value().residual, floor_px);
    std::vector<Vec2> next;
    next.reserve(kept.size());
    const Mat3 C = fit.value().matrix();
    for (const auto& p : kept)
      if (conic_point_distance(C, p) <= gate) next.push_back(p);
    if (next.size() < 6 || next.size() == kept.size()) break;
    auto refit = fit_ellipse(next);
    if (!refit.ok()) break;
    fit = refit;
    kept = std::move(next);
  }
  return fit;
}

std::optional<EllipseFit> triple_ellipse(const Vec3 bounds[3], const FrameFeatures& frame,
                                         const CameraModel& camera, const SheetSpec& spec,
                                         const CellCache& cells) {
  const auto& raster = *frame.raster;
  const Vec2 hc = spec.house_center();
  const auto hc_px = project_nodist(camera.pose(), camera.intrinsics(), {hc.x(), hc.y(), 0.0});
  if (!hc_px) return std::nullopt;
  const Vec3 hch(hc_px->x(), hc_px->y(), 1.0);
  double side[3];
  for (int i = 0; i < 3; ++i) side[i] = bounds[i].dot(hch) >= 0 ? 1.0 : -1.0;

  // Mask of raster cells on the house side of all three lines (with margin).
  std::vector<uint8_t> mask(raster.cells.size(), 0);
  int masked = 0;
  for (size_t idx = 0; idx < mask.size(); ++idx) {
    if (!cells.px[idx]) continue;
    const Vec3 p(cells.px[idx]->x(), cells.px[idx]->y(), 1.0);
    bool ok = true;
    for (int i = 0; i < 3 && ok; ++i) ok = side[i] * bounds[i].dot(p) >= -kRegionMarginPx;
    if (ok) {
      mask[idx] = 1;
      ++masked;
    }
  }
  if (masked < 50) return std::nullopt;

  const auto seg = kmeans_segment(raster, 3, kSegmentationSeed, &mask);
  if (!seg.ok()) return std::nullopt;
  int ring_cluster = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < int(seg.value().centroids.size()); ++c) {
    const double d = (seg.value().centroids[c] - kOuterRingReference).norm();
    if (d < best_d) {
      best_d = d;
      ring_cluster = c;
    }
  }
  std::vector<uint8_t> grid(raster.cells.size(), 0);
  for (size_t i = 0; i < grid.size(); ++i)
    if (seg.value().labels[i] == uint8_t(ring_cluster)) grid[i] = 1;
  const auto contours = trace_contours(grid, raster.width, raster.height, 1);
  if (contours.empty()) return std::nullopt;
  const auto& ring = *std::max_element(
      contours.begin(), contours.end(),
      [](const Contour& a, const Contour& b) { return a.points.size() < b.points.size(); });

  std::vector<Vec2> coarse_pts;
  coarse_pts.reserve(ring.points.size());
  for (const auto& cell : ring.points) {
    const size_t idx = size_t(cell.y()) * raster.width + size_t(cell.x());
    if (cells.px[idx]) coarse_pts.push_back(*cells.px[idx]);
  }
  if (coarse_pts.size() < 6) return std::nullopt;
  // Raster cells are several sensor pixels wide; keep the trim floor above
  // that quantization so clean contours survive intact.
  const double cell_px = camera.intrinsics().width / double(raster.width);
  const auto coarse = trimmed_fit(coarse_pts, cell_px);
  if (!coarse.ok()) return std::nullopt;

  std::vector<Vec2> near_edges;
  const Mat3 Cc = coarse.value().matrix();
  for (const auto& p : frame.edges)
    if (conic_point_distance(Cc, p) <= kRefineGatePx) near_edges.push_back(p);
  if (near_edges.size() >= 12) {
    const auto polished = trimmed_fit(near_edges, 0.3);
    if (polished.ok() && polished.value().residual <= kResidualAcceptPx)
      return polished.value();
  }
  if (coarse.value().residual <= kResidualAcceptPx) return coarse.value();
  return std::nullopt;
}

}  // namespace

namespace {

// Agreement between a fitted pose and the evidence that produced it. The
// four-point residual alone is nearly blind to a shifted hogline (only its
// direction enters the construction), so the pose-projected pattern is
// compared back against the candidate lines and the fitted ellipse. Sideline
// offsets are de-meaned: the physical lines may sit off the nominal width,
// which is exactly why only their vanishing point is trusted upstream.
double consistency_error(const PoseSE3& pose, const Intrinsics& intr, const SheetSpec& spec,
                         const Vec3 cand[3], const Mat3& fitted_conic, double point_rms) {
  double sse = 4.0 * point_rms * point_rms;
  int n = 4;
  const auto proj = [&](double x, double y) -> std::optional<Vec2> {
    const Vec3 c = pose.to_camera({x, y, 0.0});
    if (c.z() <= 1e-6) return std::nullopt;
    return intr.to_pixel({c.x() / c.z(), c.y() / c.z()});
  };
  for (int i = 0; i < 9; ++i) {
    const double x = spec.half_width() * (i / 4.0 - 1.0);
    if (const auto p = proj(x, spec.hogline_near_y())) {
      const double d = point_line_distance(*p, cand[0]);
      sse += d * d;
      ++n;
    }
  }
  for (int s = 1; s <= 2; ++s) {
    const double x = s == 1 ? -spec.half_width() : spec.half_width();
    std::vector<double> off;
    for (int i = 0; i < 9; ++i) {
      if (const auto p = proj(x, spec.length() * i / 8.0))
        off.push_back(cand[s].dot(Vec3(p->x(), p->y(), 1.0)));
    }
    if (off.size() < 2) continue;
    double mean = 0;
    for (double d : off) mean += d;
    mean /= double(off.size());
    for (double d : off) sse += (d - mean) * (d - mean);
    n += int(off.size());
  }
  for (int i = 0; i < 16; ++i) {
    const double a = 2 * M_PI * i / 16;
    if (const auto p = proj(spec.house_center().x() + spec.house_outer_radius * std::cos(a),
                            spec.house_center().y() + spec.house_outer_radius * std::sin(a))) {
      const double d = conic_point_distance(fitted_conic, *p);
      sse += d * d;
      ++n;
    }
  }
  return std::sqrt(sse / n);
}

}  // namespace

Expected<PoseEstimate, SelectError> select_best(const CandidateSets& sets,
                                                const FrameFeatures& frame,
                                                const CameraModel& camera, const SheetSpec& spec,
                                                const RangeTolerances& range,
                                                SelectionDetail* detail) {
  if (sets.hog.empty() || sets.left.empty() || sets.right.empty())
    throw std::invalid_argument("select_best requires non-empty candidate classes");
  if (!frame.raster) throw std::invalid_argument("select_best requires a color raster");

  const CellCache cells = undistort_cells(*frame.raster, camera);
  bool found = false;
  PoseEstimate best;
  SelectionDetail best_detail;
  for (int h = 0; h < int(sets.hog.size()); ++h)
    for (int l = 0; l < int(sets.left.size()); ++l)
      for (int r = 0; r < int(sets.right.size()); ++r) {
        TripleOutcome outcome;
        outcome.indices = {h, l, r};
        best_detail.outcomes.push_back(outcome);
        const Vec3 bounds[3] = {normalized_line(sets.hog[h].line()),
                                normalized_line(sets.left[l].line()),
                                normalized_line(sets.right[r].line())};
        const auto ellipse = triple_ellipse(bounds, frame, camera, spec, cells);
        if (!ellipse) continue;
        const auto corr = four_points(sets.hog[h], sets.left[l], sets.right[r], *ellipse,
                                      camera.pose(), camera.intrinsics(), spec);
        if (!corr.ok()) continue;
        const auto pnp = planar_pnp(corr.value(), camera.intrinsics());
        if (!pnp.ok()) continue;
        if (!pose_in_range(pnp.value().pose, camera, spec, range)) continue;
        const auto yaw = yaw_of(pnp.value().pose);
        if (!yaw.ok()) continue;
        const double err =
            consistency_error(pnp.value().pose, camera.intrinsics(), spec, bounds,
                              ellipse->matrix(), pnp.value().reprojection_error);
        best_detail.outcomes.back().feasible = true;
        best_detail.outcomes.back().reprojection_error = err;
        if (!found || err < best.reprojection_error) {
          found = true;
          best.pose = pnp.value().pose;
          best.reprojection_error = err;
          best.selected = {h, l, r};
          best.yaw = yaw.value();
          best.in_range = true;
          best_detail.ellipse = *ellipse;
          best_detail.correspondence = corr.value();
        }
      }
  if (!found) return SelectError::NoFeasibleTriple;
  if (detail) *detail = best_detail;
  return best;
}

Expected<double, PoseAngleError> yaw_of(const PoseSE3& pose) {
  const auto y = yaw_of_pose(pose);
  if (!y.ok()) return y.error();
  return rad2deg(y.value());
}

BiasCalibration bias_from_run(double lateral_offset, double run_distance) {
  if (!(run_distance > 0)) throw std::invalid_argument("bias_from_run run_distance must be > 0");
  BiasCalibration cal;
  cal.lateral_offset = lateral_offset;
  cal.run_distance = run_distance;
  cal.bias = rad2deg(std::atan(lateral_offset / run_distance));
  if (std::abs(cal.bias) >= 5.0)
    throw std::invalid_argument("bias_from_run offset implies an implausible mounting bias");
  return cal;
}

Expected<NearPoseResult, NearPoseError> estimate_pose_near(const ObservationFrame& frame,
                                                           const CameraModel& camera,
                                                           const SheetSpec& spec,
                                                           const NearPoseConfig& cfg) {
  const FrameFeatures features = undistort_frame(frame, camera);
  if (!features.raster)
    throw std::invalid_argument("estimate_pose_near requires a frame with a color raster");

  std::vector<char> claimed;
  const std::vector<LineCandidate> refined = extract_lines(features.edges, cfg.lines, &claimed);

  const auto classes = classify_lines(refined, camera.pose(), camera, spec, cfg.classify);
  if (!classes.ok()) return NearPoseError{classes.error().missing, false};

  // Detected lines cross and run near each other, so a final joint pass
  // refits each classified candidate on the full edge set with every other
  // detected line as a rival: a point only counts for the line it is nearest
  // to. This undoes the support the greedy claiming order took away near
  // intersections without letting neighbours bleed back in.
  LineClasses owned = classes.value();
  const auto repolish = [&](std::vector<LineCandidate>& own) {
    for (auto& c : own) {
      std::vector<Vec3> rivals;
      rivals.reserve(refined.size());
      for (const auto& o : refined) {
        if (std::abs(o.rho - c.rho) < 1e-12 && std::abs(o.theta - c.theta) < 1e-12) continue;
        rivals.push_back(o.line());
      }
      c = refine_line(c, features.edges, rivals, cfg.refine_band);
    }
  };
  repolish(owned.hog);
  repolish(owned.left);
  repolish(owned.right);

  // Selection only needs the raster plus the edges no line accounted for;
  // clutter lines crossing the house would otherwise leak into the ring fit.
  FrameFeatures leftover;
  leftover.raster = features.raster;
  leftover.edges.reserve(features.edges.size());
  for (size_t i = 0; i < features.edges.size(); ++i)
    if (!claimed[i]) leftover.edges.push_back(features.edges[i]);

  NearPoseResult result;
  result.classes = owned;
  result.refined = refined;
  result.candidate_count = int(refined.size());
  const auto sel =
      select_best(result.classes, leftover, camera, spec, cfg.range, &result.detail);
  if (!sel.ok()) return NearPoseError{LineKind::none, true};
  result.estimate = sel.value();
  return result;
}

}  // namespace curlvis
