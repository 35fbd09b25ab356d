#include "detect.hpp"

#include <algorithm>
#include <stdexcept>

#include "rng.hpp"

namespace curlvis {

const char* to_string(LineKind k) {
  switch (k) {
    case LineKind::hogline: return "hogline";
    case LineKind::sideline_left: return "sideline_left";
    case LineKind::sideline_right: return "sideline_right";
    case LineKind::none: return "none";
  }
  return "?";
}

const char* to_string(EllipseError e) {
  return e == EllipseError::NotAnEllipse ? "NotAnEllipse" : "TooFewPoints";
}

// ---------------------------------------------------------------------------

std::vector<LineCandidate> hough_lines(const std::vector<Vec2>& edges, double rho_res,
                                       double theta_res, int min_score) {
  if (!(rho_res > 0) || !(theta_res > 0))
    throw std::invalid_argument("hough resolutions must be > 0");
  if (edges.empty()) return {};

  double diag = 0.0;
  for (const auto& p : edges) diag = std::max(diag, p.norm());
  diag += rho_res;
  const int n_theta = std::max(1, int(std::ceil(M_PI / theta_res)));
  const int n_rho = 2 * int(std::ceil(diag / rho_res)) + 3;
  const int i_zero = n_rho / 2;  // accumulator row of rho = 0

  std::vector<double> cos_t(n_theta), sin_t(n_theta);
  for (int j = 0; j < n_theta; ++j) {
    cos_t[j] = std::cos(j * theta_res);
    sin_t[j] = std::sin(j * theta_res);
  }

  std::vector<int> acc(size_t(n_rho) * n_theta, 0);
  const auto cell = [&](int i, int j) -> int& { return acc[size_t(i) * n_theta + j]; };
  for (const auto& p : edges) {
    for (int j = 0; j < n_theta; ++j) {
      const double rho = p.x() * cos_t[j] + p.y() * sin_t[j];
      const int i = i_zero + int(std::lround(rho / rho_res));
      if (i >= 0 && i < n_rho) ++cell(i, j);
    }
  }

  // Neighbour lookup with the (rho, theta) -> (-rho, theta +- pi) wrap.
  const auto wrapped = [&](int i, int j) -> std::pair<int, int> {
    if (j < 0) return {2 * i_zero - i, j + n_theta};
    if (j >= n_theta) return {2 * i_zero - i, j - n_theta};
    return {i, j};
  };

  std::vector<LineCandidate> out;
  for (int i = 0; i < n_rho; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      const int score = cell(i, j);
      if (score < min_score || score == 0) continue;
      bool peak = true;
      for (int di = -2; di <= 2 && peak; ++di) {
        for (int dj = -2; dj <= 2 && peak; ++dj) {
          if (di == 0 && dj == 0) continue;
          const auto [ni, nj] = wrapped(i + di, j + dj);
          if (ni < 0 || ni >= n_rho) continue;
          const int other = cell(ni, nj);
          if (other > score) peak = false;
          // Plateau tie: keep only the lexicographically first cell.
          if (other == score &&
              (ni < i || (ni == i && nj < j)) && !(ni == i && nj == j))
            peak = false;
        }
      }
      if (!peak) continue;
      LineCandidate c;
      c.rho = (i - i_zero) * rho_res;
      c.theta = j * theta_res;
      c.score = score;
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), [](const LineCandidate& a, const LineCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.rho != b.rho) return a.rho < b.rho;
    return a.theta < b.theta;
  });
  return out;
}

LineCandidate refine_line(const LineCandidate& coarse, const std::vector<Vec2>& edges,
                          double band_px, int rounds) {
  return refine_line(coarse, edges, {}, band_px, rounds);
}

LineCandidate refine_line(const LineCandidate& coarse, const std::vector<Vec2>& edges,
                          const std::vector<Vec3>& rivals, double band_px, int rounds) {
  LineCandidate current = coarse;
  double band = band_px;
  for (int r = 0; r < rounds; ++r) {
    const Vec3 l = current.line();
    Vec2 mean = Vec2::Zero();
    std::vector<const Vec2*> inliers;
    for (const auto& p : edges) {
      const double d = point_line_distance(p, l);
      if (d > band) continue;
      bool owned = true;
      for (const auto& rival : rivals) owned = owned && d <= point_line_distance(p, rival);
      if (owned) {
        inliers.push_back(&p);
        mean += p;
      }
    }
    if (inliers.size() < 2) return current;
    mean /= double(inliers.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const Vec2* p : inliers) cov += (*p - mean) * (*p - mean).transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    const Vec2 normal = eig.eigenvectors().col(0);  // minor axis
    double rho = normal.dot(mean);
    double theta = std::atan2(normal.y(), normal.x());
    if (theta < 0.0) {
      theta += M_PI;
      rho = -rho;
    }
    if (theta >= M_PI) {
      theta -= M_PI;
      rho = -rho;
    }
    current.rho = rho;
    current.theta = theta;
    current.score = int(inliers.size());
    band = std::max(1.5, band / 2.0);
  }
  return current;
}

double line_bow(const LineCandidate& cand, const std::vector<Vec2>& edges, double band_px) {
  const double c = std::cos(cand.theta), s = std::sin(cand.theta);
  std::vector<std::pair<double, double>> td;  // (along-line, offset)
  for (const auto& p : edges) {
    const double d = c * p.x() + s * p.y() - cand.rho;
    if (std::abs(d) <= band_px) td.push_back({-s * p.x() + c * p.y(), d});
  }
  const size_t n3 = td.size() / 3;
  if (n3 < 2) return 0.0;
  std::sort(td.begin(), td.end());
  double lo = 0, mid = 0, hi = 0;
  for (size_t i = 0; i < n3; ++i) lo += td[i].second;
  for (size_t i = n3; i < td.size() - n3; ++i) mid += td[i].second;
  for (size_t i = td.size() - n3; i < td.size(); ++i) hi += td[i].second;
  return mid / double(td.size() - 2 * n3) - (lo + hi) / double(2 * n3);
}

std::vector<LineCandidate> extract_lines(const std::vector<Vec2>& edges,
                                         const LineExtractConfig& cfg,
                                         std::vector<char>* claimed) {
  if (claimed) claimed->assign(edges.size(), 0);
  std::vector<LineCandidate> refined;
  std::vector<Vec2> pool = edges;
  std::vector<size_t> pool_idx(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) pool_idx[i] = i;
  while (int(pool.size()) >= cfg.min_refined_score) {
    const auto peaks = hough_lines(pool, cfg.rho_res, cfg.theta_res, cfg.min_score);
    bool took = false;
    for (const auto& p : peaks) {
      const auto r = refine_line(p, pool, cfg.seed_band);
      if (r.score < cfg.min_refined_score) continue;
      if (std::abs(line_bow(r, pool)) > cfg.max_bow) continue;
      const Vec3 l = r.line();
      std::vector<Vec2> next;
      std::vector<size_t> next_idx;
      next.reserve(pool.size());
      next_idx.reserve(pool.size());
      for (size_t k = 0; k < pool.size(); ++k) {
        if (point_line_distance(pool[k], l) <= cfg.claim_band) {
          if (claimed) (*claimed)[pool_idx[k]] = 1;
        } else {
          next.push_back(pool[k]);
          next_idx.push_back(pool_idx[k]);
        }
      }
      pool = std::move(next);
      pool_idx = std::move(next_idx);
      refined.push_back(r);
      took = true;
      break;
    }
    if (!took) break;
  }
  return refined;
}

std::optional<std::pair<double, double>> project_sheet_line(const PoseSE3& pose,
                                                            const Intrinsics& intr,
                                                            const Vec2& a, const Vec2& b) {
  const auto to_px = [&](const Vec2& w) -> std::optional<Vec2> {
    const Vec3 c = pose.to_camera({w.x(), w.y(), 0.0});
    if (c.z() <= 1e-6) return std::nullopt;
    return intr.to_pixel({c.x() / c.z(), c.y() / c.z()});
  };
  // Walk toward the camera plane if an endpoint is behind it.
  Vec2 wa = a, wb = b;
  for (int i = 0; i < 20 && !to_px(wa); ++i) wa = 0.5 * (wa + wb);
  for (int i = 0; i < 20 && !to_px(wb); ++i) wb = 0.5 * (wa + wb);
  const auto pa = to_px(wa), pb = to_px(wb);
  if (!pa || !pb || (*pa - *pb).norm() < 1.0) return std::nullopt;
  double rho, theta;
  polar_from_line(line_through(*pa, *pb), rho, theta);
  return std::make_pair(rho, theta);
}

Expected<LineClasses, ClassifyError> classify_lines(const std::vector<LineCandidate>& candidates,
                                                    const PoseSE3& prior_pose,
                                                    const CameraModel& camera,
                                                    const SheetSpec& spec,
                                                    const ClassifyTolerances& tol) {
  if (!prior_pose.is_orthonormal(1e-6))
    throw std::invalid_argument("classify_lines prior pose not orthonormal");

  struct Predicted {
    LineKind kind;
    double rho, theta;
  };
  std::vector<Predicted> predicted;
  for (const auto& line : ideal_lines(spec)) {
    LineKind kind = LineKind::none;
    if (line.kind == SheetLineKind::hogline_near) kind = LineKind::hogline;
    else if (line.kind == SheetLineKind::sideline_left) kind = LineKind::sideline_left;
    else if (line.kind == SheetLineKind::sideline_right) kind = LineKind::sideline_right;
    else continue;
    if (auto rt = project_sheet_line(prior_pose, camera.intrinsics(), line.a, line.b))
      predicted.push_back({kind, rt->first, rt->second});
  }

  LineClasses classes;
  for (const auto& cand : candidates) {
    double best = 1.0;
    LineKind best_kind = LineKind::none;
    for (const auto& pred : predicted) {
      const double dtheta = line_angle_diff(cand.theta, pred.theta);
      // Both angles live in [0, pi); when they differ by more than pi/2 the
      // matching undirected form of the candidate is (-rho, theta -+ pi).
      const double flip = std::abs(cand.theta - pred.theta) > M_PI / 2 ? -1.0 : 1.0;
      const double drho = flip * cand.rho - pred.rho;
      const double d = std::max(std::abs(dtheta) / tol.theta_tol, std::abs(drho) / tol.rho_tol);
      if (d <= best) {
        best = d;
        best_kind = pred.kind;
      }
    }
    if (best_kind == LineKind::none) continue;
    LineCandidate assigned = cand;
    assigned.kind = best_kind;
    switch (best_kind) {
      case LineKind::hogline: classes.hog.push_back(assigned); break;
      case LineKind::sideline_left: classes.left.push_back(assigned); break;
      case LineKind::sideline_right: classes.right.push_back(assigned); break;
      default: break;
    }
  }
  if (classes.hog.empty()) return ClassifyError{LineKind::hogline};
  if (classes.left.empty()) return ClassifyError{LineKind::sideline_left};
  if (classes.right.empty()) return ClassifyError{LineKind::sideline_right};
  return classes;
}

// ---------------------------------------------------------------------------

Expected<KmeansResult, SegmentError> kmeans_segment(const ColorRaster& raster, int k,
                                                    uint64_t seed,
                                                    const std::vector<uint8_t>* mask) {
  if (k < 2) throw std::invalid_argument("kmeans k must be >= 2");
  if (raster.cells.empty()) throw std::invalid_argument("kmeans raster must be non-empty");
  if (mask && mask->size() != raster.cells.size())
    throw std::invalid_argument("kmeans mask size mismatch");

  std::vector<size_t> included;
  included.reserve(raster.cells.size());
  for (size_t i = 0; i < raster.cells.size(); ++i)
    if (!mask || (*mask)[i]) included.push_back(i);
  if (included.empty()) return SegmentError::DegenerateColors;

  // Count distinct colors (exact match suffices: real inputs carry noise).
  {
    std::vector<Eigen::Vector3d> distinct;
    for (size_t idx : included) {
      const auto& c = raster.cells[idx];
      bool found = false;
      for (const auto& d : distinct) found |= (d - c).norm() < 1e-12;
      if (!found) {
        distinct.push_back(c);
        if (int(distinct.size()) >= k) break;
      }
    }
    if (int(distinct.size()) < k) return SegmentError::DegenerateColors;
  }

  // Farthest-point seeding from a seeded start cell.
  Rng rng(seed);
  std::vector<Eigen::Vector3d> centroids;
  centroids.push_back(raster.cells[included[rng.integer(included.size())]]);
  while (int(centroids.size()) < k) {
    double best = -1.0;
    size_t best_idx = included[0];
    for (size_t idx : included) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids)
        nearest = std::min(nearest, (raster.cells[idx] - c).squaredNorm());
      if (nearest > best) {
        best = nearest;
        best_idx = idx;
      }
    }
    centroids.push_back(raster.cells[best_idx]);
  }

  KmeansResult result;
  result.labels.assign(raster.cells.size(), 255);
  std::vector<int> counts(k, 0);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Eigen::Vector3d> sums(k, Eigen::Vector3d::Zero());
    std::fill(counts.begin(), counts.end(), 0);
    double wcss = 0.0;
    for (size_t idx : included) {
      int best_c = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (raster.cells[idx] - centroids[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      result.labels[idx] = uint8_t(best_c);
      sums[best_c] += raster.cells[idx];
      ++counts[best_c];
      wcss += best_d;
    }
    result.wcss_history.push_back(wcss);
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // keep the seed of an empty cluster
      const Eigen::Vector3d next = sums[c] / counts[c];
      shift = std::max(shift, (next - centroids[c]).norm());
      centroids[c] = next;
    }
    if (shift < 1e-4) break;
  }

  // Relabel so cluster 0 is the largest region.
  std::vector<int> order(k);
  for (int c = 0; c < k; ++c) order[c] = c;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });
  std::vector<uint8_t> remap(k);
  for (int rank = 0; rank < k; ++rank) remap[order[rank]] = uint8_t(rank);
  for (size_t i = 0; i < result.labels.size(); ++i)
    if (result.labels[i] != 255) result.labels[i] = remap[result.labels[i]];
  result.centroids.resize(k);
  result.counts.resize(k);
  for (int c = 0; c < k; ++c) {
    result.centroids[remap[c]] = centroids[c];
    result.counts[remap[c]] = counts[c];
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

// Moore neighbourhood in clockwise order starting east.
constexpr int kMooreDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kMooreDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

}  // namespace

std::vector<Contour> trace_contours(const std::vector<uint8_t>& labels, int width, int height,
                                    uint8_t target) {
  if (width <= 0 || height <= 0 || labels.size() != size_t(width) * height)
    throw std::invalid_argument("trace_contours grid shape mismatch");
  const auto fg = [&](int x, int y) {
    return x >= 0 && x < width && y >= 0 && y < height && labels[size_t(y) * width + x] == target;
  };

  std::vector<int> component(labels.size(), -1);
  int n_components = 0;
  std::vector<std::pair<int, int>> first_cell;
  // 4-connected labeling in scan order: the first cell of each component is
  // its topmost-leftmost pixel, a valid Moore-trace start.
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!fg(x, y) || component[size_t(y) * width + x] >= 0) continue;
      const int id = n_components++;
      first_cell.emplace_back(x, y);
      stack.assign(1, {x, y});
      component[size_t(y) * width + x] = id;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        constexpr int dx4[4] = {1, -1, 0, 0};
        constexpr int dy4[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nx = cx + dx4[d], ny = cy + dy4[d];
          if (fg(nx, ny) && component[size_t(ny) * width + nx] < 0) {
            component[size_t(ny) * width + nx] = id;
            stack.emplace_back(nx, ny);
          }
        }
      }
    }
  }

  std::vector<Contour> contours;
  contours.reserve(first_cell.size());
  for (const auto& [sx, sy] : first_cell) {
    Contour contour;
    contour.points.emplace_back(sx, sy);
    // Backtrack starts west of the scan-order first pixel (always background).
    int cx = sx, cy = sy;
    int dir = 4;  // index of the backtrack cell in kMoore (west)
    const size_t guard = labels.size() * 4 + 8;
    bool closed_loop = false;
    int start_next_dir = -1;
    for (size_t step = 0; step < guard; ++step) {
      int found = -1;
      for (int i = 1; i <= 8; ++i) {
        const int d = (dir + i) % 8;
        if (fg(cx + kMooreDx[d], cy + kMooreDy[d])) {
          found = d;
          break;
        }
      }
      if (found < 0) break;  // isolated pixel
      if (cx == sx && cy == sy) {
        if (start_next_dir < 0) {
          start_next_dir = found;
        } else if (found == start_next_dir && contour.points.size() > 1) {
          closed_loop = true;  // re-entered the start moving the same way
          break;
        }
      }
      cx += kMooreDx[found];
      cy += kMooreDy[found];
      if (cx == sx && cy == sy) {
        // Re-examine the start: the loop above re-checks its exit direction.
        dir = (found + 4) % 8;
        continue;
      }
      contour.points.emplace_back(cx, cy);
      dir = (found + 4) % 8;  // new backtrack = where we came from
    }
    contour.closed = closed_loop || contour.points.size() == 1;
    // Drop duplicate revisits of the start that the trace may append.
    while (contour.points.size() > 1 &&
           (contour.points.back() - contour.points.front()).norm() < 1e-12)
      contour.points.pop_back();
    contours.push_back(std::move(contour));
  }
  return contours;
}

// ---------------------------------------------------------------------------

double conic_point_distance(const Mat3& C, const Vec2& p) {
  const Vec3 ph(p.x(), p.y(), 1.0);
  const double f = ph.dot(C * ph);
  const Vec3 grad = 2.0 * (C * ph);
  const double g = std::hypot(grad.x(), grad.y());
  return g > 1e-300 ? std::abs(f) / g : std::abs(f);
}

Expected<EllipseFit, EllipseError> fit_ellipse(const std::vector<Vec2>& points) {
  if (points.size() < 6) return EllipseError::TooFewPoints;

  // Normalize for conditioning: shift to the centroid, scale to unit spread.
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= double(points.size());
  double spread = 0.0;
  for (const auto& p : points) spread += (p - mean).norm();
  spread /= double(points.size());
  if (spread < 1e-12) return EllipseError::NotAnEllipse;
  const double s = 1.0 / spread;

  const size_t n = points.size();
  Eigen::MatrixXd D1(n, 3), D2(n, 3);
  for (size_t i = 0; i < n; ++i) {
    const double x = (points[i].x() - mean.x()) * s;
    const double y = (points[i].y() - mean.y()) * s;
    D1(long(i), 0) = x * x;
    D1(long(i), 1) = x * y;
    D1(long(i), 2) = y * y;
    D2(long(i), 0) = x;
    D2(long(i), 1) = y;
    D2(long(i), 2) = 1.0;
  }
  const Mat3 S1 = D1.transpose() * D1;
  const Mat3 S2 = D1.transpose() * D2;
  const Mat3 S3 = D2.transpose() * D2;
  const Eigen::FullPivLU<Mat3> lu(S3);
  if (!lu.isInvertible()) return EllipseError::NotAnEllipse;
  const Mat3 T = -lu.solve(S2.transpose());
  const Mat3 M0 = S1 + S2 * T;
  Mat3 M;  // inv(C1) * M0 with C1 the ellipse-constraint matrix
  M.row(0) = M0.row(2) / 2.0;
  M.row(1) = -M0.row(1);
  M.row(2) = M0.row(0) / 2.0;

  const Eigen::EigenSolver<Mat3> eig(M);
  int best = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(eig.eigenvalues()(i).imag()) > 1e-9) continue;
    const Vec3 v = eig.eigenvectors().col(i).real();
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (cond > 0.0) best = i;
  }
  if (best < 0) return EllipseError::NotAnEllipse;
  const Vec3 a1 = eig.eigenvectors().col(best).real();
  const Vec3 a2 = T * a1;

  // Denormalize: conic in original coordinates via the normalizing transform.
  const Mat3 Cn = conic_matrix(a1(0), a1(1), a1(2), a2(0), a2(1), a2(2));
  Mat3 N;
  N << s, 0, -mean.x() * s, 0, s, -mean.y() * s, 0, 0, 1;
  Mat3 C = N.transpose() * Cn * N;
  // Scale convention: unit coefficient norm, positive leading coefficient.
  Eigen::Matrix<double, 6, 1> coeffs;
  coeffs << C(0, 0), 2 * C(0, 1), C(1, 1), 2 * C(0, 2), 2 * C(1, 2), C(2, 2);
  if (coeffs(0) < 0) coeffs = -coeffs;
  const double norm = coeffs.norm();
  if (!(norm > 1e-300) || !coeffs.allFinite()) return EllipseError::NotAnEllipse;
  coeffs /= norm;
  const double A = coeffs(0), B = coeffs(1), Cc = coeffs(2), D = coeffs(3), E = coeffs(4),
               F = coeffs(5);
  if (B * B - 4 * A * Cc >= 0) return EllipseError::NotAnEllipse;

  EllipseFit fit;
  fit.conic = {A, B, Cc, D, E, F};
  const double den = B * B - 4 * A * Cc;
  fit.center = Vec2((2 * Cc * D - B * E) / den, (2 * A * E - B * D) / den);
  // Axis lengths from the quadratic form at the recentred conic.
  const double f0 = A * fit.center.x() * fit.center.x() + B * fit.center.x() * fit.center.y() +
                    Cc * fit.center.y() * fit.center.y() + D * fit.center.x() +
                    E * fit.center.y() + F;
  Eigen::Matrix2d Q;
  Q << A, B / 2, B / 2, Cc;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qe(Q);
  const double l1 = qe.eigenvalues()(0), l2 = qe.eigenvalues()(1);
  if (!(l1 > 0) || !(l2 > 0) || !(f0 < 0)) return EllipseError::NotAnEllipse;
  const double axis1 = std::sqrt(-f0 / l1);  // l1 <= l2 so axis1 is the major
  const double axis2 = std::sqrt(-f0 / l2);
  fit.a = axis1;
  fit.b = axis2;
  const Vec2 major = qe.eigenvectors().col(0);
  fit.angle = std::atan2(major.y(), major.x());
  if (fit.angle < 0) fit.angle += M_PI;
  if (fit.angle >= M_PI) fit.angle -= M_PI;
  fit.degenerate_angle = (fit.a - fit.b) <= 1e-6 * fit.a;

  const Mat3 Cm = fit.matrix();
  double ss = 0.0;
  for (const auto& p : points) {
    const double d = conic_point_distance(Cm, p);
    ss += d * d;
  }
  fit.residual = std::sqrt(ss / double(n));
  return fit;
}

}  // namespace curlvis
