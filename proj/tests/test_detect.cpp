#include <doctest.h>

#include <algorithm>
#include <set>

#include "core/detect.hpp"
#include "core/rng.hpp"

using namespace curlvis;

namespace {

constexpr double kRhoRes = 1.0;
const double kThetaRes = deg2rad(0.5);

// Points exactly on the line (rho, theta), spaced along its direction.
std::vector<Vec2> line_points(double rho, double theta, int n, double t0, double t1) {
  const Vec2 normal(std::cos(theta), std::sin(theta));
  const Vec2 dir(-normal.y(), normal.x());
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double t = t0 + (t1 - t0) * i / double(n - 1);
    pts.push_back(rho * normal + t * dir);
  }
  return pts;
}

int brute_inliers(const std::vector<Vec2>& edges, double rho, double theta, double band) {
  const Vec3 l = line_from_polar(rho, theta);
  int n = 0;
  for (const auto& p : edges)
    if (point_line_distance(p, l) <= band) ++n;
  return n;
}

}  // namespace

TEST_CASE("voting recovers a single vertical line exactly") {
  std::vector<Vec2> edges;
  for (int y = 0; y < 200; ++y) edges.emplace_back(100.0, double(y));
  const auto lines = hough_lines(edges, kRhoRes, kThetaRes, 60);
  REQUIRE(lines.size() == 1);  // shoulders and the theta-wrap mirror are suppressed
  CHECK(lines[0].rho == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(lines[0].theta == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lines[0].score >= 200);
  CHECK(lines[0].kind == LineKind::none);
}

TEST_CASE("voting recovers two perpendicular lines as the top two") {
  std::vector<Vec2> edges;
  for (int y = 0; y < 100; ++y) edges.emplace_back(80.0, double(y));      // x = 80
  for (int x = 200; x < 350; ++x) edges.emplace_back(double(x), 120.0);   // y = 120
  const auto lines = hough_lines(edges, kRhoRes, kThetaRes, 50);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].rho == doctest::Approx(120.0).epsilon(1e-12));
  CHECK(lines[0].theta == doctest::Approx(M_PI / 2).epsilon(1e-9));
  CHECK(lines[1].rho == doctest::Approx(80.0).epsilon(1e-12));
  CHECK(lines[1].theta == doctest::Approx(0.0).epsilon(1e-12));
  for (const auto& l : lines) {
    const int brute = brute_inliers(edges, l.rho, l.theta, 1.0);
    CHECK(std::abs(l.score - brute) <= 2);
  }
}

TEST_CASE("uniform clutter stays below the score floor") {
  Rng rng(11);
  std::vector<Vec2> edges;
  for (int i = 0; i < 50; ++i) edges.emplace_back(rng.uniform(0, 200), rng.uniform(0, 200));
  // Independent check that no 40-point collinear subset exists: every line is
  // pinned by two of the points, so pair enumeration is exhaustive.
  int best = 0;
  for (size_t i = 0; i < edges.size(); ++i)
    for (size_t j = i + 1; j < edges.size(); ++j) {
      const Vec3 l = line_through(edges[i], edges[j]);
      int n = 0;
      for (const auto& p : edges)
        if (point_line_distance(p, l) <= 1.0) ++n;
      best = std::max(best, n);
    }
  REQUIRE(best < 40);
  CHECK(hough_lines(edges, kRhoRes, kThetaRes, 40).empty());
}

TEST_CASE("scores match brute-force inlier counts on bin-aligned lines") {
  // Angles on accumulator bin centers so exact collinear points vote one cell;
  // spans kept in disjoint regions so no segment crosses another's 1 px band.
  const double thetas[] = {0.0, 17 * kThetaRes, 60 * kThetaRes, 179 * kThetaRes};
  const double rhos[] = {57.0, 123.3, -88.25, 10.0};
  const double spans[][2] = {{1000, 1800}, {-1800, -1000}, {3000, 3800}, {-5000, -4200}};
  std::vector<Vec2> edges;
  for (int k = 0; k < 4; ++k) {
    const auto pts = line_points(rhos[k], thetas[k], 2000, spans[k][0], spans[k][1]);
    edges.insert(edges.end(), pts.begin(), pts.end());
  }
  const auto lines = hough_lines(edges, kRhoRes, kThetaRes, 1500);
  REQUIRE(lines.size() == 4);
  for (const auto& l : lines) {
    const int brute = brute_inliers(edges, l.rho, l.theta, 1.0);
    CHECK(std::abs(l.score - brute) <= 2);
  }
}

TEST_CASE("suppression works across the theta wrap") {
  // x = -50 exactly vertical, plus a line tilted one theta cell past the wrap:
  // their peaks are wrap-neighbours (-50, 0) <-> (+50, pi - res).
  const int n_theta = int(std::ceil(M_PI / kThetaRes));
  std::vector<Vec2> edges;
  for (int y = -150; y < 150; ++y) edges.emplace_back(-50.0, double(y));
  const auto tilted = line_points(50.0, (n_theta - 1) * kThetaRes, 200, -100.0, 100.0);
  edges.insert(edges.end(), tilted.begin(), tilted.end());
  const auto lines = hough_lines(edges, kRhoRes, kThetaRes, 100);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].rho == doctest::Approx(-50.0).epsilon(1e-12));
  CHECK(lines[0].theta == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("line polish is exact on noiseless points") {
  const double theta = 0.3, rho = 140.0;
  const auto pts = line_points(rho, theta, 200, -150.0, 150.0);
  LineCandidate coarse;
  coarse.rho = rho + 0.4;  // half-cell quantization error
  coarse.theta = theta - 0.004;
  const auto refined = refine_line(coarse, pts);
  CHECK(refined.theta == doctest::Approx(theta).epsilon(1e-9));
  CHECK(refined.rho == doctest::Approx(rho).epsilon(1e-9));
  CHECK(refined.score == 200);
  const Vec3 l = refined.line();
  for (const auto& p : pts) CHECK(point_line_distance(p, l) < 1e-9);
}

TEST_CASE("line polish under pixel noise lands well inside a tenth of a degree") {
  Rng rng(5);
  const double theta = deg2rad(74.0), rho = 310.0;
  auto pts = line_points(rho, theta, 300, -160.0, 160.0);
  const Vec2 normal(std::cos(theta), std::sin(theta));
  for (auto& p : pts) p += rng.gaussian(0.5) * normal;
  for (int i = 0; i < 40; ++i) pts.emplace_back(rng.uniform(0, 600), rng.uniform(0, 600));
  LineCandidate coarse;
  coarse.rho = rho;
  coarse.theta = theta + 0.003;
  const auto refined = refine_line(coarse, pts);
  CHECK(std::abs(refined.theta - theta) < deg2rad(0.1));
  CHECK(std::abs(refined.rho - rho) < 0.25);
  CHECK(refined.score > 250);
}

// ---------------------------------------------------------------------------

namespace {

// The three pattern lines as seen from a pose, as refined candidates.
std::vector<LineCandidate> pattern_candidates(const PoseSE3& pose, const CameraModel& cam,
                                              const SheetSpec& spec) {
  std::vector<LineCandidate> cands;
  for (const auto& line : ideal_lines(spec)) {
    if (line.kind != SheetLineKind::hogline_near && line.kind != SheetLineKind::sideline_left &&
        line.kind != SheetLineKind::sideline_right)
      continue;
    const auto rt = project_sheet_line(pose, cam.intrinsics(), line.a, line.b);
    REQUIRE(rt.has_value());
    LineCandidate c;
    c.rho = rt->first;
    c.theta = rt->second;
    c.score = 200;
    cands.push_back(c);
  }
  return cands;
}

}  // namespace

TEST_CASE("pattern lines classify under the exact prior, clutter does not") {
  const auto rig = CameraRig::standard();
  const SheetSpec spec;
  const PoseSE3 truth = rig.near_view.pose();
  auto cands = pattern_candidates(truth, rig.near_view, spec);
  REQUIRE(cands.size() == 3);
  LineCandidate clutter1;  // horizontal-ish line far from every prediction
  clutter1.rho = 790.0;
  clutter1.theta = deg2rad(89.0);
  clutter1.score = 120;
  LineCandidate clutter2;
  clutter2.rho = 640.0;
  clutter2.theta = deg2rad(40.0);
  clutter2.score = 90;
  cands.push_back(clutter1);
  cands.push_back(clutter2);

  const auto res = classify_lines(cands, truth, rig.near_view, spec);
  REQUIRE(res.ok());
  const auto& cls = res.value();
  REQUIRE(cls.hog.size() == 1);
  REQUIRE(cls.left.size() == 1);
  REQUIRE(cls.right.size() == 1);
  CHECK(cls.hog[0].kind == LineKind::hogline);
  CHECK(cls.left[0].kind == LineKind::sideline_left);
  CHECK(cls.right[0].kind == LineKind::sideline_right);
  // Union of the classes is a subset of the inputs and classes are disjoint.
  const auto key = [](const LineCandidate& c) { return std::make_pair(c.rho, c.theta); };
  std::set<std::pair<double, double>> inputs;
  for (const auto& c : cands) inputs.insert(key(c));
  std::set<std::pair<double, double>> classified;
  for (const auto* set : {&cls.hog, &cls.left, &cls.right})
    for (const auto& c : *set) {
      CHECK(inputs.count(key(c)) == 1);
      CHECK(classified.insert(key(c)).second);  // disjoint
    }
  CHECK(classified.count(key(clutter1)) == 0);
  CHECK(classified.count(key(clutter2)) == 0);
}

TEST_CASE("a five-degree yaw error in the prior still classifies correctly") {
  const auto rig = CameraRig::standard();
  const SheetSpec spec;
  const PoseSE3 truth = rig.near_view.pose();
  const auto cands = pattern_candidates(truth, rig.near_view, spec);
  const PoseSE3 prior =
      camera_pose(truth.camera_center(), deg2rad(5.0), pitch_of_pose(truth));
  // The perturbed predictions must themselves stay inside the tolerance band,
  // otherwise this scenario would be vacuous.
  ClassifyTolerances tol;
  for (const auto& line : ideal_lines(spec)) {
    if (line.kind != SheetLineKind::hogline_near && line.kind != SheetLineKind::sideline_left &&
        line.kind != SheetLineKind::sideline_right)
      continue;
    const auto t = project_sheet_line(truth, rig.near_view.intrinsics(), line.a, line.b);
    const auto p = project_sheet_line(prior, rig.near_view.intrinsics(), line.a, line.b);
    REQUIRE(t.has_value());
    REQUIRE(p.has_value());
    CHECK(std::abs(line_angle_diff(t->second, p->second)) < tol.theta_tol);
  }
  const auto res = classify_lines(cands, prior, rig.near_view, spec);
  REQUIRE(res.ok());
  CHECK(res.value().hog.size() == 1);
  CHECK(res.value().left.size() == 1);
  CHECK(res.value().right.size() == 1);
  CHECK(res.value().hog[0].rho == doctest::Approx(cands[0].rho).epsilon(1e-12));
}

TEST_CASE("a frame without the hogline reports the missing class") {
  const auto rig = CameraRig::standard();
  const SheetSpec spec;
  const PoseSE3 truth = rig.near_view.pose();
  auto cands = pattern_candidates(truth, rig.near_view, spec);
  // Drop the hogline candidate (the first pattern line in sheet order).
  cands.erase(cands.begin());
  const auto res = classify_lines(cands, truth, rig.near_view, spec);
  REQUIRE(!res.ok());
  CHECK(res.error().missing == LineKind::hogline);
}

// ---------------------------------------------------------------------------

namespace {

const Eigen::Vector3d kIce(245, 246, 250);
const Eigen::Vector3d kBlue(25, 70, 165);
const Eigen::Vector3d kRed(200, 30, 45);

ColorRaster block_raster(int n_ice, int n_blue, int n_red) {
  ColorRaster r;
  r.width = n_ice + n_blue + n_red;
  r.height = 1;
  for (int i = 0; i < n_ice; ++i) r.cells.push_back(kIce);
  for (int i = 0; i < n_blue; ++i) r.cells.push_back(kBlue);
  for (int i = 0; i < n_red; ++i) r.cells.push_back(kRed);
  return r;
}

}  // namespace

TEST_CASE("three pure colors separate with zero misclassified cells") {
  const auto raster = block_raster(150, 100, 70);
  const auto res = kmeans_segment(raster, 3, 42);
  REQUIRE(res.ok());
  const auto& km = res.value();
  for (int i = 0; i < 150; ++i) CHECK(km.labels[i] == 0);
  for (int i = 150; i < 250; ++i) CHECK(km.labels[i] == 1);
  for (int i = 250; i < 320; ++i) CHECK(km.labels[i] == 2);
  CHECK((km.centroids[0] - kIce).norm() < 1e-9);
  CHECK((km.centroids[1] - kBlue).norm() < 1e-9);
  CHECK((km.centroids[2] - kRed).norm() < 1e-9);
  CHECK(km.counts[0] == 150);
  CHECK(km.counts[1] == 100);
  CHECK(km.counts[2] == 70);
}

TEST_CASE("noisy colors agree with the generating labels above 99 percent") {
  const double min_dist = std::min({(kIce - kBlue).norm(), (kIce - kRed).norm(),
                                    (kBlue - kRed).norm()});
  const double sigma = 0.05 * min_dist;
  Rng rng(99);
  ColorRaster raster;
  raster.width = 300;
  raster.height = 3;
  std::vector<int> truth_label;
  const Eigen::Vector3d palette[3] = {kIce, kBlue, kRed};
  const int block[3] = {400, 300, 200};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < block[c]; ++i) {
      Eigen::Vector3d v = palette[c];
      for (int ch = 0; ch < 3; ++ch) v[ch] += rng.gaussian(sigma);
      raster.cells.push_back(v);
      truth_label.push_back(c);
    }
  const auto res = kmeans_segment(raster, 3, 1234);
  REQUIRE(res.ok());
  const auto& km = res.value();
  // Block sizes are ordered, so generator label c should map to cluster c.
  int agree = 0;
  for (size_t i = 0; i < truth_label.size(); ++i)
    if (km.labels[i] == truth_label[i]) ++agree;
  CHECK(agree >= int(0.99 * truth_label.size()));
}

TEST_CASE("constant and near-degenerate rasters are rejected") {
  ColorRaster flat;
  flat.width = 40;
  flat.height = 2;
  flat.cells.assign(80, kIce);
  const auto res = kmeans_segment(flat, 3, 7);
  REQUIRE(!res.ok());
  CHECK(res.error() == SegmentError::DegenerateColors);

  auto two = block_raster(50, 30, 0);
  two.width = 80;
  const auto res2 = kmeans_segment(two, 3, 7);
  REQUIRE(!res2.ok());
}

TEST_CASE("the clustering objective never increases across iterations") {
  Rng rng(3);
  ColorRaster raster;
  raster.width = 100;
  raster.height = 5;
  for (int i = 0; i < 500; ++i)
    raster.cells.push_back({rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255)});
  const auto res = kmeans_segment(raster, 4, 21);
  REQUIRE(res.ok());
  const auto& wcss = res.value().wcss_history;
  REQUIRE(wcss.size() >= 2);
  for (size_t i = 1; i < wcss.size(); ++i) CHECK(wcss[i] <= wcss[i - 1] + 1e-9 * wcss[0]);
}

TEST_CASE("masked cells stay unlabeled and do not pull centroids") {
  auto raster = block_raster(60, 40, 30);
  std::vector<uint8_t> mask(raster.cells.size(), 1);
  for (size_t i = 100; i < 130; ++i) mask[i] = 0;  // hide the red block
  const auto res = kmeans_segment(raster, 2, 5, &mask);
  REQUIRE(res.ok());
  const auto& km = res.value();
  for (size_t i = 100; i < 130; ++i) CHECK(km.labels[i] == 255);
  CHECK(km.counts[0] + km.counts[1] == 100);
  CHECK((km.centroids[0] - kIce).norm() < 1e-9);
  CHECK((km.centroids[1] - kBlue).norm() < 1e-9);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<uint8_t> disk_grid(int w, int h, Vec2 c, double r, uint8_t label) {
  std::vector<uint8_t> g(size_t(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((Vec2(x, y) - c).norm() <= r) g[size_t(y) * w + x] = label;
  return g;
}

int brute_boundary_count(const std::vector<uint8_t>& g, int w, int h, uint8_t label) {
  const auto in = [&](int x, int y) {
    return x >= 0 && x < w && y >= 0 && y < h && g[size_t(y) * w + x] == label;
  };
  int n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (in(x, y) && !(in(x + 1, y) && in(x - 1, y) && in(x, y + 1) && in(x, y - 1))) ++n;
  return n;
}

double closed_length(const Contour& c) {
  double len = 0.0;
  for (size_t i = 0; i < c.points.size(); ++i)
    len += (c.points[(i + 1) % c.points.size()] - c.points[i]).norm();
  return len;
}

}  // namespace

TEST_CASE("a filled disk yields one closed contour of the expected length") {
  const int w = 100, h = 100;
  const double r = 20.0;
  const auto grid = disk_grid(w, h, {50, 40}, r, 2);
  const auto contours = trace_contours(grid, w, h, 2);
  REQUIRE(contours.size() == 1);
  const auto& c = contours[0];
  CHECK(c.closed);
  CHECK(int(c.points.size()) == brute_boundary_count(grid, w, h, 2));
  const double len = closed_length(c);
  CHECK(len > 0.9 * M_PI * 2 * r);
  CHECK(len < 1.1 * M_PI * 2 * r);
  // Chain property: consecutive points (and the closing pair) are 8-adjacent.
  for (size_t i = 0; i < c.points.size(); ++i) {
    const Vec2 d = c.points[(i + 1) % c.points.size()] - c.points[i];
    CHECK(std::max(std::abs(d.x()), std::abs(d.y())) == doctest::Approx(1.0));
  }
  // Starts at the topmost-leftmost cell.
  for (const auto& p : c.points) {
    CHECK(p.y() >= c.points[0].y());
    if (p.y() == c.points[0].y()) CHECK(p.x() >= c.points[0].x());
  }
}

TEST_CASE("labels without the target give no contours") {
  std::vector<uint8_t> grid(900, 1);
  CHECK(trace_contours(grid, 30, 30, 2).empty());
}

TEST_CASE("two disjoint disks give two contours in scan order") {
  const int w = 120, h = 60;
  auto grid = disk_grid(w, h, {30, 30}, 12.0, 1);
  const auto second = disk_grid(w, h, {90, 20}, 9.0, 1);
  for (size_t i = 0; i < grid.size(); ++i) grid[i] |= second[i];
  const auto contours = trace_contours(grid, w, h, 1);
  REQUIRE(contours.size() == 2);
  // The second disk's top (y=11) precedes the first disk's top (y=18).
  CHECK(contours[0].points[0].y() < contours[1].points[0].y());
  CHECK(contours[0].closed);
  CHECK(contours[1].closed);
}

TEST_CASE("single cells and thin strokes still trace") {
  std::vector<uint8_t> grid(100, 0);
  grid[55] = 3;  // lone cell
  for (int x = 2; x < 8; ++x) grid[size_t(8) * 10 + x] = 4;  // 1-cell-high bar
  const auto lone = trace_contours(grid, 10, 10, 3);
  REQUIRE(lone.size() == 1);
  CHECK(lone[0].points.size() == 1);
  CHECK(lone[0].closed);
  const auto bar = trace_contours(grid, 10, 10, 4);
  REQUIRE(bar.size() == 1);
  CHECK(bar[0].closed);
  CHECK(bar[0].points.size() == 10);  // down one side and back along the other
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Vec2> ellipse_points(Vec2 c, double a, double b, double angle, int n) {
  std::vector<Vec2> pts;
  pts.reserve(n);
  Eigen::Matrix2d R;
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  for (int i = 0; i < n; ++i) {
    const double t = 2 * M_PI * i / n;
    pts.push_back(c + R * Vec2(a * std::cos(t), b * std::sin(t)));
  }
  return pts;
}

}  // namespace

TEST_CASE("ellipse parameters are recovered exactly from clean samples") {
  const Vec2 center(320, 240);
  const auto pts = ellipse_points(center, 120.0, 40.0, 0.3, 100);
  const auto res = fit_ellipse(pts);
  REQUIRE(res.ok());
  const auto& fit = res.value();
  CHECK((fit.center - center).norm() < 1e-6);
  CHECK(fit.a == doctest::Approx(120.0).epsilon(1e-8));
  CHECK(fit.b == doctest::Approx(40.0).epsilon(1e-8));
  CHECK(fit.angle == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(fit.residual < 1e-7);
  CHECK(!fit.degenerate_angle);
  // Stored conic is normalized with a positive leading coefficient.
  double norm2 = 0.0;
  for (double v : fit.conic) norm2 += v * v;
  CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.conic[0] > 0.0);
  CHECK(fit.conic[1] * fit.conic[1] - 4 * fit.conic[0] * fit.conic[2] < 0.0);
}

TEST_CASE("circles fit with equal axes and a flagged arbitrary angle") {
  const auto pts = ellipse_points({10, -20}, 75.0, 75.0, 0.0, 60);
  const auto res = fit_ellipse(pts);
  REQUIRE(res.ok());
  CHECK(res.value().a == doctest::Approx(75.0).epsilon(1e-9));
  CHECK(res.value().a - res.value().b < 1e-6 * res.value().a);
  CHECK(res.value().degenerate_angle);
}

TEST_CASE("degenerate point sets are rejected") {
  std::vector<Vec2> collinear;
  for (int i = 0; i < 6; ++i) collinear.emplace_back(3.0 * i + 1.0, -2.0 * i + 5.0);
  const auto res = fit_ellipse(collinear);
  REQUIRE(!res.ok());
  CHECK(res.error() == EllipseError::NotAnEllipse);

  const auto few = fit_ellipse(std::vector<Vec2>(collinear.begin(), collinear.begin() + 5));
  REQUIRE(!few.ok());
  CHECK(few.error() == EllipseError::TooFewPoints);
}

TEST_CASE("the fit ignores point ordering and follows rigid transforms") {
  auto pts = ellipse_points({40, 60}, 90.0, 55.0, 1.1, 64);
  const auto base = fit_ellipse(pts);
  REQUIRE(base.ok());

  auto shuffled = pts;
  std::rotate(shuffled.begin(), shuffled.begin() + 27, shuffled.end());
  std::reverse(shuffled.begin(), shuffled.begin() + 40);
  const auto reordered = fit_ellipse(shuffled);
  REQUIRE(reordered.ok());
  for (int i = 0; i < 6; ++i)
    CHECK(reordered.value().conic[i] == doctest::Approx(base.value().conic[i]).epsilon(1e-9));

  const double phi = 0.7;
  Eigen::Matrix2d R;
  R << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  const Vec2 t(13, -8);
  auto moved = pts;
  for (auto& p : moved) p = R * p + t;
  const auto mres = fit_ellipse(moved);
  REQUIRE(mres.ok());
  const auto& m = mres.value();
  CHECK((m.center - (R * base.value().center + t)).norm() < 1e-9);
  CHECK(m.a == doctest::Approx(base.value().a).epsilon(1e-9));
  CHECK(m.b == doctest::Approx(base.value().b).epsilon(1e-9));
  double want = base.value().angle + phi;
  while (want >= M_PI) want -= M_PI;
  CHECK(m.angle == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("residuals and point-to-conic distances track pixel-scale noise") {
  Rng rng(17);
  auto pts = ellipse_points({300, 260}, 110.0, 80.0, 0.5, 120);
  const Vec2 c(300, 260);
  for (auto& p : pts) {
    const Vec2 radial = (p - c).normalized();
    p += rng.gaussian(0.8) * radial;
  }
  const auto res = fit_ellipse(pts);
  REQUIRE(res.ok());
  CHECK(res.value().residual > 0.3);
  CHECK(res.value().residual < 2.0);

  const auto clean = fit_ellipse(ellipse_points({320, 240}, 120.0, 40.0, 0.0, 100));
  REQUIRE(clean.ok());
  const Mat3 C = clean.value().matrix();
  // 5 px outside the major vertex: the first-order distance is close to 5.
  const double d = conic_point_distance(C, Vec2(320 + 125, 240));
  CHECK(d > 4.3);
  CHECK(d < 5.7);
}

TEST_CASE("bow statistic separates tangent chords from noisy straight edges") {
  // Straight edge under pixel noise averages out.
  Rng rng(77);
  std::vector<Vec2> straight;
  for (int i = 0; i < 300; ++i)
    straight.push_back({-300.0 + 2.0 * i, 120.0 + rng.gaussian(1.0)});
  LineCandidate line;
  line.rho = 120.0;
  line.theta = M_PI / 2;
  CHECK(std::abs(line_bow(line, straight)) < 0.3);

  // Flattest stretch of a large circle, polished the way the pipeline would:
  // the chord fits inside the band yet bows systematically.
  const double R = 462.0;
  std::vector<Vec2> arc;
  for (double x = -52.0; x <= 52.0; x += 2.0)
    arc.push_back({x, R - std::sqrt(R * R - x * x)});
  LineCandidate coarse;
  coarse.rho = 1.0;
  coarse.theta = M_PI / 2;
  const auto chord = refine_line(coarse, arc);
  CHECK(chord.score > 35);
  CHECK(std::abs(line_bow(chord, arc)) > 0.8);
}
