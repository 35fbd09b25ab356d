#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

namespace curlvis {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Homogeneous image line a*x + b*y + c = 0, normalized so a^2 + b^2 = 1.
inline Vec3 normalized_line(const Vec3& l) {
  const double n = std::hypot(l.x(), l.y());
  return n > 0.0 ? Vec3(l / n) : l;
}

// Line through two inhomogeneous points.
inline Vec3 line_through(const Vec2& p, const Vec2& q) {
  return normalized_line(Vec3(p.x(), p.y(), 1.0).cross(Vec3(q.x(), q.y(), 1.0)));
}

// (rho, theta) polar form <-> homogeneous line. theta in [0, pi), rho signed.
inline Vec3 line_from_polar(double rho, double theta) {
  return Vec3(std::cos(theta), std::sin(theta), -rho);
}

inline void polar_from_line(const Vec3& line, double& rho, double& theta) {
  Vec3 l = normalized_line(line);
  theta = std::atan2(l.y(), l.x());
  rho = -l.z();
  if (theta < 0.0) {
    theta += M_PI;
    rho = -rho;
  }
  if (theta >= M_PI) {
    theta -= M_PI;
    rho = -rho;
  }
}

inline double point_line_distance(const Vec2& p, const Vec3& line) {
  const Vec3 l = normalized_line(line);
  return std::abs(l.x() * p.x() + l.y() * p.y() + l.z());
}

// Intersection of two homogeneous lines; empty when numerically parallel and
// the caller asked for a finite point.
inline Vec3 intersect_lines_h(const Vec3& l1, const Vec3& l2) {
  return l1.cross(l2);
}

inline std::optional<Vec2> intersect_lines(const Vec3& l1, const Vec3& l2) {
  const Vec3 p = l1.cross(l2);
  if (std::abs(p.z()) < 1e-14 * p.head<2>().norm()) return std::nullopt;
  return Vec2(p.x() / p.z(), p.y() / p.z());
}

inline std::optional<Vec2> dehomogenize(const Vec3& p) {
  if (std::abs(p.z()) < 1e-14 * (std::abs(p.x()) + std::abs(p.y()))) return std::nullopt;
  return Vec2(p.x() / p.z(), p.y() / p.z());
}

// Symmetric conic matrix from algebraic coefficients
// A x^2 + B xy + C y^2 + D x + E y + F = 0.
inline Mat3 conic_matrix(double A, double B, double C, double D, double E, double F) {
  Mat3 M;
  M << A, B / 2, D / 2, B / 2, C, E / 2, D / 2, E / 2, F;
  return M;
}

// Two distinct points spanning a homogeneous line (for line-conic intersection).
inline void points_on_line_h(const Vec3& l, Vec3& p1, Vec3& p2) {
  if (std::abs(l.x()) >= std::abs(l.y())) {
    // x = (-c - b*y)/a; pick y = 0 and point at infinity along the line.
    p1 = Vec3(-l.z() / l.x(), 0.0, 1.0);
  } else {
    p1 = Vec3(0.0, -l.z() / l.y(), 1.0);
  }
  p2 = Vec3(-l.y(), l.x(), 0.0);  // direction of the line (infinite point)
}

// Real intersections of a homogeneous line with a conic. Returns count 0/1/2.
inline int intersect_conic_line(const Mat3& C, const Vec3& l_in, Vec3 out[2]) {
  // Scale-free: the degeneracy test below compares quadratic against linear
  // terms, so the direction vector must be unit length.
  const double scale = std::hypot(l_in.x(), l_in.y());
  if (scale < 1e-300) return 0;  // line at infinity never meets an ellipse
  const Vec3 l = l_in / scale;
  Vec3 p1, p2;
  points_on_line_h(l, p1, p2);
  const double a = p2.dot(C * p2);
  const double b = p1.dot(C * p2);
  const double c = p1.dot(C * p1);
  if (std::abs(a) < 1e-15 * (std::abs(b) + std::abs(c))) {
    if (std::abs(b) < 1e-300) return 0;
    out[0] = p1 - (0.5 * c / b) * p2;
    return 1;
  }
  const double disc = b * b - a * c;
  if (disc < 0.0) return 0;
  const double s = std::sqrt(disc);
  // Citardauq form keeps both roots stable.
  const double q = -(b + std::copysign(s, b));
  if (std::abs(q) > 0.0) {
    out[0] = p1 + (q / a) * p2;
    out[1] = p1 + (c / q) * p2;
  } else {
    out[0] = p1 + ((-b + s) / a) * p2;
    out[1] = p1 + ((-b - s) / a) * p2;
  }
  return disc == 0.0 ? 1 : 2;
}

// Polar line of a point w.r.t. a conic (the chord of contact when the point
// is outside).
inline Vec3 conic_polar(const Mat3& C, const Vec3& pole) { return C * pole; }

// Sign of the quadratic form; negative means inside for an ellipse whose
// matrix is normalized with the interior negative.
inline double conic_value(const Mat3& C, const Vec3& p) { return p.dot(C * p); }

inline double deg2rad(double d) { return d * M_PI / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / M_PI; }

// Wrap angle difference into [-pi/2, pi/2) for undirected line angles.
inline double line_angle_diff(double a, double b) {
  double d = std::fmod(a - b, M_PI);
  if (d < -M_PI / 2) d += M_PI;
  if (d >= M_PI / 2) d -= M_PI;
  return d;
}

}  // namespace curlvis
