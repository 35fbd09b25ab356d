#pragma once

#include <string>

#include "expected.hpp"
#include "geometry.hpp"

namespace curlvis {

struct Intrinsics {
  double fx = 0, fy = 0;  // focal lengths, px
  double cx = 0, cy = 0;  // principal point, px
  int width = 0, height = 0;

  // Full horizontal field of view, radians.
  double hfov() const { return 2.0 * std::atan2(0.5 * width, fx); }
  bool contains(const Vec2& px) const {
    return px.x() >= 0.0 && px.x() < width && px.y() >= 0.0 && px.y() < height;
  }
  // Pixel <-> normalized image coordinates (no distortion).
  Vec2 to_pixel(const Vec2& n) const { return {fx * n.x() + cx, fy * n.y() + cy}; }
  Vec2 to_normalized(const Vec2& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy};
  }
};

struct Distortion {
  double k1 = 0, k2 = 0;  // radial
  double p1 = 0, p2 = 0;  // tangential

  bool is_zero() const { return k1 == 0 && k2 == 0 && p1 == 0 && p2 == 0; }
  // Forward map on normalized image coordinates.
  Vec2 apply(const Vec2& n) const {
    const double x = n.x(), y = n.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (k1 + k2 * r2);
    return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
            y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
  }
};

// Rigid transform world -> camera. Camera frame: x right, y down, z forward
// (optical axis). World frame: x right across the sheet, y down-sheet, z up.
struct PoseSE3 {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& w) const { return rotation * w + translation; }
  Vec3 camera_center() const { return -rotation.transpose() * translation; }
  Vec3 forward_axis() const { return rotation.row(2).transpose(); }
  PoseSE3 inverse() const { return {rotation.transpose(), -(rotation.transpose() * translation)}; }
  PoseSE3 compose(const PoseSE3& rhs) const {  // this ∘ rhs
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  bool is_orthonormal(double tol = 1e-9) const;
};

// Pose of a camera at `position` (sheet frame, meters) whose optical axis has
// heading `yaw` measured from +y (positive toward +x) and elevation `pitch`
// above the horizon (negative = looking down). Roll-free mounting.
PoseSE3 camera_pose(const Vec3& position, double yaw, double pitch);

// Heading of the optical axis projected to the sheet plane, from +y, radians
// in (-pi, pi]. Fails within 1e-6 of vertical.
enum class PoseAngleError { GimbalDegenerate };
Expected<double, PoseAngleError> yaw_of_pose(const PoseSE3& pose);
double pitch_of_pose(const PoseSE3& pose);

enum class CameraError {
  BehindCamera,
  NoConvergence,
  NoIntersection,
};
const char* to_string(CameraError e);

class CameraModel {
 public:
  // Validates invariants; throws std::invalid_argument naming the bad field
  // (including a distortion map that fails the grid round-trip check).
  CameraModel(Intrinsics intr, Distortion dist, PoseSE3 pose);

  const Intrinsics& intrinsics() const { return intr_; }
  const Distortion& distortion() const { return dist_; }
  const PoseSE3& pose() const { return pose_; }

  CameraModel with_pose(const PoseSE3& pose) const { return {intr_, dist_, pose}; }

  double mount_height() const { return pose_.camera_center().z(); }
  double mount_pitch() const { return pitch_of_pose(pose_); }

  Expected<Vec2, CameraError> project(const Vec3& world_point) const;
  // Pixel -> undistorted normalized image point.
  Expected<Vec2, CameraError> undistort(const Vec2& pixel) const;
  // Pixel -> intersection of the viewing ray with the plane z = plane_z.
  Expected<Vec2, CameraError> backproject_to_plane(const Vec2& pixel, double plane_z) const;
  // World ray of a pixel: origin = camera center, unit direction.
  Expected<std::pair<Vec3, Vec3>, CameraError> pixel_ray(const Vec2& pixel) const;

 private:
  Expected<Vec2, CameraError> undistort_normalized(const Vec2& distorted) const;

  Intrinsics intr_;
  Distortion dist_;
  PoseSE3 pose_;
};

struct CameraRig {
  CameraModel near_view;  // behind the house, 2 m mast, wide lens
  CameraModel far_view;   // same mast, narrow zoom lens
  CameraModel low_view;   // on the robot body, 0.5 m

  // Validates FOV ordering (near >= 100 deg, low >= near, far < near).
  CameraRig(CameraModel near_cam, CameraModel far_cam, CameraModel low_cam);

  static CameraRig standard();
};

}  // namespace curlvis
