#include "camera.hpp"

#include <stdexcept>

namespace curlvis {

bool PoseSE3::is_orthonormal(double tol) const {
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

PoseSE3 camera_pose(const Vec3& position, double yaw, double pitch) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const Vec3 forward(sy * cp, cy * cp, sp);
  const Vec3 right(cy, -sy, 0.0);
  const Vec3 down = forward.cross(right);
  PoseSE3 pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * position;
  return pose;
}

Expected<double, PoseAngleError> yaw_of_pose(const PoseSE3& pose) {
  const Vec3 f = pose.forward_axis();
  if (std::hypot(f.x(), f.y()) < 1e-6) return PoseAngleError::GimbalDegenerate;
  double yaw = std::atan2(f.x(), f.y());
  if (yaw <= -M_PI) yaw += 2.0 * M_PI;
  return yaw;
}

double pitch_of_pose(const PoseSE3& pose) {
  const Vec3 f = pose.forward_axis();
  return std::asin(std::clamp(f.z(), -1.0, 1.0));
}

const char* to_string(CameraError e) {
  switch (e) {
    case CameraError::BehindCamera: return "BehindCamera";
    case CameraError::NoConvergence: return "NoConvergence";
    case CameraError::NoIntersection: return "NoIntersection";
  }
  return "?";
}

CameraModel::CameraModel(Intrinsics intr, Distortion dist, PoseSE3 pose)
    : intr_(intr), dist_(dist), pose_(pose) {
  if (!(intr_.fx > 0)) throw std::invalid_argument("camera intrinsics.fx must be > 0");
  if (!(intr_.fy > 0)) throw std::invalid_argument("camera intrinsics.fy must be > 0");
  if (!(intr_.width > 0 && intr_.height > 0))
    throw std::invalid_argument("camera intrinsics.width/height must be > 0");
  if (!(intr_.cx >= 0 && intr_.cx < intr_.width))
    throw std::invalid_argument("camera intrinsics.cx out of sensor");
  if (!(intr_.cy >= 0 && intr_.cy < intr_.height))
    throw std::invalid_argument("camera intrinsics.cy out of sensor");
  if (!pose_.is_orthonormal())
    throw std::invalid_argument("camera pose.rotation not orthonormal");

  // Distortion must be invertible over the sensor: round-trip a coarse grid.
  for (int gy = 0; gy <= 19; ++gy) {
    for (int gx = 0; gx <= 19; ++gx) {
      const Vec2 px(intr_.width * (gx + 0.5) / 20.0, intr_.height * (gy + 0.5) / 20.0);
      auto n = undistort(px);
      if (!n.ok()) throw std::invalid_argument("camera distortion not invertible on sensor grid");
      const Vec2 back = intr_.to_pixel(dist_.apply(*n));
      if ((back - px).norm() >= 1e-6)
        throw std::invalid_argument("camera distortion not invertible on sensor grid");
    }
  }
}

Expected<Vec2, CameraError> CameraModel::project(const Vec3& world_point) const {
  const Vec3 c = pose_.to_camera(world_point);
  if (c.z() <= 0.0) return CameraError::BehindCamera;
  const Vec2 n(c.x() / c.z(), c.y() / c.z());
  return intr_.to_pixel(dist_.apply(n));
}

Expected<Vec2, CameraError> CameraModel::undistort_normalized(const Vec2& d) const {
  if (dist_.is_zero()) return d;
  Vec2 n = d;
  for (int i = 0; i < 20; ++i) {
    const double x = n.x(), y = n.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (dist_.k1 + dist_.k2 * r2);
    const Vec2 tangential(2.0 * dist_.p1 * x * y + dist_.p2 * (r2 + 2.0 * x * x),
                          dist_.p1 * (r2 + 2.0 * y * y) + 2.0 * dist_.p2 * x * y);
    if (radial <= 0.0) return CameraError::NoConvergence;
    const Vec2 next = (d - tangential) / radial;
    const double step = (next - n).norm();
    n = next;
    if (step < 1e-9) break;
  }
  if ((dist_.apply(n) - d).norm() > 1e-8) return CameraError::NoConvergence;
  return n;
}

Expected<Vec2, CameraError> CameraModel::undistort(const Vec2& pixel) const {
  return undistort_normalized(intr_.to_normalized(pixel));
}

Expected<std::pair<Vec3, Vec3>, CameraError> CameraModel::pixel_ray(const Vec2& pixel) const {
  auto n = undistort(pixel);
  if (!n.ok()) return n.error();
  const Vec3 dir_cam(n->x(), n->y(), 1.0);
  Vec3 dir = pose_.rotation.transpose() * dir_cam;
  dir.normalize();
  return std::make_pair(pose_.camera_center(), dir);
}

Expected<Vec2, CameraError> CameraModel::backproject_to_plane(const Vec2& pixel,
                                                              double plane_z) const {
  auto ray = pixel_ray(pixel);
  if (!ray.ok()) return ray.error();
  const auto& [origin, dir] = *ray;
  if (std::abs(dir.z()) < 1e-12) return CameraError::NoIntersection;
  const double s = (plane_z - origin.z()) / dir.z();
  if (s <= 0.0) return CameraError::NoIntersection;
  return Vec2(origin.x() + s * dir.x(), origin.y() + s * dir.y());
}

CameraRig::CameraRig(CameraModel near_cam, CameraModel far_cam, CameraModel low_cam)
    : near_view(std::move(near_cam)), far_view(std::move(far_cam)), low_view(std::move(low_cam)) {
  const double near_fov = near_view.intrinsics().hfov();
  const double far_fov = far_view.intrinsics().hfov();
  const double low_fov = low_view.intrinsics().hfov();
  if (near_fov < deg2rad(100.0))
    throw std::invalid_argument("rig.near horizontal FOV must be >= 100 deg");
  if (low_fov < near_fov)
    throw std::invalid_argument("rig.low FOV must be >= rig.near FOV");
  if (far_fov >= near_fov)
    throw std::invalid_argument("rig.far FOV must be < rig.near FOV");
}

static Intrinsics intrinsics_for(double hfov_deg, int width, int height) {
  Intrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.fx = 0.5 * width / std::tan(0.5 * deg2rad(hfov_deg));
  intr.fy = intr.fx;
  intr.cx = 0.5 * width;
  intr.cy = 0.5 * height;
  return intr;
}

CameraRig CameraRig::standard() {
  CameraModel near_cam(intrinsics_for(105.0, 1280, 800), {-0.05, 0.005, 0.0003, -0.0002},
                       camera_pose({0.0, -0.5, 2.0}, 0.0, deg2rad(-35.0)));
  CameraModel far_cam(intrinsics_for(25.0, 1280, 800), {-0.12, 0.02, 0.0002, 0.0001},
                      camera_pose({0.0, -0.5, 2.0}, 0.0, deg2rad(-8.0)));
  CameraModel low_cam(intrinsics_for(120.0, 1280, 800), {-0.02, 0.0008, 0.0004, 0.0003},
                      camera_pose({0.0, 0.0, 0.5}, 0.0, deg2rad(-15.0)));
  return CameraRig(std::move(near_cam), std::move(far_cam), std::move(low_cam));
}

}  // namespace curlvis
