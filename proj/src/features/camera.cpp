#include "trajverb/features/camera.hpp"

#include <cmath>
#include <numbers>

namespace trajverb::features {

void Camera::validate() const {
  if (!position.allFinite() || !look_at.allFinite() || !up.allFinite()) {
    throw ConfigError("camera", "non-finite vector");
  }
  if ((position - look_at).norm() < 1e-9) {
    throw ConfigError("camera.look_at", "must differ from camera.position");
  }
  if (forward().cross(up).norm() < 1e-9) throw ConfigError("camera.up", "parallel to view direction");
  if (!(vertical_fov_deg > 10.0 && vertical_fov_deg < 120.0)) {
    throw ConfigError("camera.vertical_fov", "must lie in (10, 120) degrees");
  }
  if (image_width < 1 || image_height < 1) throw ConfigError("camera.image_width", "must be >= 1");
}

double Camera::focal_pixels() const {
  const double half = vertical_fov_deg * std::numbers::pi / 360.0;
  return 0.5 * image_height / std::tan(half);
}

Vec3 Camera::forward() const { return (look_at - position).normalized(); }
Vec3 Camera::right() const { return forward().cross(up).normalized(); }
Vec3 Camera::true_up() const { return right().cross(forward()); }

Vec3 Camera::ray(double u, double v) const {
  const double tan_half = std::tan(vertical_fov_deg * std::numbers::pi / 360.0);
  const double x = (2.0 * u - 1.0) * tan_half * aspect();
  const double y = (1.0 - 2.0 * v) * tan_half;
  return (forward() + x * right() + y * true_up()).normalized();
}

Projection project(const Camera& camera, const Vec3& point) {
  const Vec3 d = point - camera.position;
  Projection p;
  p.depth = d.dot(camera.forward());
  if (p.depth <= 1e-9) {
    p.in_frame = false;
    return p;
  }
  const double tan_half = std::tan(camera.vertical_fov_deg * std::numbers::pi / 360.0);
  p.u = 0.5 + d.dot(camera.right()) / (2.0 * p.depth * tan_half * camera.aspect());
  p.v = 0.5 - d.dot(camera.true_up()) / (2.0 * p.depth * tan_half);
  p.in_frame = p.u >= 0.0 && p.u <= 1.0 && p.v >= 0.0 && p.v <= 1.0;
  return p;
}

}  // namespace trajverb::features
