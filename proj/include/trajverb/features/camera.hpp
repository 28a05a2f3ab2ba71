#pragma once

#include "trajverb/sim/scene.hpp"

namespace trajverb::features {

using sim::Vec3;

struct Camera {
  Vec3 position{0.0, -3.0, 1.5};
  Vec3 look_at{0.0, 0.0, 0.9};
  Vec3 up{0.0, 0.0, 1.0};
  double vertical_fov_deg = 60.0;
  int image_width = 32;
  int image_height = 24;

  void validate() const;

  double aspect() const { return static_cast<double>(image_width) / image_height; }
  /// Focal length in pixels along the vertical axis.
  double focal_pixels() const;

  /// Orthonormal camera frame; forward points from position to look_at.
  Vec3 forward() const;
  Vec3 right() const;
  Vec3 true_up() const;

  /// Unit ray direction through normalized image coordinates (u, v).
  Vec3 ray(double u, double v) const;
};

/// Normalized image coordinates: u grows to the right, v grows downward, and
/// the principal point is (0.5, 0.5).
struct Projection {
  double u = 0.5;
  double v = 0.5;
  double depth = 0.0;
  bool in_frame = false;
};

/// Pinhole projection. Points at or behind the camera plane, or landing
/// outside [0, 1]^2, are flagged as out of frame.
Projection project(const Camera& camera, const Vec3& point);

}  // namespace trajverb::features
