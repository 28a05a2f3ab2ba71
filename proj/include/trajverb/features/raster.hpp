#pragma once

#include <vector>

#include "trajverb/features/camera.hpp"

namespace trajverb::features {

inline constexpr double kFloorIntensity = 0.2;
inline constexpr double kCounterIntensity = 0.35;
inline constexpr double kObjectIntensity = 0.9;
inline constexpr double kHandIntensity = 0.6;

/// Grayscale image, row-major, intensities in [0, 1].
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// How much of the object's projected footprint the counter hides, in
/// supersamples.
struct ObjectCoverage {
  int covered = 0;
  int visible = 0;

  bool fully_occluded() const { return covered > 0 && visible == 0; }
};

/// Renders frames from a fixed camera. The floor and counter backdrop is
/// computed once at construction (4x4 supersampling per pixel); per frame,
/// the object is drawn as a disk (sphere) or square (cube) of its projected
/// size wherever the counter box does not sit between it and the camera,
/// and the hand is drawn last as a 3-pixel cross.
class Rasterizer {
 public:
  static constexpr int kSuper = 4;

  Rasterizer(Camera camera, const sim::SceneConfig& scene);

  const Camera& camera() const { return camera_; }
  const Raster& background() const { return background_; }
  bool compatible_with(const sim::SceneConfig& scene) const;

  Raster render(const sim::Frame& frame, const sim::SceneConfig& scene) const;
  ObjectCoverage object_coverage(const sim::Frame& frame, const sim::SceneConfig& scene) const;

 private:
  template <typename Visit>
  void visit_object_samples(const sim::Frame& frame, const sim::SceneConfig& scene,
                            Visit&& visit) const;

  Camera camera_;
  double counter_height_;
  double counter_extent_;
  Raster background_;
  // Per supersample: background intensity and ray distance to the counter box
  // (infinity when the ray misses it).
  std::vector<double> sample_shade_;
  std::vector<double> sample_counter_t_;
};

/// Convenience wrapper building a one-off Rasterizer.
Raster rasterize(const Camera& camera, const sim::Frame& frame, const sim::SceneConfig& scene);

}  // namespace trajverb::features
