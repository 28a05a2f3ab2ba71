#include "trajverb/features/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trajverb::features {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Slab test against the axis-aligned counter box; returns the entry distance
// along the unit ray, or infinity on a miss.
double ray_box(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0;
  double t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return kInf;
      continue;
    }
    double ta = (lo[a] - origin[a]) / dir[a];
    double tb = (hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  return t0;
}

}  // namespace

Rasterizer::Rasterizer(Camera camera, const sim::SceneConfig& scene)
    : camera_(std::move(camera)),
      counter_height_(scene.counter_height),
      counter_extent_(scene.counter_extent) {
  camera_.validate();
  const int w = camera_.image_width;
  const int h = camera_.image_height;
  const int sw = w * kSuper;
  const int sh = h * kSuper;
  const Vec3 lo(-counter_extent_, -counter_extent_, 0.0);
  const Vec3 hi(counter_extent_, counter_extent_, counter_height_);

  sample_shade_.resize(static_cast<std::size_t>(sw) * sh);
  sample_counter_t_.resize(sample_shade_.size());
  background_ = Raster{w, h, std::vector<double>(static_cast<std::size_t>(w) * h, 0.0)};
  for (int sy = 0; sy < sh; ++sy) {
    for (int sx = 0; sx < sw; ++sx) {
      const double u = (sx + 0.5) / sw;
      const double v = (sy + 0.5) / sh;
      const double t = ray_box(camera_.position, camera_.ray(u, v), lo, hi);
      const auto idx = static_cast<std::size_t>(sy) * sw + sx;
      sample_counter_t_[idx] = t;
      sample_shade_[idx] = std::isfinite(t) ? kCounterIntensity : kFloorIntensity;
      background_.at(sx / kSuper, sy / kSuper) += sample_shade_[idx] / (kSuper * kSuper);
    }
  }
}

bool Rasterizer::compatible_with(const sim::SceneConfig& scene) const {
  return scene.counter_height == counter_height_ && scene.counter_extent == counter_extent_;
}

template <typename Visit>
void Rasterizer::visit_object_samples(const sim::Frame& frame, const sim::SceneConfig& scene,
                                      Visit&& visit) const {
  const Projection p = project(camera_, frame.obj_pos);
  if (p.depth <= 1e-9) return;
  const int sw = camera_.image_width * kSuper;
  const int sh = camera_.image_height * kSuper;
  const double cx = p.u * sw;
  const double cy = p.v * sh;
  const double radius = camera_.focal_pixels() * kSuper * scene.object_radius / p.depth;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(sw - 1, static_cast<int>(std::ceil(cx + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(sh - 1, static_cast<int>(std::ceil(cy + radius)));
  const double near_surface = (frame.obj_pos - camera_.position).norm() - scene.object_radius;
  const bool disk = scene.object_shape == sim::Shape::kSphere;

  for (int sy = y0; sy <= y1; ++sy) {
    for (int sx = x0; sx <= x1; ++sx) {
      const double dx = sx + 0.5 - cx;
      const double dy = sy + 0.5 - cy;
      const bool inside = disk ? dx * dx + dy * dy <= radius * radius
                               : std::abs(dx) <= radius && std::abs(dy) <= radius;
      if (!inside) continue;
      const auto idx = static_cast<std::size_t>(sy) * sw + sx;
      visit(sx, sy, sample_counter_t_[idx] >= near_surface);
    }
  }
}

Raster Rasterizer::render(const sim::Frame& frame, const sim::SceneConfig& scene) const {
  Raster out = background_;
  const int sw = camera_.image_width * kSuper;
  const double weight = 1.0 / (kSuper * kSuper);
  visit_object_samples(frame, scene, [&](int sx, int sy, bool visible) {
    if (!visible) return;
    const auto idx = static_cast<std::size_t>(sy) * sw + sx;
    out.at(sx / kSuper, sy / kSuper) += (kObjectIntensity - sample_shade_[idx]) * weight;
  });

  const Projection hand = project(camera_, frame.hand_pos);
  if (hand.in_frame) {
    const int hx = std::min(out.width - 1, static_cast<int>(hand.u * out.width));
    const int hy = std::min(out.height - 1, static_cast<int>(hand.v * out.height));
    constexpr int kOffsets[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (const auto& o : kOffsets) {
      const int x = hx + o[0];
      const int y = hy + o[1];
      if (x >= 0 && x < out.width && y >= 0 && y < out.height) out.at(x, y) = kHandIntensity;
    }
  }
  for (double& px : out.pixels) px = std::clamp(px, 0.0, 1.0);
  return out;
}

ObjectCoverage Rasterizer::object_coverage(const sim::Frame& frame,
                                           const sim::SceneConfig& scene) const {
  ObjectCoverage cov;
  visit_object_samples(frame, scene, [&](int, int, bool visible) {
    ++cov.covered;
    cov.visible += visible ? 1 : 0;
  });
  return cov;
}

Raster rasterize(const Camera& camera, const sim::Frame& frame, const sim::SceneConfig& scene) {
  return Rasterizer(camera, scene).render(frame, scene);
}

}  // namespace trajverb::features
