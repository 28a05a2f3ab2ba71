#include "trajverb/sim/scene.hpp"

#include <array>
#include <cmath>
#include <string>

namespace trajverb::sim {
namespace {

constexpr std::array<std::string_view, kScriptCount> kScriptNames = {
    "reach", "lift-carry-place", "push", "drop-from-edge",
    "toss",  "spin-in-place",    "pull-back"};

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string("scene.") + field, what);
}

}  // namespace

std::string_view to_string(Shape shape) {
  return shape == Shape::kSphere ? "sphere" : "cube";
}

std::string_view to_string(ScriptTag tag) {
  return kScriptNames[static_cast<std::size_t>(tag)];
}

Shape shape_from_string(std::string_view name) {
  if (name == "sphere") return Shape::kSphere;
  if (name == "cube") return Shape::kCube;
  throw ConfigError("scene.object_shape", "unknown shape '" + std::string(name) + "'");
}

ScriptTag script_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kScriptNames.size(); ++i) {
    if (kScriptNames[i] == name) return static_cast<ScriptTag>(i);
  }
  throw Error("unknown script tag '" + std::string(name) + "'");
}

void SceneConfig::validate() const {
  require(std::isfinite(gravity) && gravity >= 0.0, "gravity", "must be finite and >= 0");
  require(std::isfinite(counter_height) && counter_height > 0.0, "counter_height",
          "must be > 0");
  require(std::isfinite(counter_extent) && counter_extent > 0.0, "counter_extent",
          "must be > 0");
  require(std::isfinite(object_radius) && object_radius > 0.0, "object_radius",
          "must be > 0");
  require(object_radius < counter_extent, "object_radius", "must be smaller than counter_extent");
  require(friction_mu >= 0.0 && friction_mu <= 2.0, "friction_mu", "must lie in [0, 2]");
  require(restitution >= 0.0 && restitution <= 1.0, "restitution", "must lie in [0, 1]");
  require(std::isfinite(hand_speed) && hand_speed > 0.0, "hand_speed", "must be > 0");
}

bool SceneConfig::over_counter(double x, double y) const {
  return std::abs(x) <= counter_extent && std::abs(y) <= counter_extent;
}

double SceneConfig::support_height(double x, double y) const {
  return over_counter(x, y) ? counter_height : 0.0;
}

bool Frame::all_finite() const {
  return hand_pos.allFinite() && obj_pos.allFinite() && obj_rot.coeffs().allFinite() &&
         obj_vel.allFinite() && obj_angvel.allFinite();
}

IntegrationDiverged::IntegrationDiverged(std::int64_t t_index)
    : Error("integration diverged at t_index " + std::to_string(t_index)), t_index_(t_index) {}

}  // namespace trajverb::sim
