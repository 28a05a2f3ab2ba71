#pragma once

#include <filesystem>
#include <string>

#include "trajverb/sim/scene.hpp"

namespace trajverb::sim {

/// Serializes an episode as one JSON document: a header (seed, config,
/// script_tag, script_start, frame_count) and a `frames` array whose rows are
///   [t, hx, hy, hz, ox, oy, oz, qx, qy, qz, qw, vx, vy, vz, wx, wy, wz, contact]
/// with every real number printed to 9 significant digits.
std::string episode_to_json(const Episode& episode);
Episode episode_from_json(const std::string& text);

void write_episode(const std::filesystem::path& path, const Episode& episode);
Episode read_episode(const std::filesystem::path& path);

}  // namespace trajverb::sim
