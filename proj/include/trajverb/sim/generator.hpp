#pragma once

#include <cstdint>
#include <optional>

#include "trajverb/sim/scene.hpp"

namespace trajverb::sim {

/// Generates one episode: samples a hand program and its parameters from a
/// generator seeded by `seed`, then rolls the simulator until the program has
/// finished and the object has rested for 30 consecutive frames, or 600
/// frames have elapsed. Episodes shorter than 150 frames are regenerated
/// from the same random stream (up to 10 attempts).
///
/// `forced_script` pins the hand program instead of sampling it; used by
/// tests and stress sets.
Episode generate_episode(std::uint64_t seed, const SceneConfig& config,
                         std::optional<ScriptTag> forced_script = std::nullopt);

/// True once the object is on a surface with negligible linear and angular
/// speed.
bool at_rest(const Frame& frame);

}  // namespace trajverb::sim
