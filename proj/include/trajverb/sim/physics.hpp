#pragma once

#include "trajverb/sim/scene.hpp"

namespace trajverb::sim {

/// Advances the scene by one 1/60 s tick.
///
/// The hand is kinematic: it moves toward `hand_target`, covering at most
/// `config.hand_speed / 60` meters. When `grasp` is set and the object centre
/// lies within 1.5 object radii of the hand, the object translates rigidly
/// with the hand. Otherwise the object is integrated freely: constant-gravity
/// ballistic motion in the air, analytic contact against the floor plane and
/// the counter box, Coulomb friction while supported, and restitution on
/// impact. A free object touched by the hand is pushed out of it.
///
/// Throws IntegrationDiverged when the input or output state is non-finite.
Frame step(const Frame& state, const SceneConfig& config, const Vec3& hand_target,
           bool grasp);

/// Kinetic plus potential energy per unit mass (J/kg), including rotational
/// energy about the centre (solid sphere or solid cube inertia).
double mechanical_energy(const Frame& frame, const SceneConfig& config);

/// Slip speed of the contact point, |v - w x r|, for an object resting on a
/// horizontal surface. For a cube this reduces to the horizontal speed.
double slip_speed(const Vec3& velocity, const Vec3& angular_velocity, double radius);

/// True when the object sits on its support surface and is not moving up.
bool is_supported(const Frame& frame, const SceneConfig& config);

}  // namespace trajverb::sim
