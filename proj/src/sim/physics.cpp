#include "trajverb/sim/physics.hpp"

#include <algorithm>
#include <cmath>

namespace trajverb::sim {
namespace {

constexpr double kSupportTolerance = 1e-6;
constexpr double kRollingResistance = 0.03;
// Torsional spin decay, as a fraction of mu * g / r.
constexpr double kSpinDecay = 0.2;
constexpr double kRestSpeed = 1e-4;
constexpr double kRestSpin = 1e-3;
// Slip-impulse denominator for a solid sphere: 1 + m r^2 / I.
constexpr double kSphereSlipGain = 3.5;

const Vec3 kUp = Vec3::UnitZ();

double inertia_factor(Shape shape) {
  // I / (m r^2): solid sphere 2/5, solid cube of half-width r is 2/3.
  return shape == Shape::kSphere ? 0.4 : 2.0 / 3.0;
}

void integrate_rotation(Quat& q, const Vec3& omega) {
  const double rate = omega.norm();
  if (rate > 0.0) {
    q = Quat(Eigen::AngleAxisd(rate * kDt, omega / rate)) * q;
  }
  q.normalize();
}

void decelerate(Vec3& horizontal, double amount) {
  const double speed = horizontal.norm();
  if (speed <= amount) {
    horizontal.setZero();
  } else {
    horizontal *= (speed - amount) / speed;
  }
}

void decay_scalar(double& value, double amount) {
  if (std::abs(value) <= amount) {
    value = 0.0;
  } else {
    value -= std::copysign(amount, value);
  }
}

// Friction and spin losses for an object sliding or rolling on a surface.
void apply_surface_friction(Vec3& vel, Vec3& omega, const SceneConfig& cfg) {
  const double r = cfg.object_radius;
  const double mu = cfg.friction_mu;
  const double g = cfg.gravity;
  Vec3 vh(vel.x(), vel.y(), 0.0);

  if (cfg.object_shape == Shape::kSphere && mu >= kRollingFrictionThreshold) {
    Vec3 slip = vh + omega.cross(Vec3(0.0, 0.0, -r));
    slip.z() = 0.0;
    const double slip_norm = slip.norm();
    if (slip_norm > 1e-9) {
      const double impulse = std::min(mu * g * kDt, slip_norm / kSphereSlipGain);
      const Vec3 dir = slip / slip_norm;
      vh -= impulse * dir;
      omega += (impulse / (inertia_factor(Shape::kSphere) * r)) * kUp.cross(dir);
    } else {
      decelerate(vh, kRollingResistance * g * kDt);
      const Vec3 rolling = kUp.cross(vh) / r;
      omega.x() = rolling.x();
      omega.y() = rolling.y();
    }
  } else {
    decelerate(vh, mu * g * kDt);
    if (cfg.object_shape == Shape::kCube) {
      omega.x() = 0.0;
      omega.y() = 0.0;
    } else {
      Vec3 tilt(omega.x(), omega.y(), 0.0);
      decelerate(tilt, kSpinDecay * mu * g * kDt / r);
      omega.x() = tilt.x();
      omega.y() = tilt.y();
    }
  }
  decay_scalar(omega.z(), kSpinDecay * mu * g * kDt / r);

  if (vh.norm() < kRestSpeed) vh.setZero();
  if (omega.norm() < kRestSpin) omega.setZero();
  vel = Vec3(vh.x(), vh.y(), 0.0);
}

// Keeps the object out of the counter's vertical side faces. The push-out is
// horizontal, so it never adds potential energy.
void resolve_counter_sides(Vec3& pos, Vec3& vel, const SceneConfig& cfg) {
  const double r = cfg.object_radius;
  const double e = cfg.counter_extent;
  const double h = cfg.counter_height;
  if (cfg.over_counter(pos.x(), pos.y()) || pos.z() >= h + r) return;

  double required = r;
  if (pos.z() > h) required = std::sqrt(std::max(0.0, r * r - (pos.z() - h) * (pos.z() - h)));
  const double dx = std::max(std::abs(pos.x()) - e, 0.0);
  const double dy = std::max(std::abs(pos.y()) - e, 0.0);
  const double dist = std::hypot(dx, dy);
  if (dist >= required || dist <= 0.0) return;

  const Vec3 normal(std::copysign(dx, pos.x()) / dist, std::copysign(dy, pos.y()) / dist, 0.0);
  pos += (required - dist) * normal;
  const double vn = vel.dot(normal);
  if (vn < 0.0) vel -= (1.0 + cfg.restitution) * vn * normal;
}

Contact surface_contact(const Vec3& pos, const SceneConfig& cfg) {
  return cfg.over_counter(pos.x(), pos.y()) ? Contact::kCounter : Contact::kFloor;
}

}  // namespace

double slip_speed(const Vec3& velocity, const Vec3& angular_velocity, double radius) {
  Vec3 slip = velocity + angular_velocity.cross(Vec3(0.0, 0.0, -radius));
  slip.z() = 0.0;
  return slip.norm();
}

bool is_supported(const Frame& frame, const SceneConfig& cfg) {
  const double support = cfg.support_height(frame.obj_pos.x(), frame.obj_pos.y());
  return std::abs(frame.obj_pos.z() - (support + cfg.object_radius)) <= kSupportTolerance &&
         frame.obj_vel.z() <= kSupportTolerance;
}

double mechanical_energy(const Frame& frame, const SceneConfig& cfg) {
  const double r = cfg.object_radius;
  const double inertia = inertia_factor(cfg.object_shape) * r * r;
  return 0.5 * frame.obj_vel.squaredNorm() + 0.5 * inertia * frame.obj_angvel.squaredNorm() +
         cfg.gravity * frame.obj_pos.z();
}

Frame step(const Frame& state, const SceneConfig& cfg, const Vec3& hand_target, bool grasp) {
  if (!state.all_finite() || !hand_target.allFinite()) throw IntegrationDiverged(state.t_index);

  Frame next = state;
  next.t_index = state.t_index + 1;

  Vec3 hand_delta = hand_target - state.hand_pos;
  const double max_move = cfg.hand_speed * kDt;
  if (hand_delta.norm() > max_move) hand_delta *= max_move / hand_delta.norm();
  next.hand_pos = state.hand_pos + hand_delta;
  const Vec3 hand_vel = hand_delta / kDt;
  const double r = cfg.object_radius;

  if (grasp && (state.obj_pos - state.hand_pos).norm() <= 1.5 * r + 1e-9) {
    next.obj_pos = state.obj_pos + hand_delta;
    next.obj_vel = hand_vel;
    next.obj_angvel.setZero();
    next.contact = Contact::kHand;
    if (!next.all_finite()) throw IntegrationDiverged(next.t_index);
    return next;
  }

  Vec3 pos = state.obj_pos;
  Vec3 vel = state.obj_vel;
  Vec3 omega = state.obj_angvel;
  bool supported = false;

  if (is_supported(state, cfg)) {
    const double support = cfg.support_height(pos.x(), pos.y());
    pos.z() = support + r;
    vel.z() = 0.0;
    apply_surface_friction(vel, omega, cfg);
    pos += vel * kDt;
    // Sliding past the counter edge leaves the object airborne.
    supported = cfg.support_height(pos.x(), pos.y()) >= support - 1e-12;
  } else {
    const Vec3 gravity(0.0, 0.0, -cfg.gravity);
    const Vec3 new_vel = vel + gravity * kDt;
    const Vec3 new_pos = pos + 0.5 * (vel + new_vel) * kDt;
    const double support = cfg.support_height(new_pos.x(), new_pos.y());
    pos = new_pos;
    vel = new_vel;
    if (pos.z() - r < support) {
      pos.z() = support + r;
      // Impact speed from the ballistic arc, not the end-of-step velocity:
      // a low hop would otherwise pick up a full step of gravity and never
      // settle below the bounce cutoff.
      const double drop = std::max(0.0, state.obj_pos.z() - pos.z());
      const double impact = std::sqrt(state.obj_vel.z() * state.obj_vel.z() + 2.0 * cfg.gravity * drop);
      double rebound = cfg.restitution * std::min(impact, -vel.z());
      if (rebound < kBounceCutoff) rebound = 0.0;
      vel.z() = std::max(rebound, 0.0);
      supported = true;
    }
  }

  resolve_counter_sides(pos, vel, cfg);
  Quat rot = state.obj_rot;
  integrate_rotation(rot, omega);

  next.obj_pos = pos;
  next.obj_vel = vel;
  next.obj_angvel = omega;
  next.obj_rot = rot;
  next.contact = supported ? surface_contact(pos, cfg) : Contact::kNone;

  // Hand pushes a free object out of its volume.
  const double reach = r + kHandRadius;
  Vec3 offset = next.obj_pos - next.hand_pos;
  if (offset.norm() < reach) {
    Vec3 normal;
    bool resolved = false;
    if (supported) {
      const Vec3 horizontal(offset.x(), offset.y(), 0.0);
      const double dz = offset.z();
      if (horizontal.norm() > 1e-9 && dz * dz < reach * reach) {
        normal = horizontal / horizontal.norm();
        const double needed = std::sqrt(reach * reach - dz * dz) - horizontal.norm();
        next.obj_pos += needed * normal;
        resolved = true;
      }
    } else if (offset.norm() > 1e-9) {
      normal = offset / offset.norm();
      next.obj_pos = next.hand_pos + reach * normal;
      resolved = true;
    }
    if (resolved) {
      const double vn = next.obj_vel.dot(normal);
      const double hn = hand_vel.dot(normal);
      if (vn < hn) next.obj_vel += (hn - vn) * normal;
      next.contact = Contact::kHand;
    }
  }

  if (!next.all_finite()) throw IntegrationDiverged(next.t_index);
  return next;
}

}  // namespace trajverb::sim
