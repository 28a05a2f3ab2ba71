#include "trajverb/sim/generator.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "trajverb/rng.hpp"
#include "trajverb/sim/physics.hpp"

namespace trajverb::sim {
namespace {

constexpr int kMaxAttempts = 10;

struct Phase {
  Vec3 target;
  bool grasp = false;
  double speed = 0.8;
  int hold = 0;
  double spin_z = 0.0;
};

struct Script {
  std::vector<Phase> phases;
};

Vec3 horizontal_dir(double angle) { return Vec3(std::cos(angle), std::sin(angle), 0.0); }

class ScriptBuilder {
 public:
  ScriptBuilder(const SceneConfig& cfg, Rng& rng, Vec3 hand_start, Vec3 obj_start)
      : cfg_(cfg), rng_(rng), start_(hand_start), obj_(obj_start),
        speed_(cfg.hand_speed * rng.uniform(0.75, 1.25)), grip_(1.3 * cfg.object_radius) {}

  Script build(ScriptTag tag) {
    script_.phases.push_back({start_, false, speed_, static_cast<int>(rng_.below(41)) + 10});
    switch (tag) {
      case ScriptTag::kReach: reach(); break;
      case ScriptTag::kLiftCarryPlace: lift_carry_place(); break;
      case ScriptTag::kPush: push(); break;
      case ScriptTag::kDropFromEdge: drop_from_edge(); break;
      case ScriptTag::kToss: toss(); break;
      case ScriptTag::kSpinInPlace: spin_in_place(); break;
      case ScriptTag::kPullBack: pull_back(); break;
    }
    return std::move(script_);
  }

 private:
  void move(const Vec3& target, bool grasp = false, int hold = 0, double speed = 0.0) {
    script_.phases.push_back({target, grasp, speed > 0.0 ? speed : speed_, hold});
  }

  void retreat(const Vec3& from) {
    move(from + Vec3(0.0, 0.0, 0.3));
    move(start_);
  }

  int random_hold(int lo, int hi) { return lo + static_cast<int>(rng_.below(hi - lo + 1)); }

  // Comes down on the object from above and closes the grip.
  Vec3 grab_from_above() {
    const Vec3 grip = obj_ + Vec3(0.0, 0.0, grip_);
    move(grip + Vec3(0.0, 0.0, 0.3));
    move(grip);
    move(grip, true, random_hold(3, 10));
    return grip;
  }

  double carry_height() const {
    return cfg_.counter_height + 2.0 * cfg_.object_radius + grip_ + 0.2;
  }

  Vec3 toward_start() const {
    Vec3 d = start_ - obj_;
    d.z() = 0.0;
    return d.norm() > 1e-9 ? Vec3(d / d.norm()) : Vec3(0.0, -1.0, 0.0);
  }

  // A point just outside one counter edge; the back edge is favoured so the
  // counter hides some falls from the camera.
  Vec3 beyond_edge(double margin) {
    const double e = cfg_.counter_extent;
    const double along = rng_.uniform(-e, e);
    const double out = e + cfg_.object_radius + margin;
    const double pick = rng_.uniform();
    if (pick < 0.4) return Vec3(along, out, 0.0);
    if (pick < 0.6) return Vec3(along, -out, 0.0);
    if (pick < 0.8) return Vec3(out, along, 0.0);
    return Vec3(-out, along, 0.0);
  }

  void reach() {
    const Vec3 u = toward_start();
    const Vec3 near = obj_ + u * (2.5 * cfg_.object_radius) + Vec3(0.0, 0.0, rng_.uniform(0.0, 0.1));
    move(near, false, random_hold(10, 40));
    move(start_);
  }

  void lift_carry_place() {
    Vec3 grip = grab_from_above();
    const double lift = rng_.uniform(0.15, 0.4);
    const double high = std::max(grip.z() + lift, carry_height());
    move(Vec3(grip.x(), grip.y(), grip.z() + lift), true);
    move(Vec3(grip.x(), grip.y(), high), true);

    Vec3 dest;
    double surface = cfg_.counter_height;
    if (rng_.bernoulli(0.7)) {
      const double lim = cfg_.counter_extent - cfg_.object_radius - 0.05;
      dest = Vec3(rng_.uniform(-lim, lim), rng_.uniform(-lim, lim), 0.0);
    } else {
      dest = beyond_edge(rng_.uniform(0.15, 0.4));
      surface = 0.0;
    }
    const Vec3 carry(dest.x(), dest.y(), high);
    const Vec3 place(dest.x(), dest.y(), surface + cfg_.object_radius + grip_);
    move(carry, true);
    move(place, true);
    move(place, false, random_hold(5, 15));
    retreat(place);
  }

  void push() {
    const double e = cfg_.counter_extent;
    const double r = cfg_.object_radius;
    Vec3 u = horizontal_dir(rng_.uniform(0.0, 2.0 * std::numbers::pi));
    double length = rng_.uniform(0.1, 0.35);
    if (rng_.bernoulli(0.4)) {
      // Aim at an edge and push far enough to go over.
      const int side = static_cast<int>(rng_.below(4));
      u = side == 0 ? Vec3(0, 1, 0) : side == 1 ? Vec3(0, -1, 0) : side == 2 ? Vec3(1, 0, 0) : Vec3(-1, 0, 0);
      length = e - obj_.dot(u) + rng_.uniform(0.0, 0.1);
    }
    const double gap = r + kHandRadius + 0.03;
    const Vec3 behind = obj_ - u * gap;
    const double push_speed = rng_.uniform(0.5, 1.5);
    move(behind + Vec3(0.0, 0.0, 0.25));
    move(behind);
    const Vec3 end = behind + u * (length + 0.03);
    move(end, false, random_hold(5, 20), push_speed);
    retreat(end);
  }

  void drop_from_edge() {
    Vec3 grip = grab_from_above();
    const double high = carry_height() + rng_.uniform(0.0, 0.4);
    move(Vec3(grip.x(), grip.y(), high), true);
    const Vec3 out = beyond_edge(rng_.uniform(0.05, 0.25));
    const Vec3 release(out.x(), out.y(), high);
    move(release, true);
    move(release, false, random_hold(20, 50));
    retreat(release);
  }

  void toss() {
    Vec3 grip = grab_from_above();
    const Vec3 lifted = grip + Vec3(0.0, 0.0, rng_.uniform(0.12, 0.25));
    move(lifted, true);
    const Vec3 u = horizontal_dir(rng_.uniform(0.0, 2.0 * std::numbers::pi));
    const double elevation = rng_.uniform(0.35, 1.2);
    const Vec3 dir = u * std::cos(elevation) + Vec3(0.0, 0.0, std::sin(elevation));
    const Vec3 windup = lifted - u * 0.1;
    move(windup, true);
    const double toss_speed = rng_.uniform(1.0, 2.5);
    // Just under a whole number of ticks, so the last attached tick runs at full speed.
    const int ticks = 6 + static_cast<int>(rng_.below(7));
    const Vec3 release = windup + dir * ((ticks - 0.001) * toss_speed * kDt);
    move(release, true, 0, toss_speed);
    move(release, false, random_hold(10, 30));
    retreat(release);
  }

  void spin_in_place() {
    const Vec3 u = toward_start();
    const Vec3 side = obj_ + u * (cfg_.object_radius + kHandRadius + 0.02);
    move(side + Vec3(0.0, 0.0, 0.25));
    move(side, false, random_hold(3, 10));
    Phase flick{side + Vec3(0.0, 0.0, 0.3), false, speed_, 0};
    flick.spin_z = (rng_.bernoulli(0.5) ? 1.0 : -1.0) * rng_.uniform(6.0, 14.0);
    script_.phases.push_back(flick);
    move(start_, false, random_hold(20, 60));
  }

  void pull_back() {
    const double r = cfg_.object_radius;
    const double e = cfg_.counter_extent;
    const Vec3 u = toward_start();
    const Vec3 grip = obj_ + u * grip_;
    move(grip + Vec3(0.0, 0.0, 0.25));
    move(grip);
    move(grip, true, random_hold(3, 10));
    // Keep the dragged object on the counter top.
    double length = rng_.uniform(0.2, 0.45);
    for (int i = 0; i < 40; ++i) {
      const Vec3 dest = obj_ + u * length;
      if (std::abs(dest.x()) <= e - r && std::abs(dest.y()) <= e - r) break;
      length *= 0.9;
    }
    const Vec3 end = grip + u * length;
    move(end, true, 0, rng_.uniform(0.3, 0.8));
    move(end, false, random_hold(5, 15));
    retreat(end);
  }

  const SceneConfig& cfg_;
  Rng& rng_;
  Vec3 start_;
  Vec3 obj_;
  double speed_;
  double grip_;
  Script script_;
};

SceneConfig sample_materials(const SceneConfig& base, Rng& rng) {
  SceneConfig cfg = base;
  if (!base.randomize_materials) return cfg;
  cfg.object_shape = rng.bernoulli(0.5) ? Shape::kSphere : Shape::kCube;
  cfg.friction_mu = rng.uniform(0.05, 0.6);
  cfg.restitution = rng.uniform(0.2, 0.6);
  return cfg;
}

}  // namespace

bool at_rest(const Frame& f) {
  return (f.contact == Contact::kCounter || f.contact == Contact::kFloor) &&
         f.obj_vel.norm() < 0.005 && f.obj_angvel.norm() < 0.05;
}

Episode generate_episode(std::uint64_t seed, const SceneConfig& config,
                         std::optional<ScriptTag> forced_script) {
  config.validate();
  Rng rng(seed);
  Episode episode;
  episode.seed = seed;
  episode.config = sample_materials(config, rng);
  episode.config.randomize_materials = false;
  episode.script_tag =
      forced_script ? *forced_script : static_cast<ScriptTag>(rng.below(kScriptCount));
  const SceneConfig& cfg = episode.config;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const double e = cfg.counter_extent;
    const double r = cfg.object_radius;
    const double lim = std::max(e - r - 0.1, 0.0);
    Frame state;
    state.obj_pos = Vec3(rng.uniform(-lim, lim), rng.uniform(-lim, lim), cfg.counter_height + r);
    state.obj_rot = Quat(Eigen::AngleAxisd(rng.uniform(0.0, 2.0 * std::numbers::pi), Vec3::UnitZ()));
    state.hand_pos = Vec3(rng.uniform(-0.4, 0.4), -e - 0.25, cfg.counter_height + rng.uniform(0.3, 0.5));
    state.contact = Contact::kCounter;

    ScriptBuilder builder(cfg, rng, state.hand_pos, state.obj_pos);
    const Script script = builder.build(episode.script_tag);

    std::vector<Frame> frames;
    frames.reserve(kMaxEpisodeFrames);
    frames.push_back(state);
    std::size_t phase = 0;
    int held = 0;
    int rest_run = 0;
    bool spin_applied = false;
    std::int64_t script_start = -1;
    SceneConfig step_cfg = cfg;

    while (static_cast<int>(frames.size()) < kMaxEpisodeFrames) {
      const bool running = phase < script.phases.size();
      const Phase& current = running ? script.phases[phase] : script.phases.back();
      if (running && current.spin_z != 0.0 && !spin_applied) {
        state.obj_angvel.z() = current.spin_z;
        spin_applied = true;
      }
      step_cfg.hand_speed = current.speed;
      state = step(state, step_cfg, current.target, running && current.grasp);
      frames.push_back(state);

      if (running && (state.hand_pos - current.target).norm() < 1e-9) {
        if (held >= current.hold) {
          if (phase == 0) script_start = state.t_index;
          ++phase;
          held = 0;
          spin_applied = false;
        } else {
          ++held;
        }
      }
      if (!running) {
        rest_run = at_rest(state) ? rest_run + 1 : 0;
        if (rest_run >= kRestFramesToStop) break;
      }
    }

    if (static_cast<int>(frames.size()) >= kMinEpisodeFrames) {
      episode.frames = std::move(frames);
      episode.script_start = script_start < 0 ? 0 : script_start;
      return episode;
    }
  }
  throw Error("episode " + std::to_string(seed) + " stayed shorter than " +
              std::to_string(kMinEpisodeFrames) + " frames after " +
              std::to_string(kMaxAttempts) + " attempts");
}

}  // namespace trajverb::sim
