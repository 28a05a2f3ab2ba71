#include "trajverb/oracle/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trajverb/sim/physics.hpp"

namespace trajverb::oracle {
namespace {

using sim::Contact;
using sim::Frame;
using sim::Vec3;

constexpr std::array<std::string_view, kVerbCount> kVerbNames = {
    "fall", "rise", "slide", "roll", "bounce", "spin",
    "stop", "start", "push", "pull", "drop", "toss"};

bool on_surface(Contact c) { return c == Contact::kCounter || c == Contact::kFloor; }

Vec3 horizontal(const Vec3& v) { return Vec3(v.x(), v.y(), 0.0); }

// Surface the object rests on, counting hand-driven frames (pushes, drags)
// where the object stays at support height.
Contact surface_of(const Frame& f, const sim::SceneConfig& scene) {
  if (on_surface(f.contact)) return f.contact;
  if (f.contact != Contact::kHand) return Contact::kNone;
  const double support = scene.support_height(f.obj_pos.x(), f.obj_pos.y());
  if (std::abs(f.obj_pos.z() - support - scene.object_radius) > 1e-4) return Contact::kNone;
  return scene.over_counter(f.obj_pos.x(), f.obj_pos.y()) ? Contact::kCounter : Contact::kFloor;
}

double cosine(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return -1.0;
  return a.dot(b) / (na * nb);
}

bool detect_fall(std::span<const Frame> f, const OracleConfig& cfg) {
  const int n = static_cast<int>(f.size());
  for (int a = 0; a < n;) {
    if (f[a].contact != Contact::kNone) {
      ++a;
      continue;
    }
    int b = a;
    while (b + 1 < n && f[b + 1].contact == Contact::kNone) ++b;
    const int pre = a > 0 ? a - 1 : a;
    const int post = b + 1 < n ? b + 1 : b;
    double lowest = f[pre].obj_pos.z();
    for (int i = pre; i <= post; ++i) lowest = std::min(lowest, f[i].obj_pos.z());
    if (lowest - f[pre].obj_pos.z() < -cfg.fall_drop) return true;
    a = b + 1;
  }
  return false;
}

bool detect_rise(std::span<const Frame> f, const OracleConfig& cfg) {
  bool active = false;
  double base = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Contact c = f[i].contact;
    if (c == Contact::kHand && !active) {
      active = true;
      base = f[i > 0 ? i - 1 : i].obj_pos.z();
    } else if (on_surface(c)) {
      active = false;
    }
    if (active && f[i].obj_pos.z() - base > cfg.rise_height) return true;
  }
  return false;
}

bool detect_bounce(std::span<const Frame> f, const OracleConfig& cfg) {
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (on_surface(f[i].contact) && f[i - 1].obj_vel.z() < 0.0 &&
        f[i].obj_vel.z() > cfg.bounce_rebound) {
      return true;
    }
  }
  return false;
}

bool detect_spin(std::span<const Frame> f, const OracleConfig& cfg) {
  double fastest = 0.0;
  double travel = 0.0;
  for (const Frame& fr : f) {
    fastest = std::max(fastest, fr.obj_angvel.norm());
    travel = std::max(travel, (fr.obj_pos - f.front().obj_pos).norm());
  }
  return fastest > cfg.spin_rate && travel < cfg.spin_travel;
}

bool detect_stop(std::span<const Frame> f, const OracleConfig& cfg) {
  const int n = static_cast<int>(f.size());
  // First index of the trailing run of slow frames.
  int j = n;
  while (j > 0 && f[j - 1].obj_vel.norm() < cfg.rest_speed) --j;
  if (n - j < cfg.rest_frames) return false;
  for (int i = 0; i < j; ++i) {
    if (f[i].obj_vel.norm() > cfg.moving_speed) return true;
  }
  return false;
}

bool detect_start(std::span<const Frame> f, const OracleConfig& cfg) {
  const int n = static_cast<int>(f.size());
  // Length of the leading run of slow frames.
  int i = 0;
  while (i < n && f[i].obj_vel.norm() < cfg.rest_speed) ++i;
  if (i < cfg.rest_frames) return false;
  for (int k = i; k < n; ++k) {
    if (f[k].obj_vel.norm() > cfg.moving_speed) return true;
  }
  return false;
}

// Hand-driven horizontal motion. `hand_leads` selects pulling (hand ahead of
// the object along its motion) rather than pushing (hand behind it).
bool detect_hand_drive(std::span<const Frame> f, const sim::SceneConfig& scene,
                       const OracleConfig& cfg, bool hand_leads) {
  int hits = 0;
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (f[i].contact != Contact::kHand) continue;
    const Vec3 obj_v = horizontal(f[i].obj_vel);
    const Vec3 hand_v = horizontal(f[i].hand_pos - f[i - 1].hand_pos) / sim::kDt;
    if (obj_v.norm() <= cfg.push_min_speed || hand_v.norm() <= cfg.push_min_speed) continue;
    const Vec3 hand_to_obj = horizontal(f[i].obj_pos - f[i].hand_pos);
    if (hand_to_obj.norm() < 0.5 * scene.object_radius) continue;
    const Vec3 lead = hand_leads ? Vec3(-hand_to_obj) : hand_to_obj;
    if (cosine(hand_v, obj_v) > cfg.push_cos && cosine(lead, obj_v) > cfg.push_cos) ++hits;
  }
  return hits >= cfg.push_min_frames;
}

bool released(std::span<const Frame> f, std::size_t i) {
  return i > 0 && f[i - 1].contact == Contact::kHand && f[i].contact == Contact::kNone;
}

bool detect_drop(std::span<const Frame> f, const OracleConfig& cfg) {
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (!released(f, i)) continue;
    const double base = f[i - 1].obj_pos.z();
    const std::size_t last = std::min(f.size() - 1, i + static_cast<std::size_t>(cfg.drop_window));
    for (std::size_t k = i; k <= last; ++k) {
      if (f[k].obj_pos.z() - base < -cfg.fall_drop) return true;
    }
  }
  return false;
}

bool detect_toss(std::span<const Frame> f, const OracleConfig& cfg) {
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (!released(f, i)) continue;
    const Vec3& v = f[i - 1].obj_vel;
    if (v.z() > cfg.toss_speed || horizontal(v).norm() > cfg.toss_speed) return true;
  }
  return false;
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string("oracle.") + field, what);
}

}  // namespace

std::string_view to_string(Verb verb) { return kVerbNames[static_cast<std::size_t>(verb)]; }

Verb verb_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kVerbNames.size(); ++i) {
    if (kVerbNames[i] == name) return static_cast<Verb>(i);
  }
  throw ConfigError("verbs", "unknown verb '" + std::string(name) + "'");
}

std::vector<Verb> default_verbs() {
  std::vector<Verb> verbs;
  for (int i = 0; i < kVerbCount; ++i) verbs.push_back(static_cast<Verb>(i));
  return verbs;
}

void OracleConfig::validate() const {
  require(fall_drop > 0.0, "fall_drop", "must be > 0");
  require(rise_height > 0.0, "rise_height", "must be > 0");
  require(contact_travel > 0.0, "contact_travel", "must be > 0");
  require(slip_speed > 0.0, "slip_speed", "must be > 0");
  require(roll_spin >= 0.0, "roll_spin", "must be >= 0");
  require(bounce_rebound >= 0.0, "bounce_rebound", "must be >= 0");
  require(spin_rate > 0.0, "spin_rate", "must be > 0");
  require(spin_travel > 0.0, "spin_travel", "must be > 0");
  require(moving_speed > rest_speed && rest_speed > 0.0, "moving_speed",
          "must exceed rest_speed, which must be > 0");
  require(rest_frames >= 1, "rest_frames", "must be >= 1");
  require(push_cos > -1.0 && push_cos < 1.0, "push_cos", "must lie in (-1, 1)");
  require(push_min_speed >= 0.0, "push_min_speed", "must be >= 0");
  require(push_min_frames >= 1, "push_min_frames", "must be >= 1");
  require(drop_window >= 1, "drop_window", "must be >= 1");
  require(toss_speed > 0.0, "toss_speed", "must be > 0");
}

std::vector<ContactSegment> contact_segments(std::span<const Frame> f,
                                             const sim::SceneConfig& scene,
                                             const OracleConfig& cfg) {
  std::vector<ContactSegment> segments;
  const int n = static_cast<int>(f.size());
  for (int a = 0; a < n;) {
    const Contact surface = surface_of(f[a], scene);
    if (surface == Contact::kNone) {
      ++a;
      continue;
    }
    int b = a + 1;
    while (b < n && surface_of(f[b], scene) == surface) ++b;
    ContactSegment seg{a, b};
    for (int i = a + 1; i < b; ++i) {
      const double step = horizontal(f[i].obj_pos - f[i - 1].obj_pos).norm();
      const double slip = sim::slip_speed(f[i].obj_vel, f[i].obj_angvel, scene.object_radius);
      if (slip > cfg.slip_speed) {
        seg.slide_travel += step;
      } else if (f[i].obj_angvel.norm() > cfg.roll_spin) {
        seg.roll_travel += step;
      }
    }
    seg.slides = seg.slide_travel > cfg.contact_travel && seg.slide_travel >= seg.roll_travel;
    seg.rolls = seg.roll_travel > cfg.contact_travel && seg.roll_travel > seg.slide_travel;
    segments.push_back(seg);
    a = b;
  }
  return segments;
}

bool label_frames(std::span<const Frame> f, const sim::SceneConfig& scene, Verb verb,
                  const OracleConfig& cfg) {
  switch (verb) {
    case Verb::kFall: return detect_fall(f, cfg);
    case Verb::kRise: return detect_rise(f, cfg);
    case Verb::kSlide:
    case Verb::kRoll: {
      const auto segments = contact_segments(f, scene, cfg);
      return std::any_of(segments.begin(), segments.end(), [&](const ContactSegment& s) {
        return verb == Verb::kSlide ? s.slides : s.rolls;
      });
    }
    case Verb::kBounce: return detect_bounce(f, cfg);
    case Verb::kSpin: return detect_spin(f, cfg);
    case Verb::kStop: return detect_stop(f, cfg);
    case Verb::kStart: return detect_start(f, cfg);
    case Verb::kPush: return detect_hand_drive(f, scene, cfg, false);
    case Verb::kPull: return detect_hand_drive(f, scene, cfg, true);
    case Verb::kDrop: return detect_drop(f, cfg);
    case Verb::kToss: return detect_toss(f, cfg);
  }
  return false;
}

bool label_clip(const Clip& clip, Verb verb, const OracleConfig& cfg) {
  return label_frames(clip.frames(), clip.scene(), verb, cfg);
}

}  // namespace trajverb::oracle
