#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <set>

#include <gtest/gtest.h>

#include "trajverb/oracle/annotation.hpp"
#include "trajverb/sim/generator.hpp"
#include "trajverb/sim/physics.hpp"

namespace trajverb::oracle {
namespace {

using sim::Contact;
using sim::Episode;
using sim::Frame;
using sim::Vec3;

const Vec3 kParkedHand(3.0, 3.0, 2.0);

std::shared_ptr<const Episode> resting_episode(int frames) {
  auto ep = std::make_shared<Episode>();
  ep->seed = 1;
  Frame f;
  f.hand_pos = kParkedHand;
  f.obj_pos = Vec3(0.0, 0.0, ep->config.counter_height + ep->config.object_radius);
  f.contact = Contact::kCounter;
  for (int i = 0; i < frames; ++i) {
    f.t_index = i;
    ep->frames.push_back(f);
  }
  return ep;
}

// Object moving along x on the floor at constant speed with a given spin.
std::shared_ptr<const Episode> floor_motion(double speed, double spin_y, double mu) {
  auto ep = std::make_shared<Episode>();
  ep->config.friction_mu = mu;
  const double r = ep->config.object_radius;
  for (int i = 0; i < 150; ++i) {
    Frame f;
    f.t_index = i;
    f.hand_pos = kParkedHand;
    f.obj_pos = Vec3(1.5 + speed * i * sim::kDt, 0.0, r);
    f.obj_vel = Vec3(speed, 0.0, 0.0);
    f.obj_angvel = Vec3(0.0, spin_y, 0.0);
    f.contact = Contact::kFloor;
    ep->frames.push_back(f);
  }
  return ep;
}

std::vector<std::shared_ptr<const Episode>> generated(int n, std::uint64_t base = 0) {
  std::vector<std::shared_ptr<const Episode>> out;
  sim::SceneConfig cfg;
  for (int i = 0; i < n; ++i) {
    out.push_back(std::make_shared<Episode>(sim::generate_episode(base + i, cfg)));
  }
  return out;
}

TEST(ExtractClips, WindowCounts) {
  EXPECT_EQ(extract_clips(resting_episode(150), 30).size(), 1u);
  const auto clips = extract_clips(resting_episode(240), 30);
  ASSERT_EQ(clips.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(clips[i].start_frame(), 30 * i);
  EXPECT_TRUE(extract_clips(resting_episode(149), 30).empty());
  EXPECT_THROW(extract_clips(resting_episode(200), 0), Error);
}

TEST(ExtractClips, FutureFollowsInput) {
  const auto clips = extract_clips(resting_episode(200), 50);
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_EQ(clips[1].frames().front().t_index, 50);
  EXPECT_EQ(clips[1].future().front().t_index, 140);
  EXPECT_EQ(clips[1].future().size(), 60u);
}

TEST(LabelClip, RestingClipHasNoVerb) {
  const Clip clip(resting_episode(150), 0);
  OracleConfig cfg;
  for (Verb v : default_verbs()) EXPECT_FALSE(label_clip(clip, v, cfg)) << to_string(v);
}

TEST(LabelClip, FreeFallIsFall) {
  auto ep = std::make_shared<Episode>();
  Frame f;
  f.hand_pos = kParkedHand;
  f.obj_pos = Vec3(2.0, 0.0, 0.4);
  for (int i = 0; i < 150; ++i) {
    ep->frames.push_back(f);
    f = sim::step(f, ep->config, kParkedHand, false);
  }
  const Clip clip(ep, 0);
  // Independent check of the construction: airborne drop of 0.3 m.
  double min_dz = 0.0;
  for (const Frame& g : clip.frames()) {
    if (g.contact == Contact::kNone) min_dz = std::min(min_dz, g.obj_pos.z() - 0.4);
  }
  ASSERT_LT(min_dz, -0.1);
  OracleConfig cfg;
  EXPECT_TRUE(label_clip(clip, Verb::kFall, cfg));
  EXPECT_FALSE(label_clip(clip, Verb::kRise, cfg));
  EXPECT_FALSE(label_clip(clip, Verb::kPush, cfg));
}

TEST(LabelClip, LowFrictionSlideIsNotRoll) {
  // 0.3 m in 90 frames at 0.2 m/s with no spin: slip speed 0.2 m/s.
  const Clip clip(floor_motion(0.2, 0.0, 0.05), 0);
  ASSERT_NEAR(sim::slip_speed(clip.frames()[0].obj_vel, clip.frames()[0].obj_angvel, 0.1), 0.2,
              1e-12);
  OracleConfig cfg;
  EXPECT_TRUE(label_clip(clip, Verb::kSlide, cfg));
  EXPECT_FALSE(label_clip(clip, Verb::kRoll, cfg));
}

TEST(LabelClip, RollingWithoutSlipIsRoll) {
  // omega = up x v / r gives zero contact slip; |omega| = 3 rad/s.
  const Clip clip(floor_motion(0.3, 3.0, 0.5), 0);
  ASSERT_LT(sim::slip_speed(clip.frames()[0].obj_vel, clip.frames()[0].obj_angvel, 0.1), 1e-12);
  OracleConfig cfg;
  EXPECT_TRUE(label_clip(clip, Verb::kRoll, cfg));
  EXPECT_FALSE(label_clip(clip, Verb::kSlide, cfg));
}

TEST(LabelClip, ShortTravelIsNeither) {
  const Clip clip(floor_motion(0.05, 0.0, 0.05), 0);
  OracleConfig cfg;
  EXPECT_FALSE(label_clip(clip, Verb::kSlide, cfg));
  EXPECT_FALSE(label_clip(clip, Verb::kRoll, cfg));
}

TEST(LabelClip, SegmentsNeverBothSlideAndRoll) {
  OracleConfig cfg;
  for (const auto& ep : generated(60)) {
    for (const Clip& clip : extract_clips(ep, 30)) {
      for (const ContactSegment& s : contact_segments(clip.frames(), clip.scene(), cfg)) {
        ASSERT_FALSE(s.slides && s.rolls);
      }
    }
  }
}

TEST(LabelClip, FallThresholdMonotone) {
  OracleConfig loose;
  OracleConfig strict;
  strict.fall_drop = 0.3;
  int flipped = 0;
  for (const auto& ep : generated(60)) {
    for (const Clip& clip : extract_clips(ep, 30)) {
      const bool a = label_clip(clip, Verb::kFall, loose);
      const bool b = label_clip(clip, Verb::kFall, strict);
      ASSERT_FALSE(!a && b);
      flipped += a && !b;
    }
  }
  EXPECT_GT(flipped, 0);
}

TEST(LabelClip, Deterministic) {
  OracleConfig cfg;
  const auto eps = generated(5);
  for (const auto& ep : eps) {
    for (const Clip& clip : extract_clips(ep, 30)) {
      for (Verb v : default_verbs()) ASSERT_EQ(label_clip(clip, v, cfg), label_clip(clip, v, cfg));
    }
  }
}

TEST(LabelClip, EveryVerbCoveredOver200Episodes) {
  OracleConfig cfg;
  std::map<Verb, int> positives;
  for (const auto& ep : generated(200)) {
    for (const Clip& clip : extract_clips(ep, 30)) {
      for (Verb v : default_verbs()) positives[v] += label_clip(clip, v, cfg);
    }
  }
  for (Verb v : default_verbs()) EXPECT_GE(positives[v], 40) << to_string(v);
}

TEST(OracleConfig, RejectsNegativeThreshold) {
  OracleConfig cfg;
  cfg.fall_drop = -1.0;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "oracle.fall_drop");
  }
}

TEST(Verbs, NamesRoundTrip) {
  for (Verb v : default_verbs()) EXPECT_EQ(verb_from_string(to_string(v)), v);
  EXPECT_EQ(default_verbs().size(), 12u);
  EXPECT_THROW(verb_from_string("juggle"), ConfigError);
}

class AnnotationTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { pool_ = generated(400, 1000); }
  static void TearDownTestSuite() { pool_.clear(); }
  static std::vector<std::shared_ptr<const Episode>> pool_;
};
std::vector<std::shared_ptr<const Episode>> AnnotationTest::pool_;

TEST_F(AnnotationTest, CardinalityBalanceAndSplits) {
  OracleConfig oracle;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AnnotationOptions opt;
    opt.per_verb = 100;
    opt.stride = 10;
    opt.seed = seed;
    const AnnotationSet set = build_annotation_set(pool_, default_verbs(), oracle, opt);
    EXPECT_EQ(set.entries.size(), 1200u);
    EXPECT_EQ(set.per_verb_count, 100);
    std::map<std::uint64_t, std::set<Split>> seen;
    for (Verb v : default_verbs()) {
      EXPECT_EQ(set.for_verb(v).size(), 100u);
      EXPECT_GE(set.positive_fraction(v), 0.3) << to_string(v);
      EXPECT_LE(set.positive_fraction(v), 0.6) << to_string(v);
    }
    for (const Annotation& a : set.entries) {
      seen[a.clip.episode_seed].insert(a.split);
      ASSERT_EQ(set.episode_split.at(a.clip.episode_seed), a.split);
    }
    for (const auto& [ep, splits] : seen) ASSERT_EQ(splits.size(), 1u);
  }
}

TEST_F(AnnotationTest, LabelsMatchOracleAndAreDeterministic) {
  OracleConfig oracle;
  AnnotationOptions opt;
  opt.stride = 10;
  opt.seed = 3;
  const AnnotationSet a = build_annotation_set(pool_, default_verbs(), oracle, opt);
  const AnnotationSet b = build_annotation_set(pool_, default_verbs(), oracle, opt);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  std::map<std::uint64_t, std::shared_ptr<const Episode>> by_seed;
  for (const auto& ep : pool_) by_seed[ep->seed] = ep;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const Annotation& e = a.entries[i];
    ASSERT_EQ(e.clip, b.entries[i].clip);
    ASSERT_EQ(e.label, b.entries[i].label);
    const Clip clip(by_seed.at(e.clip.episode_seed), e.clip.start_frame);
    ASSERT_EQ(label_clip(clip, e.verb, oracle), e.label);
  }
}

TEST_F(AnnotationTest, RoundTripThroughFiles) {
  OracleConfig oracle;
  AnnotationOptions opt;
  opt.stride = 10;
  const AnnotationSet set = build_annotation_set(pool_, default_verbs(), oracle, opt);
  const auto dir = std::filesystem::temp_directory_path() / "trajverb_oracle_io";
  std::filesystem::create_directories(dir);
  write_annotations(dir / "a.jsonl", set);
  write_splits(dir / "s.json", set.episode_split);
  const AnnotationSet back = read_annotations(dir / "a.jsonl");
  EXPECT_EQ(read_splits(dir / "s.json"), set.episode_split);
  ASSERT_EQ(back.entries.size(), set.entries.size());
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].clip, set.entries[i].clip);
    EXPECT_EQ(back.entries[i].verb, set.entries[i].verb);
    EXPECT_EQ(back.entries[i].label, set.entries[i].label);
    EXPECT_EQ(back.entries[i].split, set.entries[i].split);
  }
  std::filesystem::remove_all(dir);
}

TEST(Annotation, UnbalanceableVerbIsNamed) {
  OracleConfig oracle;
  AnnotationOptions opt;
  const auto pool = generated(8);
  try {
    build_annotation_set(pool, default_verbs(), oracle, opt);
    FAIL() << "expected a balance error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("cannot balance verb"), std::string::npos);
  }
}

TEST(Annotation, SplitProportions) {
  std::vector<std::uint64_t> seeds(1000);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i * 7 + 1;
  const auto splits = split_episodes(seeds, 9);
  std::map<Split, int> count;
  for (const auto& [s, split] : splits) ++count[split];
  EXPECT_EQ(count[Split::kTrain], 700);
  EXPECT_EQ(count[Split::kDev], 100);
  EXPECT_EQ(count[Split::kTest], 200);
  EXPECT_EQ(split_episodes(seeds, 9), splits);
}

}  // namespace
}  // namespace trajverb::oracle
