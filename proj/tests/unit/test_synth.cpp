#include "support.hpp"

#include "ff/error.hpp"
#include "ff/synth.hpp"

#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include <fstream>

using namespace ff;

namespace {

double mean_duration(const StanceSegmentation& seg) {
  return static_cast<double>(seg.total_frames()) / static_cast<double>(seg.stance_count());
}

double duration_sd(const StanceSegmentation& seg) {
  const double m = mean_duration(seg);
  double s = 0;
  for (auto d : seg.durations()) s += (static_cast<double>(d) - m) * (static_cast<double>(d) - m);
  return std::sqrt(s / static_cast<double>(seg.stance_count()));
}

}  // namespace

TEST_CASE("generation is a pure function of seed and config") {
  const auto a = build_dataset(3, 10, 42);
  const auto b = build_dataset(3, 10, 42);
  const auto c = build_dataset(3, 10, 43);
  for (int s = 0; s < 3; ++s) {
    CHECK(a.subjects[s].nonfatigued == b.subjects[s].nonfatigued);
    CHECK(a.subjects[s].fatigued == b.subjects[s].fatigued);
    CHECK(a.subjects[s].segmentation_f == b.subjects[s].segmentation_f);
  }
  CHECK_FALSE(a.subjects[0].nonfatigued == c.subjects[0].nonfatigued);
}

TEST_CASE("default generator uses the analysis joint set") {
  const auto cfg = GeneratorConfig::defaults();
  std::vector<std::string> names;
  for (const auto& j : cfg.joints) names.push_back(j.name);
  CHECK(names == std::vector<std::string>{"lumbar_extension", "lumbar_bending", "hip_flexion_r", "hip_adduction_r",
                                          "hip_rotation_r", "knee_angle_r", "ankle_angle_r", "subtalar_angle_r"});
}

TEST_CASE("fatigue changes amplitude, offset and timing") {
  const auto bundle = build_dataset(6, 60, 9);
  for (const auto& s : bundle.subjects) {
    const auto& p = *s.profile;
    bool amp = false, off = false;
    for (Index j = 0; j < static_cast<Index>(p.joints.size()); ++j) {
      amp |= std::abs(p.amplitude_in(j, FatigueState::Fatigued) - p.amplitude_in(j, FatigueState::NonFatigued)) > 1e-6;
      off |= std::abs(p.offset_in(j, FatigueState::Fatigued) - p.offset_in(j, FatigueState::NonFatigued)) > 1e-6;
    }
    CHECK(amp);
    CHECK(off);
    CHECK(p.fatigue.jitter_multiplier >= 1.0);
    CHECK(duration_sd(s.segmentation_f) > duration_sd(s.segmentation_nf));
  }
}

TEST_CASE("root translation strictly increases along the walking axis") {
  const auto bundle = build_dataset(3, 20, 5);
  for (const auto& s : bundle.subjects)
    for (const auto* m : {&s.nonfatigued, &s.fatigued}) {
      const auto x = *m->channels().index_of("root_x");
      for (Index t = 1; t < m->frames(); ++t) REQUIRE(m->data()(t, x) > m->data()(t - 1, x));
    }
}

TEST_CASE("ground-truth boundaries match threshold detection") {
  const auto g = fftest::synthetic_gait(11, 30);
  SegmentationParams p;
  p.contact_channel = "knee_angle_r";
  const auto c = *g.motion.channels().index_of(p.contact_channel);
  p.threshold = g.motion.data().col(c).mean();
  const auto detected = segment_stances(g.motion, p);
  CHECK(detected.stance_count() == g.segmentation.stance_count());
  Index worst = 0;
  for (Index s = 0; s < detected.stance_count(); ++s)
    worst = std::max(worst, std::abs(detected.start(s) - g.segmentation.start(s)));
  CHECK(worst <= 3);
}

TEST_CASE("dataset save and ingest round trip") {
  fftest::TempDir dir("synth_ds");
  const auto bundle = build_dataset(2, 8, 3);
  save_dataset(bundle, dir.path(), true);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir.path() / "subject_1" / "fatigued.csv"));
  const auto back = ingest_external_csv(dir.path());
  REQUIRE(back.subject_count() == 2);
  for (int s = 0; s < 2; ++s) {
    CHECK((back.subjects[s].fatigued.data() - bundle.subjects[s].fatigued.data()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(back.subjects[s].segmentation_nf == bundle.subjects[s].segmentation_nf);
  }
  try {
    save_dataset(bundle, dir.path(), false);
    FAIL("expected a non-empty directory error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("bundle rejects a single subject") {
  CHECK_THROWS_AS(build_dataset(1, 10, 1), Error);
  DatasetSplit split;
  CHECK(split.first_validation_stance(100) == 80);
}
