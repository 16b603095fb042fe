#include "support.hpp"

#include "ff/error.hpp"
#include "ff/random.hpp"
#include "ff/tempo.hpp"

#include <catch_amalgamated.hpp>

using namespace ff;

namespace {

StanceSegmentation random_segmentation(std::uint64_t seed, Index stances, Index min_d, Index max_d) {
  Rng rng(seed);
  std::vector<Index> d;
  for (Index s = 0; s < stances; ++s)
    d.push_back(min_d + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(max_d - min_d + 1))));
  return StanceSegmentation::from_durations(d);
}

}  // namespace

TEST_CASE("frame map anchors are endpoint anchored and strictly increasing") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto seg = random_segmentation(seed, 6, 2, 300);
    const auto map = tempo::build_frame_map(seg, 300);
    REQUIRE(map.stance_count() == seg.stance_count());
    for (Index s = 0; s < map.stance_count(); ++s) {
      const auto& st = map.stances[static_cast<std::size_t>(s)];
      CHECK(static_cast<Index>(st.size()) == seg.duration(s));
      CHECK(st.front().second == 0);
      CHECK(st.back().second == 299);
      for (std::size_t i = 1; i < st.size(); ++i) {
        CHECK(st[i].first > st[i - 1].first);
        CHECK(st[i].second > st[i - 1].second);
      }
    }
  }
}

TEST_CASE("stances longer than n_norm are rejected") {
  CHECK_THROWS_AS(tempo::build_frame_map(StanceSegmentation::from_durations({40, 301}), 300), Error);
  CHECK_THROWS_AS(tempo::build_frame_map(StanceSegmentation::from_durations({40, 1}), 300), Error);
}

TEST_CASE("encoding preserves original frames and round trips exactly") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto seg = random_segmentation(seed, 5, 2, 299);
    const Matrix data = fftest::random_matrix(seg.total_frames(), 4, seed);
    const auto map = tempo::build_frame_map(seg, 300);
    const Matrix enc = tempo::encode_with_map(data, map);
    REQUIRE(enc.rows() == 300 * seg.stance_count());
    for (Index s = 0; s < map.stance_count(); ++s)
      for (auto [i, k] : map.stances[static_cast<std::size_t>(s)])
        REQUIRE(enc.row(s * 300 + k) == data.row(seg.start(s) + i));
    CHECK(tempo::decode_with_map(enc, map) == data);
  }
}

TEST_CASE("motion level encode/decode keeps channels and timing") {
  const auto g = fftest::synthetic_gait(4, 8);
  const auto [norm, map] = tempo::encode_normalize(g.motion, g.segmentation);
  CHECK(norm.frames() == 300 * g.segmentation.stance_count());
  CHECK(norm.channels() == g.motion.channels());
  CHECK(map.durations() == g.segmentation.durations());
  CHECK(tempo::decode_with_map(norm, map) == g.motion);
}

TEST_CASE("frame map JSON round trip") {
  fftest::TempDir dir("tempo_json");
  const auto map = tempo::build_frame_map(random_segmentation(5, 4, 30, 90), 120);
  tempo::save_frame_map(map, dir / "map.json");
  CHECK(tempo::load_frame_map(dir / "map.json") == map);
  CHECK(tempo::FrameMap::from_json(map.to_json()) == map);
  CHECK_THROWS_AS(tempo::FrameMap::from_json("{\"n_norm\": 1, \"stances\": []}"), Error);
}

TEST_CASE("retime hits the requested durations and keeps the value range") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Index n = 300;
    const Index stances = 4;
    Matrix normalized(n * stances, 3);
    Rng rng(seed);
    for (Index c = 0; c < 3; ++c) {
      double v = 0;
      for (Index t = 0; t < normalized.rows(); ++t) normalized(t, c) = v += standard_normal(rng) * 0.1;
    }
    const auto k = random_segmentation(seed + 50, stances, 2, 200).durations();
    const Matrix out = tempo::retime(normalized, tempo::TempoProfile{k});
    Index total = 0;
    for (auto d : k) total += d;
    REQUIRE(out.rows() == total);
    // Adjacent output frames are up to `step` normalized frames apart, so the
    // gap is the largest value range inside any such span.
    Index step = 1;
    for (auto d : k) step = std::max<Index>(step, (n - 2 + d - 1) / (d - 1));
    double gap = 0;
    for (Index t = 0; t + step < normalized.rows(); ++t) {
      const auto span = normalized.middleRows(t, step + 1);
      gap = std::max(gap, (span.colwise().maxCoeff() - span.colwise().minCoeff()).maxCoeff());
    }
    for (Index c = 0; c < 3; ++c) {
      CHECK(out.col(c).maxCoeff() <= normalized.col(c).maxCoeff() + 1e-12);
      CHECK(out.col(c).minCoeff() >= normalized.col(c).minCoeff() - 1e-12);
      CHECK(out.col(c).maxCoeff() >= normalized.col(c).maxCoeff() - gap);
      CHECK(out.col(c).minCoeff() <= normalized.col(c).minCoeff() + gap);
    }
  }
}

TEST_CASE("retime to the original durations is within anchor rounding of the original") {
  const auto seg = StanceSegmentation::from_durations({40, 55, 61});
  Matrix lin(seg.total_frames(), 1);
  for (Index s = 0; s < seg.stance_count(); ++s)
    for (Index i = 0; i < seg.duration(s); ++i) lin(seg.start(s) + i, 0) = static_cast<double>(i) / (seg.duration(s) - 1);
  const Matrix norm = tempo::encode_with_map(lin, tempo::build_frame_map(seg, 300));
  const Matrix back = tempo::retime(norm, tempo::extract_tempo_profile(seg));
  // Anchors sit within half a normalized frame of their ideal phase.
  CHECK((back - lin).cwiseAbs().maxCoeff() <= 0.5 / 299.0 + 1e-12);
}

TEST_CASE("tempo rejects short durations and stance mismatch") {
  const Matrix norm = Matrix::Zero(600, 2);
  CHECK_THROWS_AS(tempo::retime(norm, tempo::TempoProfile{{1, 40}}), Error);
  CHECK_THROWS_AS(tempo::retime(norm, tempo::TempoProfile{{40, 40, 40, 40, 40, 40, 40}}), Error);
}

TEST_CASE("stance resampling between fixed lengths") {
  Matrix m(600, 1);
  for (Index t = 0; t < 600; ++t) m(t, 0) = static_cast<double>(t % 300) / 299.0;
  const Matrix down = tempo::resample_stances(m, 300, 60);
  REQUIRE(down.rows() == 120);
  CHECK(down(0, 0) == 0.0);
  CHECK(std::abs(down(59, 0) - 1.0) < 1e-12);
  CHECK((tempo::resample_stances(down, 60, 300) - m).cwiseAbs().maxCoeff() < 1e-12);
}
