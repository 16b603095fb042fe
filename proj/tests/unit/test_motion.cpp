#include "support.hpp"

#include "ff/error.hpp"
#include "ff/motion.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>
#include <limits>

using namespace ff;
using fftest::random_matrix;

namespace {

const std::vector<std::string> kJoints{"hip", "knee", "ankle"};

MotionSequence small_motion(Index frames, std::uint64_t seed) {
  Matrix m = random_matrix(frames, 6, seed, 20.0);
  return MotionSequence(ChannelSpec::motion(kJoints), m, 128.0);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no ff::Error thrown");
  return ErrorCode::Stage;
}

}  // namespace

TEST_CASE("channel spec layout") {
  const auto spec = ChannelSpec::motion(kJoints);
  CHECK(spec.size() == 6);
  CHECK(spec.joint_count() == 3);
  CHECK(spec.root_indices() == std::vector<Index>{3, 4, 5});
  CHECK(spec.name(3) == "root_x");
  CHECK(spec.index_of("knee") == Index{1});
  CHECK_FALSE(spec.index_of("elbow").has_value());
  CHECK(code_of([] { ChannelSpec({}, {}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { ChannelSpec::motion({"a", "a"}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("motion validation rejects bad data") {
  Matrix m = Matrix::Zero(4, 6);
  m(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { MotionSequence(ChannelSpec::motion(kJoints), m, 128.0); }) == ErrorCode::NonFinite);
  m(2, 1) = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { MotionSequence(ChannelSpec::motion(kJoints), m, 128.0); }) == ErrorCode::NonFinite);
  m(2, 1) = 400.0;
  CHECK(code_of([&] { MotionSequence(ChannelSpec::motion(kJoints), m, 128.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { MotionSequence(ChannelSpec::motion(kJoints), Matrix::Zero(4, 5), 128.0); }) ==
        ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { TorqueSequence(ChannelSpec::motion(kJoints), Matrix::Zero(4, 6), 128.0); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("motion and torque CSV round trip") {
  fftest::TempDir dir("motion_csv");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto seq = small_motion(37, seed);
    save_motion_csv(seq, dir / "m.csv");
    const auto back = load_motion_csv(dir / "m.csv");
    CHECK(back.channels() == seq.channels());
    CHECK(back.frame_rate() == seq.frame_rate());
    CHECK((back.data() - seq.data()).cwiseAbs().maxCoeff() <= 1e-9);

    const TorqueSequence t(ChannelSpec::joints_only(kJoints), random_matrix(21, 3, seed + 100, 50.0), 100.0);
    save_torque_csv(t, dir / "t.csv");
    CHECK(load_torque_csv(dir / "t.csv") == t);
  }
}

TEST_CASE("malformed CSV is a parse error") {
  fftest::TempDir dir("motion_bad");
  const auto write = [&](const std::string& text) {
    std::ofstream(dir / "bad.csv") << text;
    return dir / "bad.csv";
  };
  CHECK(code_of([&] { load_motion_csv(write("hip:angle,root_x:root\n1,2\n")); }) == ErrorCode::Parse);
  CHECK(code_of([&] {
          load_motion_csv(write("# frame_rate=128\nhip:angle,root_x:root,root_y:root,root_z:root\n1,2,3\n"));
        }) == ErrorCode::Parse);
  CHECK(code_of([&] {
          load_motion_csv(write("# frame_rate=128\nhip:angle,root_x:root,root_y:root,root_z:root\n1,x,3,4\n"));
        }) == ErrorCode::Parse);
  CHECK(code_of([&] {
          load_motion_csv(write("# frame_rate=128\nhip:angle,root_x:root,root_y:root,root_z:root\n1,nan,3,4\n"));
        }) == ErrorCode::NonFinite);
  CHECK(code_of([&] { load_motion_csv(dir / "missing.csv"); }) == ErrorCode::Io);
}

TEST_CASE("stance segmentation invariants") {
  CHECK(StanceSegmentation::from_durations({3, 4, 5}).boundaries() == std::vector<Index>{0, 3, 7});
  CHECK(StanceSegmentation::from_durations({3, 4, 5}).total_frames() == 12);
  CHECK(code_of([] { StanceSegmentation({1, 4}, 10); }) == ErrorCode::Segmentation);
  CHECK(code_of([] { StanceSegmentation({0, 4, 4}, 10); }) == ErrorCode::Segmentation);
  CHECK(code_of([] { StanceSegmentation({0, 10}, 10); }) == ErrorCode::Segmentation);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = fftest::synthetic_gait(seed, 12);
    SegmentationParams p;
    p.contact_channel = "knee_angle_r";
    const auto c = *g.motion.channels().index_of(p.contact_channel);
    p.threshold = g.motion.data().col(c).mean();
    const auto seg = segment_stances(g.motion, p);
    const auto d = seg.durations();
    Index sum = 0;
    for (auto x : d) sum += x;
    CHECK(sum == g.motion.frames());
    for (std::size_t i = 1; i < seg.boundaries().size(); ++i) CHECK(seg.boundaries()[i] > seg.boundaries()[i - 1]);
    for (auto x : d) CHECK(x >= p.min_stance_frames);
  }
}

TEST_CASE("provided segmentation") {
  const auto seq = small_motion(30, 3);
  SegmentationParams p;
  p.method = SegmentationMethod::Provided;
  p.boundaries = {0, 10, 20};
  CHECK(segment_stances(seq, p).durations() == std::vector<Index>{10, 10, 10});
  p.boundaries = {0, 10, 12};
  CHECK(code_of([&] { segment_stances(seq, p); }) == ErrorCode::Segmentation);
}

TEST_CASE("fusion weights and control validation") {
  CHECK_NOTHROW(validate_fusion_weights({0.5, 0.5}));
  CHECK_NOTHROW(validate_fusion_weights({0.2, 0.3, 0.5}));
  CHECK(code_of([] { validate_fusion_weights({0.5, 0.6}); }) == ErrorCode::Weights);
  CHECK(code_of([] { validate_fusion_weights({-0.5, 1.5}); }) == ErrorCode::Weights);
  CHECK(code_of([] { validate_fusion_weights({}); }) == ErrorCode::Weights);

  ControlParams c;
  c.label = SubjectId{3};
  CHECK_NOTHROW(c.validate(4));
  CHECK(code_of([&] { c.validate(3); }) == ErrorCode::UnknownLabel);
  c.tempo = {60, 1};
  CHECK(code_of([&] { c.validate(4); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("error code names are stable") {
  CHECK(code_name(ErrorCode::InvalidArgument) == "E_ARG");
  CHECK(code_name(ErrorCode::Weights) == "E_WEIGHTS");
  CHECK(code_name(ErrorCode::UnknownLabel) == "E_LABEL");
  CHECK(code_name(ErrorCode::MissingCheckpoint) == "E_CHECKPOINT");
  CHECK(code_name(ErrorCode::ShapeMismatch) == "E_SHAPE");
}
