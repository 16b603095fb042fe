#include "ff/synth.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"
#include "ff/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace ff {

using nlohmann::json;

std::string_view state_name(FatigueState s) noexcept {
  return s == FatigueState::Fatigued ? "fatigued" : "nonfatigued";
}

GeneratorConfig GeneratorConfig::defaults() {
  constexpr double pi = std::numbers::pi;
  GeneratorConfig c;
  // name, amplitude, phase, offset, fatigue scale, |shift|, random sign
  c.joints = {
      {"lumbar_extension", {2.5, 3.5}, {0.8, 1.2}, {-6.0, -3.0}, {0.95, 1.30}, {2.0, 6.0}, true},
      {"lumbar_bending", {3.0, 4.5}, {0.1, 0.5}, {-1.0, 1.0}, {1.20, 1.70}, {1.0, 4.0}, true},
      {"hip_flexion_r", {20.0, 24.0}, {pi / 2 - 0.1, pi / 2 + 0.1}, {10.0, 14.0}, {0.80, 1.10}, {1.0, 5.0}, true},
      {"hip_adduction_r", {5.0, 7.0}, {1.8, 2.2}, {0.0, 2.0}, {0.55, 0.85}, {1.0, 4.0}, true},
      {"hip_rotation_r", {5.0, 7.0}, {0.6, 1.0}, {1.0, 3.0}, {0.55, 0.85}, {1.0, 4.0}, true},
      {"knee_angle_r", {26.0, 30.0}, {0.0, 0.0}, {28.0, 32.0}, {1.10, 1.40}, {2.0, 8.0}, false},
      {"ankle_angle_r", {11.0, 13.0}, {2.3, 2.7}, {1.0, 3.0}, {0.80, 1.15}, {1.0, 4.0}, true},
      {"subtalar_angle_r", {4.0, 6.0}, {1.0, 1.4}, {-1.0, 1.0}, {0.80, 1.20}, {1.0, 3.0}, true},
  };
  return c;
}

namespace {
void check_range(const Range& r, const std::string& what) {
  require(std::isfinite(r.min) && std::isfinite(r.max), ErrorCode::InvalidArgument, what + " range is not finite");
  require(r.min <= r.max, ErrorCode::InvalidArgument,
          what + " range is degenerate (min " + io::format_double(r.min) + " > max " + io::format_double(r.max) + ")");
}
}  // namespace

void GeneratorConfig::validate() const {
  require(!joints.empty(), ErrorCode::InvalidArgument, "generator needs at least one joint");
  bool has_contact = false;
  for (const auto& j : joints) {
    check_range(j.amplitude, j.name + " amplitude");
    check_range(j.phase, j.name + " phase");
    check_range(j.offset, j.name + " offset");
    check_range(j.fatigue_scale, j.name + " fatigue scale");
    check_range(j.fatigue_shift, j.name + " fatigue shift");
    require(j.amplitude.min > 0, ErrorCode::InvalidArgument, j.name + " amplitude must be > 0");
    require(j.fatigue_scale.min > 0 && j.fatigue_scale.max <= 2.0, ErrorCode::InvalidArgument,
            j.name + " fatigue scale must lie in (0, 2]");
    has_contact = has_contact || j.name == contact_channel;
  }
  require(has_contact, ErrorCode::InvalidArgument, "contact channel '" + contact_channel + "' is not a joint");
  check_range(stance_period_mean, "stance period mean");
  check_range(stance_period_jitter, "stance period jitter");
  check_range(jitter_multiplier, "jitter multiplier");
  check_range(step_length, "step length");
  check_range(fatigue_step_scale, "fatigue step scale");
  require(stance_period_mean.min >= 8, ErrorCode::InvalidArgument, "stance period mean must be >= 8 frames");
  require(stance_period_jitter.min >= 0, ErrorCode::InvalidArgument, "stance jitter must be >= 0");
  require(jitter_multiplier.min >= 1, ErrorCode::InvalidArgument, "fatigue jitter multiplier must be >= 1");
  require(step_length.min > 0 && fatigue_step_scale.min > 0, ErrorCode::InvalidArgument, "step length must be > 0");
  require(frame_rate > 0, ErrorCode::InvalidArgument, "frame rate must be > 0");
  require(max_stance_frames >= 8, ErrorCode::InvalidArgument, "max stance frames must be >= 8");
}

void GaitProfile::validate() const {
  const auto n = joints.size();
  require(n > 0 && amplitude.size() == n && phase.size() == n && offset.size() == n &&
              fatigue.amplitude_scale.size() == n && fatigue.baseline_shift.size() == n,
          ErrorCode::InvalidArgument, "gait profile per-joint arrays disagree in length");
  for (std::size_t j = 0; j < n; ++j) {
    require(amplitude[j] > 0, ErrorCode::InvalidArgument, "gait amplitudes must be > 0");
    require(fatigue.amplitude_scale[j] > 0 && fatigue.amplitude_scale[j] <= 2.0, ErrorCode::InvalidArgument,
            "fatigue amplitude scale must lie in (0, 2]");
  }
  require(stance_period_mean >= 8, ErrorCode::InvalidArgument, "stance period mean must be >= 8 frames");
  require(stance_period_jitter >= 0, ErrorCode::InvalidArgument, "stance jitter must be >= 0");
  require(fatigue.jitter_multiplier >= 1, ErrorCode::InvalidArgument, "fatigue jitter multiplier must be >= 1");
  require(step_length > 0 && fatigue.step_scale > 0, ErrorCode::InvalidArgument, "step length must be > 0");
  require(std::find(joints.begin(), joints.end(), contact_channel) != joints.end(), ErrorCode::InvalidArgument,
          "contact channel is not a profile joint");
}

double GaitProfile::offset_in(Index joint, FatigueState state) const {
  auto j = static_cast<std::size_t>(joint);
  return offset.at(j) + (state == FatigueState::Fatigued ? fatigue.baseline_shift.at(j) : 0.0);
}

double GaitProfile::amplitude_in(Index joint, FatigueState state) const {
  auto j = static_cast<std::size_t>(joint);
  return amplitude.at(j) * (state == FatigueState::Fatigued ? fatigue.amplitude_scale.at(j) : 1.0);
}

Index GaitProfile::joint_index(const std::string& name) const {
  auto it = std::find(joints.begin(), joints.end(), name);
  require(it != joints.end(), ErrorCode::InvalidArgument, "unknown joint '" + name + "'");
  return static_cast<Index>(it - joints.begin());
}

GaitProfile generate_subject_profile(std::uint64_t seed, SubjectId subject, const GeneratorConfig& config) {
  config.validate();
  require(subject.value >= 0, ErrorCode::InvalidArgument, "subject id must be >= 0");
  Rng rng(derive_seed(seed, 0x5ull, static_cast<std::uint64_t>(subject.value)));
  auto draw = [&](const Range& r) { return uniform(rng, r.min, r.max); };

  GaitProfile p;
  p.subject = subject;
  p.contact_channel = config.contact_channel;
  for (const auto& j : config.joints) {
    p.joints.push_back(j.name);
    p.amplitude.push_back(draw(j.amplitude));
    p.phase.push_back(j.name == config.contact_channel ? 0.0 : draw(j.phase));
    p.offset.push_back(draw(j.offset));
  }
  for (const auto& j : config.joints) {
    p.fatigue.amplitude_scale.push_back(draw(j.fatigue_scale));
    double shift = draw(j.fatigue_shift);
    if (j.shift_random_sign && uniform(rng, 0.0, 1.0) < 0.5) shift = -shift;
    p.fatigue.baseline_shift.push_back(shift);
  }
  p.stance_period_mean = draw(config.stance_period_mean);
  p.stance_period_jitter = draw(config.stance_period_jitter);
  p.fatigue.jitter_multiplier = draw(config.jitter_multiplier);
  p.step_length = draw(config.step_length);
  p.fatigue.step_scale = draw(config.fatigue_step_scale);
  p.stride_amplitude_cv = config.stride_amplitude_cv;
  p.stride_offset_sd = config.stride_offset_sd;
  p.frame_rate = config.frame_rate;
  p.max_stance_frames = config.max_stance_frames;
  return p;
}

GeneratedGait generate_gait(const GaitProfile& profile, FatigueState state, Index n_strides, std::uint64_t seed) {
  profile.validate();
  require(n_strides >= 2, ErrorCode::InvalidArgument, "n_strides must be >= 2");
  const bool fatigued = state == FatigueState::Fatigued;
  Rng rng(derive_seed(seed, 0x6a17ull, static_cast<std::uint64_t>(profile.subject.value),
                      fatigued ? 1ull : 0ull));
  const Index J = static_cast<Index>(profile.joints.size());
  const Index contact = profile.joint_index(profile.contact_channel);
  const double irregularity = fatigued ? profile.fatigue.jitter_multiplier : 1.0;
  const double jitter = profile.stance_period_jitter * irregularity;
  const double stride_cv = profile.stride_amplitude_cv * std::sqrt(irregularity);
  const double stride_sd = profile.stride_offset_sd * std::sqrt(irregularity);
  const double step = profile.step_length * (fatigued ? profile.fatigue.step_scale : 1.0);

  std::vector<Index> durations;
  for (Index s = 0; s < n_strides; ++s) {
    double d = std::round(profile.stance_period_mean + jitter * standard_normal(rng));
    durations.push_back(std::clamp<Index>(static_cast<Index>(d), 8, profile.max_stance_frames));
  }
  auto seg = StanceSegmentation::from_durations(durations);

  // Per-stride amplitude and offset knots; stance s blends knot s into knot
  // s+1 over its phase so the signal stays continuous across stance joins.
  std::vector<std::vector<double>> amp_knots, off_knots;
  for (Index s = 0; s <= n_strides; ++s) {
    std::vector<double> amp(static_cast<std::size_t>(J)), off(static_cast<std::size_t>(J));
    for (Index j = 0; j < J; ++j) {
      const double a_scale = 1.0 + stride_cv * standard_normal(rng);
      const double o_drift = stride_sd * standard_normal(rng);
      amp[static_cast<std::size_t>(j)] = profile.amplitude_in(j, state) * std::max(a_scale, 0.1);
      // The contact channel keeps its exact offset so every stance begins on a threshold crossing.
      off[static_cast<std::size_t>(j)] = profile.offset_in(j, state) + (j == contact ? 0.0 : o_drift);
    }
    amp_knots.push_back(std::move(amp));
    off_knots.push_back(std::move(off));
  }

  Matrix data(seg.total_frames(), J + 3);
  double root_x = 0.0;
  for (Index s = 0; s < n_strides; ++s) {
    const Index d = durations[static_cast<std::size_t>(s)];
    const Index start = seg.start(s);
    const auto& a0 = amp_knots[static_cast<std::size_t>(s)];
    const auto& a1 = amp_knots[static_cast<std::size_t>(s) + 1];
    const auto& o0 = off_knots[static_cast<std::size_t>(s)];
    const auto& o1 = off_knots[static_cast<std::size_t>(s) + 1];
    for (Index i = 0; i < d; ++i) {
      const double phi = static_cast<double>(i) / static_cast<double>(d);
      const double arg = 2.0 * std::numbers::pi * phi;
      for (Index j = 0; j < J; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const double amp = a0[jj] + (a1[jj] - a0[jj]) * phi;
        const double off = o0[jj] + (o1[jj] - o0[jj]) * phi;
        data(start + i, j) = off + amp * std::sin(arg + profile.phase[jj]);
      }
      data(start + i, J) = root_x + step * phi;
      data(start + i, J + 1) = 0.92 + 0.02 * std::sin(2.0 * arg);
      data(start + i, J + 2) = 0.02 * std::sin(arg);
    }
    root_x += step;
  }
  return {MotionSequence(ChannelSpec::motion(profile.joints), std::move(data), profile.frame_rate), std::move(seg)};
}

Index DatasetSplit::first_validation_stance(Index stance_count) const {
  if (validation_fraction <= 0.0) return stance_count;
  auto held = static_cast<Index>(std::ceil(validation_fraction * static_cast<double>(stance_count)));
  held = std::clamp<Index>(held, 1, std::max<Index>(stance_count - 1, 1));
  return stance_count - held;
}

const SubjectRecord& DatasetBundle::subject(SubjectId id) const {
  for (const auto& s : subjects)
    if (s.subject == id) return s;
  fail(ErrorCode::UnknownLabel, "subject " + std::to_string(id.value) + " not in dataset");
}

void DatasetBundle::validate() const {
  require(!subjects.empty(), ErrorCode::InvalidArgument, "dataset is empty");
  const auto& ref = subjects.front().nonfatigued.channels();
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& s = subjects[i];
    require(s.subject.value == static_cast<int>(i), ErrorCode::InvalidArgument,
            "subject ids must be contiguous from 0");
    require(s.nonfatigued.channels() == ref && s.fatigued.channels() == ref, ErrorCode::ShapeMismatch,
            "channel mismatch for subject " + std::to_string(s.subject.value));
    require(s.segmentation_nf.total_frames() == s.nonfatigued.frames() &&
                s.segmentation_f.total_frames() == s.fatigued.frames(),
            ErrorCode::Segmentation, "segmentation does not cover subject " + std::to_string(s.subject.value));
  }
}

DatasetBundle build_dataset(int n_subjects, Index n_strides, std::uint64_t seed, const GeneratorConfig& config) {
  require(n_subjects >= 2, ErrorCode::InvalidArgument,
          "n_subjects must be >= 2 (fusion needs at least two fatigue profiles)");
  DatasetBundle bundle;
  bundle.seed = seed;
  bundle.n_strides = n_strides;
  bundle.config = config;
  for (int i = 0; i < n_subjects; ++i) {
    auto profile = generate_subject_profile(seed, SubjectId{i}, config);
    auto nf = generate_gait(profile, FatigueState::NonFatigued, n_strides, seed);
    auto f = generate_gait(profile, FatigueState::Fatigued, n_strides, seed);
    bundle.subjects.push_back(SubjectRecord{SubjectId{i}, std::move(nf.motion), std::move(f.motion),
                                            std::move(nf.segmentation), std::move(f.segmentation), profile});
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Manifest (de)serialization

namespace {

json range_json(const Range& r) { return json::array({r.min, r.max}); }
Range range_from(const json& j) { return Range{j.at(0).get<double>(), j.at(1).get<double>()}; }

json config_json(const GeneratorConfig& c) {
  json joints = json::array();
  for (const auto& j : c.joints)
    joints.push_back({{"name", j.name},
                      {"amplitude", range_json(j.amplitude)},
                      {"phase", range_json(j.phase)},
                      {"offset", range_json(j.offset)},
                      {"fatigue_scale", range_json(j.fatigue_scale)},
                      {"fatigue_shift", range_json(j.fatigue_shift)},
                      {"shift_random_sign", j.shift_random_sign}});
  return {{"joints", joints},
          {"contact_channel", c.contact_channel},
          {"stance_period_mean", range_json(c.stance_period_mean)},
          {"stance_period_jitter", range_json(c.stance_period_jitter)},
          {"jitter_multiplier", range_json(c.jitter_multiplier)},
          {"step_length", range_json(c.step_length)},
          {"fatigue_step_scale", range_json(c.fatigue_step_scale)},
          {"stride_amplitude_cv", c.stride_amplitude_cv},
          {"stride_offset_sd", c.stride_offset_sd},
          {"frame_rate", c.frame_rate},
          {"max_stance_frames", c.max_stance_frames}};
}

GeneratorConfig config_from(const json& j) {
  GeneratorConfig c;
  for (const auto& jj : j.at("joints"))
    c.joints.push_back({jj.at("name").get<std::string>(), range_from(jj.at("amplitude")), range_from(jj.at("phase")),
                        range_from(jj.at("offset")), range_from(jj.at("fatigue_scale")),
                        range_from(jj.at("fatigue_shift")), jj.at("shift_random_sign").get<bool>()});
  c.contact_channel = j.at("contact_channel").get<std::string>();
  c.stance_period_mean = range_from(j.at("stance_period_mean"));
  c.stance_period_jitter = range_from(j.at("stance_period_jitter"));
  c.jitter_multiplier = range_from(j.at("jitter_multiplier"));
  c.step_length = range_from(j.at("step_length"));
  c.fatigue_step_scale = range_from(j.at("fatigue_step_scale"));
  c.stride_amplitude_cv = j.at("stride_amplitude_cv").get<double>();
  c.stride_offset_sd = j.at("stride_offset_sd").get<double>();
  c.frame_rate = j.at("frame_rate").get<double>();
  c.max_stance_frames = j.at("max_stance_frames").get<Index>();
  return c;
}

json profile_json(const GaitProfile& p) {
  return {{"subject", p.subject.value},
          {"joints", p.joints},
          {"amplitude", p.amplitude},
          {"phase", p.phase},
          {"offset", p.offset},
          {"stance_period_mean", p.stance_period_mean},
          {"stance_period_jitter", p.stance_period_jitter},
          {"stride_amplitude_cv", p.stride_amplitude_cv},
          {"stride_offset_sd", p.stride_offset_sd},
          {"step_length", p.step_length},
          {"frame_rate", p.frame_rate},
          {"max_stance_frames", p.max_stance_frames},
          {"contact_channel", p.contact_channel},
          {"fatigue",
           {{"amplitude_scale", p.fatigue.amplitude_scale},
            {"baseline_shift", p.fatigue.baseline_shift},
            {"jitter_multiplier", p.fatigue.jitter_multiplier},
            {"step_scale", p.fatigue.step_scale}}}};
}

GaitProfile profile_from(const json& j) {
  GaitProfile p;
  p.subject = SubjectId{j.at("subject").get<int>()};
  p.joints = j.at("joints").get<std::vector<std::string>>();
  p.amplitude = j.at("amplitude").get<std::vector<double>>();
  p.phase = j.at("phase").get<std::vector<double>>();
  p.offset = j.at("offset").get<std::vector<double>>();
  p.stance_period_mean = j.at("stance_period_mean").get<double>();
  p.stance_period_jitter = j.at("stance_period_jitter").get<double>();
  p.stride_amplitude_cv = j.at("stride_amplitude_cv").get<double>();
  p.stride_offset_sd = j.at("stride_offset_sd").get<double>();
  p.step_length = j.at("step_length").get<double>();
  p.frame_rate = j.at("frame_rate").get<double>();
  p.max_stance_frames = j.at("max_stance_frames").get<Index>();
  p.contact_channel = j.at("contact_channel").get<std::string>();
  const auto& f = j.at("fatigue");
  p.fatigue.amplitude_scale = f.at("amplitude_scale").get<std::vector<double>>();
  p.fatigue.baseline_shift = f.at("baseline_shift").get<std::vector<double>>();
  p.fatigue.jitter_multiplier = f.at("jitter_multiplier").get<double>();
  p.fatigue.step_scale = f.at("step_scale").get<double>();
  return p;
}

std::string subject_file(int id, FatigueState s) {
  return "subject_" + std::to_string(id) + "/" + std::string(state_name(s)) + ".csv";
}

}  // namespace

void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  bundle.validate();
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    require(force, ErrorCode::Io, "output directory " + dir.string() + " is not empty (use --force)");
  }
  fs::create_directories(dir);

  json entries = json::array();
  json profiles = json::array();
  for (const auto& s : bundle.subjects) {
    fs::create_directories(dir / ("subject_" + std::to_string(s.subject.value)));
    for (auto state : {FatigueState::NonFatigued, FatigueState::Fatigued}) {
      const auto rel = subject_file(s.subject.value, state);
      save_motion_csv(s.motion(state), dir / rel);
      entries.push_back({{"subject", s.subject.value},
                         {"state", std::string(state_name(state))},
                         {"file", rel},
                         {"boundaries", s.segmentation(state).boundaries()}});
    }
    if (s.profile) profiles.push_back(profile_json(*s.profile));
  }
  json manifest = {{"schema", "fatiguefusion.dataset/1"},
                   {"seed", bundle.seed},
                   {"n_strides", bundle.n_strides},
                   {"split", {{"validation_fraction", bundle.split.validation_fraction}}},
                   {"entries", entries}};
  if (bundle.config) {
    manifest["config"] = config_json(*bundle.config);
    manifest["segmentation"] = {{"method", "threshold"},
                                {"contact_channel", bundle.config->contact_channel},
                                {"hysteresis", 2},
                                {"min_stance_frames", 4}};
  }
  if (!profiles.empty()) manifest["profiles"] = profiles;
  io::write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetBundle ingest_external_csv(const std::filesystem::path& dir, const std::filesystem::path& manifest_path) {
  const auto mpath = manifest_path.is_absolute() ? manifest_path : dir / manifest_path;
  json m;
  try {
    m = json::parse(io::read_text(mpath));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, mpath.string() + ": " + e.what());
  }

  try {
    DatasetBundle bundle;
    bundle.seed = m.value("seed", std::uint64_t{0});
    bundle.n_strides = m.value("n_strides", Index{0});
    if (m.contains("split")) bundle.split.validation_fraction = m["split"].value("validation_fraction", 0.2);
    if (m.contains("config")) bundle.config = config_from(m["config"]);

    SegmentationParams seg_defaults;
    if (m.contains("segmentation")) {
      const auto& s = m["segmentation"];
      seg_defaults.contact_channel = s.value("contact_channel", std::string{});
      seg_defaults.hysteresis = s.value("hysteresis", Index{2});
      seg_defaults.min_stance_frames = s.value("min_stance_frames", Index{4});
    }

    std::map<int, GaitProfile> profiles;
    if (m.contains("profiles"))
      for (const auto& p : m["profiles"]) {
        auto gp = profile_from(p);
        profiles.emplace(gp.subject.value, gp);
      }

    struct Loaded {
      MotionSequence motion;
      StanceSegmentation seg;
    };
    std::map<int, std::map<FatigueState, Loaded>> loaded;
    std::optional<ChannelSpec> channels;
    for (const auto& e : m.at("entries")) {
      const int id = e.at("subject").get<int>();
      const auto state_s = e.at("state").get<std::string>();
      require(state_s == "nonfatigued" || state_s == "fatigued", ErrorCode::Parse, "unknown state '" + state_s + "'");
      const auto state = state_s == "fatigued" ? FatigueState::Fatigued : FatigueState::NonFatigued;
      auto motion = load_motion_csv(dir / e.at("file").get<std::string>());
      if (!channels) channels = motion.channels();
      require(motion.channels() == *channels, ErrorCode::ShapeMismatch,
              "channel mismatch in " + e.at("file").get<std::string>());
      SegmentationParams sp = seg_defaults;
      if (e.contains("boundaries")) {
        sp.method = SegmentationMethod::Provided;
        sp.boundaries = e["boundaries"].get<std::vector<Index>>();
      } else {
        sp.method = SegmentationMethod::Threshold;
        sp.threshold = e.at("threshold").get<double>();
        if (e.contains("contact_channel")) sp.contact_channel = e["contact_channel"].get<std::string>();
      }
      auto seg = segment_stances(motion, sp);
      require(loaded[id].emplace(state, Loaded{std::move(motion), std::move(seg)}).second, ErrorCode::Parse,
              "duplicate manifest entry for subject " + std::to_string(id) + " (" + state_s + ")");
    }

    int expected = 0;
    for (auto& [id, states] : loaded) {
      require(id == expected++, ErrorCode::InvalidArgument, "subject ids must be contiguous from 0");
      for (auto st : {FatigueState::NonFatigued, FatigueState::Fatigued})
        require(states.count(st) == 1, ErrorCode::InvalidArgument,
                "subject " + std::to_string(id) + " is missing its " + std::string(state_name(st)) + " file");
      auto& nf = states.at(FatigueState::NonFatigued);
      auto& f = states.at(FatigueState::Fatigued);
      std::optional<GaitProfile> prof;
      if (auto it = profiles.find(id); it != profiles.end()) prof = it->second;
      bundle.subjects.push_back(SubjectRecord{SubjectId{id}, std::move(nf.motion), std::move(f.motion),
                                              std::move(nf.seg), std::move(f.seg), std::move(prof)});
    }
    bundle.validate();
    return bundle;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, mpath.string() + ": " + e.what());
  }
}

}  // namespace ff
