#include "ff/motion.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ff {

ChannelSpec::ChannelSpec(std::vector<std::string> names, std::vector<ChannelKind> kinds)
    : names_(std::move(names)), kinds_(std::move(kinds)) {
  require(!names_.empty(), ErrorCode::InvalidArgument, "channel list is empty");
  require(names_.size() == kinds_.size(), ErrorCode::InvalidArgument, "channel names/kinds length mismatch");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    require(!n.empty(), ErrorCode::InvalidArgument, "empty channel name");
    require(seen.insert(n).second, ErrorCode::InvalidArgument, "duplicate channel name '" + n + "'");
  }
}

ChannelSpec ChannelSpec::motion(const std::vector<std::string>& joints) {
  std::vector<std::string> names = joints;
  std::vector<ChannelKind> kinds(joints.size(), ChannelKind::JointAngle);
  for (const char* r : {"root_x", "root_y", "root_z"}) {
    names.emplace_back(r);
    kinds.push_back(ChannelKind::RootTranslation);
  }
  return ChannelSpec(std::move(names), std::move(kinds));
}

ChannelSpec ChannelSpec::joints_only(const std::vector<std::string>& joints) {
  return ChannelSpec(joints, std::vector<ChannelKind>(joints.size(), ChannelKind::JointAngle));
}

std::vector<Index> ChannelSpec::joint_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (kinds_[static_cast<std::size_t>(i)] == ChannelKind::JointAngle) out.push_back(i);
  return out;
}

std::vector<Index> ChannelSpec::root_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (kinds_[static_cast<std::size_t>(i)] == ChannelKind::RootTranslation) out.push_back(i);
  return out;
}

std::vector<std::string> ChannelSpec::joint_names() const {
  std::vector<std::string> out;
  for (auto i : joint_indices()) out.push_back(name(i));
  return out;
}

Index ChannelSpec::joint_count() const { return static_cast<Index>(joint_indices().size()); }

std::optional<Index> ChannelSpec::index_of(const std::string& n) const {
  auto it = std::find(names_.begin(), names_.end(), n);
  if (it == names_.end()) return std::nullopt;
  return static_cast<Index>(it - names_.begin());
}

namespace {

void check_finite(const Matrix& data, const ChannelSpec& channels) {
  for (Index r = 0; r < data.rows(); ++r)
    for (Index c = 0; c < data.cols(); ++c)
      if (!std::isfinite(data(r, c)))
        fail(ErrorCode::NonFinite, "non-finite value at row " + std::to_string(r) + ", column '" +
                                       channels.name(c) + "'");
}

Matrix select_columns(const Matrix& data, const std::vector<Index>& cols) {
  Matrix out(data.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = data.col(cols[k]);
  return out;
}

}  // namespace

MotionSequence::MotionSequence(ChannelSpec channels, Matrix data, double frame_rate)
    : channels_(std::move(channels)), data_(std::move(data)), frame_rate_(frame_rate) {
  require(channels_.size() > 0, ErrorCode::InvalidArgument, "motion sequence has no channels");
  require(channels_.root_indices().size() == 3, ErrorCode::InvalidArgument,
          "motion channel spec needs exactly 3 root translation channels");
  require(data_.cols() == channels_.size(), ErrorCode::ShapeMismatch,
          "data has " + std::to_string(data_.cols()) + " columns, channel spec has " +
              std::to_string(channels_.size()));
  require(data_.rows() >= 1, ErrorCode::InvalidArgument, "motion sequence has no frames");
  require(std::isfinite(frame_rate_) && frame_rate_ > 0, ErrorCode::InvalidArgument, "frame rate must be positive");
  check_finite(data_, channels_);
  for (auto c : channels_.joint_indices())
    for (Index r = 0; r < data_.rows(); ++r)
      if (std::abs(data_(r, c)) > 360.0)
        fail(ErrorCode::InvalidArgument, "joint angle out of [-360, 360] at row " + std::to_string(r) +
                                             ", column '" + channels_.name(c) + "'");
}

Matrix MotionSequence::joint_data() const { return select_columns(data_, channels_.joint_indices()); }
Matrix MotionSequence::root_data() const { return select_columns(data_, channels_.root_indices()); }

TorqueSequence::TorqueSequence(ChannelSpec channels, Matrix data, double frame_rate)
    : channels_(std::move(channels)), data_(std::move(data)), frame_rate_(frame_rate) {
  require(channels_.size() > 0, ErrorCode::InvalidArgument, "torque sequence has no channels");
  require(channels_.root_indices().empty(), ErrorCode::InvalidArgument, "torque channels must be joint-only");
  require(data_.cols() == channels_.size(), ErrorCode::ShapeMismatch, "torque data/channel count mismatch");
  require(data_.rows() >= 1, ErrorCode::InvalidArgument, "torque sequence has no frames");
  require(std::isfinite(frame_rate_) && frame_rate_ > 0, ErrorCode::InvalidArgument, "frame rate must be positive");
  check_finite(data_, channels_);
}

StanceSegmentation::StanceSegmentation(std::vector<Index> boundaries, Index total_frames)
    : boundaries_(std::move(boundaries)), total_frames_(total_frames) {
  require(!boundaries_.empty(), ErrorCode::Segmentation, "segmentation has no boundaries");
  require(boundaries_.front() == 0, ErrorCode::Segmentation, "first stance boundary must be frame 0");
  for (std::size_t i = 1; i < boundaries_.size(); ++i)
    require(boundaries_[i] > boundaries_[i - 1], ErrorCode::Segmentation, "stance boundaries must strictly increase");
  require(boundaries_.back() < total_frames_, ErrorCode::Segmentation, "stance boundary beyond sequence end");
}

StanceSegmentation StanceSegmentation::from_durations(const std::vector<Index>& durations) {
  require(!durations.empty(), ErrorCode::Segmentation, "no stance durations given");
  std::vector<Index> b;
  Index acc = 0;
  for (auto d : durations) {
    require(d >= 1, ErrorCode::Segmentation, "stance duration must be positive");
    b.push_back(acc);
    acc += d;
  }
  return StanceSegmentation(std::move(b), acc);
}

std::vector<Index> StanceSegmentation::durations() const {
  std::vector<Index> d;
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    Index end = i + 1 < boundaries_.size() ? boundaries_[i + 1] : total_frames_;
    d.push_back(end - boundaries_[i]);
  }
  return d;
}

Index StanceSegmentation::duration(Index s) const {
  auto i = static_cast<std::size_t>(s);
  Index end = i + 1 < boundaries_.size() ? boundaries_[i + 1] : total_frames_;
  return end - boundaries_.at(i);
}

void validate_fusion_weights(const std::vector<double>& weights) {
  require(!weights.empty(), ErrorCode::Weights, "fusion weights are empty");
  double sum = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::Weights, "fusion weights must be finite and >= 0");
    sum += w;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::Weights,
          "fusion weights must sum to 1 (got " + io::format_double(sum) + ")");
}

void ControlParams::validate(int n_subjects) const {
  require(label.value >= 0 && label.value < n_subjects, ErrorCode::UnknownLabel,
          "subject label " + std::to_string(label.value) + " outside [0, " + std::to_string(n_subjects) + ")");
  validate_fusion_weights(fusion_weights);
  for (auto k : tempo) require(k >= 2, ErrorCode::InvalidArgument, "tempo durations must be >= 2 frames");
  require(intensity_floor >= 0.0 && intensity_floor <= 1.0, ErrorCode::InvalidArgument,
          "intensity floor u must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct ParsedCsv {
  double frame_rate = 0;
  std::vector<std::string> names;
  std::vector<std::string> suffixes;
  Matrix data;
};

ParsedCsv parse_csv(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  std::vector<std::string_view> lines;
  for (auto l : io::split(text, '\n')) lines.push_back(l);
  while (!lines.empty() && io::trim(lines.back()).empty()) lines.pop_back();
  require(lines.size() >= 2, ErrorCode::Parse, path.string() + ": missing header lines");

  ParsedCsv out;
  auto first = io::trim(lines[0]);
  constexpr std::string_view kRate = "# frame_rate=";
  require(first.substr(0, kRate.size()) == kRate, ErrorCode::Parse,
          path.string() + ": line 1 must be '# frame_rate=<Hz>'");
  require(io::parse_double(first.substr(kRate.size()), out.frame_rate) && out.frame_rate > 0, ErrorCode::Parse,
          path.string() + ": bad frame rate");

  for (auto tok : io::split(lines[1], ',')) {
    tok = io::trim(tok);
    auto colon = tok.rfind(':');
    require(colon != std::string_view::npos, ErrorCode::Parse,
            path.string() + ": channel '" + std::string(tok) + "' lacks a :angle/:root/:torque suffix");
    out.names.emplace_back(tok.substr(0, colon));
    out.suffixes.emplace_back(tok.substr(colon + 1));
  }

  const auto cols = static_cast<Index>(out.names.size());
  out.data.resize(static_cast<Index>(lines.size() - 2), cols);
  for (std::size_t li = 2; li < lines.size(); ++li) {
    const auto row = static_cast<Index>(li - 2);
    auto cells = io::split(lines[li], ',');
    require(static_cast<Index>(cells.size()) == cols, ErrorCode::Parse,
            path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                " cells, expected " + std::to_string(cols));
    for (Index c = 0; c < cols; ++c) {
      double v = 0;
      if (!io::parse_double(cells[static_cast<std::size_t>(c)], v))
        fail(ErrorCode::Parse, path.string() + ": unparsable value at row " + std::to_string(row) + ", column '" +
                                   out.names[static_cast<std::size_t>(c)] + "'");
      if (!std::isfinite(v))
        fail(ErrorCode::NonFinite, path.string() + ": non-finite value at row " + std::to_string(row) +
                                       ", column '" + out.names[static_cast<std::size_t>(c)] + "'");
      out.data(row, c) = v;
    }
  }
  return out;
}

std::string render_csv(const ChannelSpec& channels, const Matrix& data, double frame_rate, bool torque) {
  require(channels.size() > 0, ErrorCode::InvalidArgument, "cannot save a sequence with no channels");
  std::string out = "# frame_rate=" + io::format_double(frame_rate) + "\n";
  for (Index c = 0; c < channels.size(); ++c) {
    if (c) out += ',';
    out += channels.name(c);
    if (torque)
      out += ":torque";
    else
      out += channels.kind(c) == ChannelKind::RootTranslation ? ":root" : ":angle";
  }
  out += '\n';
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      out += io::format_double(data(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace

MotionSequence load_motion_csv(const std::filesystem::path& path) {
  auto csv = parse_csv(path);
  std::vector<ChannelKind> kinds;
  for (const auto& s : csv.suffixes) {
    if (s == "angle")
      kinds.push_back(ChannelKind::JointAngle);
    else if (s == "root")
      kinds.push_back(ChannelKind::RootTranslation);
    else
      fail(ErrorCode::Parse, path.string() + ": unknown channel suffix ':" + s + "'");
  }
  return MotionSequence(ChannelSpec(std::move(csv.names), std::move(kinds)), std::move(csv.data), csv.frame_rate);
}

void save_motion_csv(const MotionSequence& seq, const std::filesystem::path& path) {
  io::write_text_atomic(path, render_csv(seq.channels(), seq.data(), seq.frame_rate(), false));
}

TorqueSequence load_torque_csv(const std::filesystem::path& path) {
  auto csv = parse_csv(path);
  for (const auto& s : csv.suffixes)
    require(s == "torque" || s == "angle", ErrorCode::Parse,
            path.string() + ": torque files accept only :torque channels (got ':" + s + "')");
  auto n = csv.names.size();
  return TorqueSequence(ChannelSpec(std::move(csv.names), std::vector<ChannelKind>(n, ChannelKind::JointAngle)),
                        std::move(csv.data), csv.frame_rate);
}

void save_torque_csv(const TorqueSequence& seq, const std::filesystem::path& path) {
  io::write_text_atomic(path, render_csv(seq.channels(), seq.data(), seq.frame_rate(), true));
}

// ---------------------------------------------------------------------------
// Stance segmentation

StanceSegmentation segment_stances(const MotionSequence& seq, const SegmentationParams& params) {
  const Index T = seq.frames();
  std::vector<Index> boundaries;
  if (params.method == SegmentationMethod::Provided) {
    boundaries = params.boundaries;
  } else {
    auto ch = seq.channels().index_of(params.contact_channel);
    require(ch.has_value(), ErrorCode::Segmentation, "contact channel '" + params.contact_channel + "' not found");
    require(params.hysteresis >= 1, ErrorCode::InvalidArgument, "hysteresis must be >= 1 frame");
    const auto s = seq.data().col(*ch);
    const double thr = params.threshold;
    boundaries.push_back(0);
    for (Index t = 1; t < T; ++t) {
      if (!(s(t - 1) < thr && s(t) >= thr)) continue;
      bool held = true;
      for (Index k = 0; k < params.hysteresis && t + k < T; ++k) held = held && s(t + k) >= thr;
      // crossings closer than a minimum stance to the previous boundary are contact chatter
      if (held && t - boundaries.back() >= params.min_stance_frames) boundaries.push_back(t);
    }
    if (boundaries.size() > 1 && T - boundaries.back() < params.min_stance_frames) boundaries.pop_back();
    require(boundaries.size() > 1, ErrorCode::Segmentation, "no boundary found on channel '" +
                                                                params.contact_channel + "'");
  }
  StanceSegmentation seg(std::move(boundaries), T);
  auto d = seg.durations();
  for (std::size_t i = 0; i < d.size(); ++i)
    require(d[i] >= params.min_stance_frames, ErrorCode::Segmentation,
            "stance " + std::to_string(i) + " has " + std::to_string(d[i]) + " frames, minimum is " +
                std::to_string(params.min_stance_frames));
  return seg;
}

}  // namespace ff
