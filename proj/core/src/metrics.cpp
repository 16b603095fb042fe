#include "ff/metrics.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"
#include "ff/pipeline.hpp"
#include "ff/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ff::metrics {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::ShapeMismatch,
          std::string(what) + ": shapes differ (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  require(a.size() > 0, ErrorCode::InvalidArgument, std::string(what) + ": empty input");
}

void require_same_joints(const MotionSequence& a, const MotionSequence& b) {
  require(a.channels().joint_names() == b.channels().joint_names(), ErrorCode::ShapeMismatch,
          "motions have different joint channels");
}

struct Gaussian {
  Eigen::RowVectorXd mean;
  Matrix cov;
};

Gaussian fit_gaussian(const Matrix& x) {
  require(x.rows() >= 2, ErrorCode::InvalidArgument, "FID needs at least 2 feature rows per set");
  Gaussian g;
  g.mean = x.colwise().mean();
  const Matrix c = x.rowwise() - g.mean;
  g.cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  return g;
}

Matrix sqrt_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(m)};
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double mae(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "MAE");
  return (a - b).cwiseAbs().mean();
}

double mae(const MotionSequence& a, const MotionSequence& b) {
  require_same_joints(a, b);
  return mae(a.joint_data(), b.joint_data());
}

double pearson_r2(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "Pearson r");
  double sum = 0.0;
  int used = 0;
  for (Index j = 0; j < a.cols(); ++j) {
    const Eigen::VectorXd x = a.col(j).array() - a.col(j).mean();
    const Eigen::VectorXd y = b.col(j).array() - b.col(j).mean();
    const double sx = x.norm(), sy = y.norm();
    if (sx <= 1e-12 || sy <= 1e-12) {
      warn("Pearson r: channel " + std::to_string(j) + " has zero variance; excluded");
      continue;
    }
    sum += x.dot(y) / (sx * sy);
    ++used;
  }
  require(used > 0, ErrorCode::InvalidArgument, "Pearson r: every channel has zero variance");
  return sum / used;
}

double pearson_r2(const MotionSequence& a, const MotionSequence& b) {
  require_same_joints(a, b);
  return pearson_r2(a.joint_data(), b.joint_data());
}

FidResult fid(const Matrix& real, const Matrix& gen) {
  require(real.cols() == gen.cols() && real.cols() > 0, ErrorCode::ShapeMismatch, "FID feature dimensions differ");
  require(real.allFinite() && gen.allFinite(), ErrorCode::NonFinite, "FID features contain non-finite values");
  Gaussian r = fit_gaussian(real), g = fit_gaussian(gen);
  FidResult out;
  const Index d = real.cols();
  if (real.rows() <= d || gen.rows() <= d) {
    r.cov += 1e-6 * Matrix::Identity(d, d);
    g.cov += 1e-6 * Matrix::Identity(d, d);
    out.regularized = true;
    warn("FID: " + std::to_string(std::min(real.rows(), gen.rows())) + " samples for " + std::to_string(d) +
         " dimensions; covariances regularized");
  }
  // tr sqrt(C_r C_g) = tr sqrt(C_r^1/2 C_g C_r^1/2), which is symmetric PSD
  const Matrix s = sqrt_psd(r.cov);
  const Matrix m = s * g.cov * s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(0.5 * (m + m.transpose())));
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  out.value = std::max(0.0, (r.mean - g.mean).squaredNorm() + r.cov.trace() + g.cov.trace() - 2.0 * tr_sqrt);
  return out;
}

FidResult fid(const FeatureSet& real, const FeatureSet& gen) { return fid(real.features, gen.features); }

double diversity(const Matrix& f, Index n_pairs, std::uint64_t seed) {
  require(f.rows() >= 2, ErrorCode::InvalidArgument, "diversity needs at least 2 feature rows");
  require(n_pairs >= 1, ErrorCode::InvalidArgument, "diversity needs at least one pair");
  Rng rng(seed);
  const auto n = static_cast<std::uint64_t>(f.rows());
  double sum = 0.0;
  for (Index p = 0; p < n_pairs; ++p) {
    const auto i = static_cast<Index>(uniform_index(rng, n));
    auto j = static_cast<Index>(uniform_index(rng, n - 1));
    if (j >= i) ++j;
    sum += (f.row(i) - f.row(j)).norm();
  }
  return sum / static_cast<double>(n_pairs);
}

double diversity_exhaustive(const Matrix& f) {
  require(f.rows() >= 2, ErrorCode::InvalidArgument, "diversity needs at least 2 feature rows");
  double sum = 0.0;
  for (Index i = 0; i < f.rows(); ++i)
    for (Index j = i + 1; j < f.rows(); ++j) sum += (f.row(i) - f.row(j)).norm();
  const double n = static_cast<double>(f.rows());
  return sum / (n * (n - 1.0) / 2.0);
}

FeatureSet extract_features(const TorqueSequence& normalized, const latent::FusionAeModel& encoder,
                            Provenance provenance) {
  return {encoder.encode_sequence(normalized.data()), provenance};
}

FeatureSet stack(const std::vector<FeatureSet>& sets) {
  require(!sets.empty(), ErrorCode::InvalidArgument, "no feature sets to stack");
  Index rows = 0;
  for (const auto& s : sets) {
    require(s.dim() == sets.front().dim(), ErrorCode::ShapeMismatch, "feature dimensions differ");
    rows += s.size();
  }
  FeatureSet out{Matrix(rows, sets.front().dim()), sets.front().provenance};
  Index r = 0;
  for (const auto& s : sets) {
    out.features.middleRows(r, s.size()) = s.features;
    r += s.size();
  }
  return out;
}

void MetricReport::add_row(std::string label, std::vector<std::optional<double>> values) {
  require(values.size() == columns.size(), ErrorCode::ShapeMismatch, "report row '" + label + "' has " +
                                                                         std::to_string(values.size()) + " values for " +
                                                                         std::to_string(columns.size()) + " columns");
  rows.push_back({std::move(label), std::move(values)});
}

std::optional<double> MetricReport::value(const std::string& row, const std::string& column) const {
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (c == columns.end()) return std::nullopt;
  for (const auto& r : rows)
    if (r.label == row) return r.values[static_cast<std::size_t>(c - columns.begin())];
  return std::nullopt;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["title"] = title;
  j["columns"] = columns;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json values = nlohmann::json::object();
    for (std::size_t c = 0; c < columns.size(); ++c)
      values[columns[c]] = r.values[c] ? nlohmann::json(*r.values[c]) : nlohmann::json(nullptr);
    j["rows"].push_back({{"label", r.label}, {"values", values}});
  }
  j["seeds"] = seeds;
  j["notes"] = notes;
  j["config"] = config.is_null() ? nlohmann::json::object() : config;
  return j;
}

std::string MetricReport::to_table() const {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({""});
  for (const auto& c : columns) cells.back().push_back(c);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.label};
    for (const auto& v : r.values) {
      if (!v) {
        line.emplace_back("-");
        continue;
      }
      std::ostringstream os;
      os.setf(std::ios::fixed);
      os.precision(std::abs(*v) < 0.01 && *v != 0.0 ? 6 : 3);
      os << *v;
      line.push_back(os.str());
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(columns.size() + 1, 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::ostringstream os;
  if (!title.empty()) os << title << '\n';
  for (std::size_t l = 0; l < cells.size(); ++l) {
    for (std::size_t c = 0; c < cells[l].size(); ++c) {
      const auto& s = cells[l][c];
      if (c == 0)
        os << s << std::string(width[c] - s.size(), ' ');
      else
        os << "  " << std::string(width[c] - s.size(), ' ') << s;
    }
    os << '\n';
    if (l == 0) {
      std::size_t total = width[0];
      for (std::size_t c = 1; c < width.size(); ++c) total += width[c] + 2;
      os << std::string(total, '-') << '\n';
    }
  }
  for (const auto& n : notes) os << "# " << n << '\n';
  return os.str();
}

MetricReport compare_motions(const MotionSequence& gen, const std::vector<MotionSequence>& refs,
                             const std::vector<std::string>& ref_names) {
  require(refs.size() == ref_names.size(), ErrorCode::InvalidArgument, "one name per reference motion is required");
  MetricReport report;
  report.title = "Comparison against references";
  report.columns = {"MAE", "R2"};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    require_same_joints(gen, refs[i]);
    const Index n = std::min(gen.frames(), refs[i].frames());
    if (n != gen.frames() || n != refs[i].frames())
      report.notes.push_back(ref_names[i] + ": compared over the first " + std::to_string(n) + " frames (" +
                             std::to_string(gen.frames()) + " vs " + std::to_string(refs[i].frames()) + ")");
    const Matrix a = gen.joint_data().topRows(n), b = refs[i].joint_data().topRows(n);
    report.add_row(ref_names[i], {mae(a, b), pearson_r2(a, b)});
  }
  return report;
}

const std::vector<AblationRow>& ablation_rows() {
  static const std::vector<AblationRow> rows{
      {"I", false, false, false},  {"II", true, false, false}, {"III", true, false, true},
      {"IV", false, true, false},  {"V", true, true, false},   {"VI", true, true, true},
  };
  return rows;
}

namespace {

int other_label(Rng& rng, int n_subjects, int exclude) {
  if (n_subjects < 2) return 0;
  auto l = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n_subjects - 1)));
  return l >= exclude ? l + 1 : l;
}

TorqueSequence generate(const AblationInputs& in, const latent::CvaeModel& cvae, const latent::FusionAeModel& fusion,
                        const AblationOptions& opt, const AblationRow& row, std::uint64_t seed, std::size_t subject) {
  // Same draws for every row so rows differ only by their components.
  Rng rng(derive_seed(seed, subject));
  const int n = cvae.config().n_subjects;
  const int a = static_cast<int>(subject);
  const int label = other_label(rng, n, a);
  const int second = other_label(rng, static_cast<int>(in.nonfatigued.size()), a);
  const double w = uniform(rng, opt.fusion_weight.min, opt.fusion_weight.max);
  const double u = uniform(rng, opt.floor.min, opt.floor.max);
  const TorqueSequence& t_nf = in.nonfatigued[subject];
  std::vector<double> lambda;
  for (Index j = 0; j < t_nf.data().cols(); ++j) lambda.push_back(uniform(rng, opt.lambda.min, opt.lambda.max));
  const std::uint64_t z = rng();

  TorqueSequence out = latent::cvae_generate(cvae, t_nf, SubjectId{label}, z);
  if (row.ae) {
    const TorqueSequence& partner = in.nonfatigued[static_cast<std::size_t>(second)];
    require(partner.frames() == out.frames(), ErrorCode::ShapeMismatch,
            "ablation inputs need equal stance counts across subjects");
    out = latent::fusion_pipeline(fusion, partner, out, {w, 1.0 - w});
  }
  if (row.intensity) {
    const Index n_norm = cvae.codec().n_norm;
    const Index stances = out.frames() / n_norm;
    const StanceSegmentation& timing =
        row.tempo ? in.tempo_f.at(static_cast<std::size_t>(label)) : in.tempo_nf.at(subject);
    const auto k = pipeline::fit_tempo(timing.durations(), stances);
    const auto dt =
        pipeline::normalized_step_sizes(StanceSegmentation::from_durations(k.durations), in.frame_rate, n_norm);
    const Matrix m_f = intensity::simulate_fatigue(intensity::target_load(out, t_nf), opt.rates, dt);
    out = intensity::apply_intensity(out, m_f, intensity::LambdaConfig{lambda},
                                     intensity::IntensityConfig{u, intensity::ShapingMode::RemainingCapacity});
  }
  return out;
}

}  // namespace

AblationInputs ablation_inputs(const pipeline::TorqueCorpus& corpus, const DatasetBundle& bundle) {
  require(!corpus.validation.empty() && corpus.validation.size() == bundle.subjects.size(), ErrorCode::InvalidArgument,
          "every subject needs held-out stances for the ablation");
  Index rows = corpus.validation.front().nonfatigued.rows();
  for (const auto& p : corpus.validation) rows = std::min(rows, p.nonfatigued.rows());
  AblationInputs in;
  const auto& channels = corpus.nonfatigued.front().channels();
  const double fr = corpus.nonfatigued.front().frame_rate();
  for (const auto& p : corpus.validation) {
    in.nonfatigued.emplace_back(channels, p.nonfatigued.topRows(rows), fr);
    in.real_fatigued.emplace_back(channels, p.fatigued.topRows(rows), fr);
    const auto& rec = bundle.subject(p.subject);
    in.tempo_nf.push_back(rec.segmentation_nf);
    in.tempo_f.push_back(rec.segmentation_f);
    in.frame_rate = rec.nonfatigued.frame_rate();
  }
  return in;
}

MetricReport run_ablation(const AblationInputs& in, const latent::CvaeModel& cvae, const latent::FusionAeModel& fusion,
                          const AblationOptions& opt) {
  const std::size_t n = in.nonfatigued.size();
  require(n >= 1 && in.real_fatigued.size() == n && in.tempo_nf.size() == n && in.tempo_f.size() == n,
          ErrorCode::ShapeMismatch, "ablation inputs need one entry per subject in every list");
  require(static_cast<int>(n) <= cvae.config().n_subjects, ErrorCode::UnknownLabel,
          "more ablation subjects than CVAE labels");
  require(!opt.seeds.empty(), ErrorCode::InvalidArgument, "ablation needs at least one seed");

  std::vector<FeatureSet> real_sets;
  for (const auto& t : in.real_fatigued) real_sets.push_back(extract_features(t, fusion, Provenance::Real));
  const FeatureSet real = stack(real_sets);

  MetricReport report;
  report.title = "Ablation (median over " + std::to_string(opt.seeds.size()) + " seeds)";
  report.seeds = opt.seeds;
  const bool spread = opt.seeds.size() > 1;
  report.columns = {"FID", "Diversity"};
  if (spread) report.columns.insert(report.columns.end(), {"FID std", "Diversity std"});
  for (auto s : opt.seeds) {
    report.columns.push_back("FID s" + std::to_string(s));
    report.columns.push_back("Diversity s" + std::to_string(s));
  }

  auto add = [&](const std::string& label, const std::vector<double>& f, const std::vector<double>& d) {
    std::vector<std::optional<double>> v{median(f), median(d)};
    if (spread) v.insert(v.end(), {stddev(f), stddev(d)});
    for (std::size_t i = 0; i < f.size(); ++i) v.insert(v.end(), {f[i], d[i]});
    report.add_row(label, std::move(v));
  };

  {
    std::vector<double> f, d;
    for (auto s : opt.seeds) {
      f.push_back(fid(real, real).value);
      d.push_back(diversity(real.features, opt.diversity_pairs, derive_seed(s, 0xd1)));
    }
    add("GT", f, d);
  }
  for (const auto& row : ablation_rows()) {
    std::vector<double> f, d;
    for (auto s : opt.seeds) {
      std::vector<FeatureSet> sets;
      for (std::size_t i = 0; i < n; ++i) sets.push_back(extract_features(generate(in, cvae, fusion, opt, row, s, i), fusion));
      const FeatureSet gen = stack(sets);
      f.push_back(fid(real, gen).value);
      d.push_back(diversity(gen.features, opt.diversity_pairs, derive_seed(s, 0xd1)));
    }
    std::string label = std::string(row.label) + " CVAE";
    if (row.ae) label += "+AE";
    if (row.intensity) label += "+3CC";
    if (row.tempo) label += "+Tempo";
    add(label, f, d);
  }
  report.notes.push_back("features: FusionAE latents of stance windows in the tempo-normalized torque domain");
  report.config = {{"subjects", n},
                   {"diversity_pairs", opt.diversity_pairs},
                   {"fusion_weight", {opt.fusion_weight.min, opt.fusion_weight.max}},
                   {"lambda", {opt.lambda.min, opt.lambda.max}},
                   {"floor", {opt.floor.min, opt.floor.max}}};
  return report;
}

}  // namespace ff::metrics
