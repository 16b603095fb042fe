#pragma once

#include "ff/intensity.hpp"
#include "ff/latent.hpp"
#include "ff/motion.hpp"
#include "ff/pipeline.hpp"
#include "ff/synth.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ff::metrics {

enum class Provenance { Real, Generated };

/// n x d feature rows.
struct FeatureSet {
  Matrix features;
  Provenance provenance = Provenance::Generated;

  Index size() const noexcept { return features.rows(); }
  Index dim() const noexcept { return features.cols(); }
};

/// Mean |a - b| over joint-angle entries.
double mae(const MotionSequence& a, const MotionSequence& b);
double mae(const Matrix& a, const Matrix& b);

/// Pearson r per joint channel, averaged. Zero-variance channels are skipped
/// with a warning; all skipped is an error.
double pearson_r2(const MotionSequence& a, const MotionSequence& b);
double pearson_r2(const Matrix& a, const Matrix& b);

struct FidResult {
  double value = 0.0;
  bool regularized = false;  // 1e-6 I added to both covariances (n <= d)
};

/// Frechet distance between Gaussian fits of two feature sets.
FidResult fid(const Matrix& real, const Matrix& gen);
FidResult fid(const FeatureSet& real, const FeatureSet& gen);

/// Mean distance over `n_pairs` seeded random pairs (i != j).
double diversity(const Matrix& features, Index n_pairs, std::uint64_t seed);
/// Mean distance over all unordered pairs.
double diversity_exhaustive(const Matrix& features);

/// One FusionAE latent per stance window of a normalized torque sequence.
FeatureSet extract_features(const TorqueSequence& normalized, const latent::FusionAeModel& encoder,
                            Provenance provenance = Provenance::Generated);
FeatureSet stack(const std::vector<FeatureSet>& sets);

/// Rows of labelled values under named columns; renders as JSON or an aligned table.
struct MetricReport {
  struct Row {
    std::string label;
    std::vector<std::optional<double>> values;
  };
  std::string title;
  std::vector<std::string> columns;
  std::vector<Row> rows;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> notes;
  nlohmann::json config;

  void add_row(std::string label, std::vector<std::optional<double>> values);
  std::optional<double> value(const std::string& row, const std::string& column) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Table-I style comparison of a generated motion against references.
MetricReport compare_motions(const MotionSequence& gen, const std::vector<MotionSequence>& refs,
                             const std::vector<std::string>& ref_names);

/// Ablation inputs in the tempo-normalized torque domain, one entry per subject.
struct AblationInputs {
  std::vector<TorqueSequence> nonfatigued;    // generation seeds (held-out stances)
  std::vector<TorqueSequence> real_fatigued;  // reference distribution
  std::vector<StanceSegmentation> tempo_nf;   // original stance timing of the inputs
  std::vector<StanceSegmentation> tempo_f;    // fatigued stance timing per subject
  double frame_rate = 128.0;
};

/// Held-out stances of every subject, truncated to a common stance count.
AblationInputs ablation_inputs(const pipeline::TorqueCorpus& corpus, const DatasetBundle& bundle);

struct AblationOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  Index diversity_pairs = 2000;
  Range fusion_weight{0.0, 0.5};  // weight on another subject's non-fatigued torques when the AE is on
  Range lambda{0.0, 1.0};
  Range floor{0.6, 1.0};
  intensity::CcParams rates{};
};

/// Rows: ground truth, then I..VI over {CVAE, AE, 3CC-lambda, Tempo}.
/// Columns: per-seed FID and Diversity, then their medians (and std with >1 seed).
MetricReport run_ablation(const AblationInputs& inputs, const latent::CvaeModel& cvae,
                          const latent::FusionAeModel& fusion, const AblationOptions& options);

struct AblationRow {
  const char* label;
  bool ae, intensity, tempo;
};
const std::vector<AblationRow>& ablation_rows();

}  // namespace ff::metrics
