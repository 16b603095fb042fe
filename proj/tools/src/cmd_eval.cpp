#include "common.hpp"

#include "ff/dynamics.hpp"
#include "ff/error.hpp"
#include "ff/io.hpp"
#include "ff/metrics.hpp"
#include "ff/pipeline.hpp"
#include "ff/synth.hpp"
#include "ff/tempo.hpp"

#include <iostream>
#include <memory>

namespace ffusion {

namespace {

struct EvalArgs {
  std::string gen;
  std::vector<std::string> refs;
  std::vector<std::string> ref_names;
  std::string align = "retime";
  std::string contact_channel = "knee_angle_r";
  std::string encoder;
  std::string id;
  std::string data;
  ff::Index pairs = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string series;
};

ff::StanceSegmentation segment(const ff::MotionSequence& m, const std::string& channel, const std::string& what) {
  const auto c = m.channels().index_of(channel);
  ff::require(c.has_value(), ff::ErrorCode::Segmentation, "contact channel '" + channel + "' not in " + what);
  ff::SegmentationParams p;
  p.contact_channel = channel;
  p.threshold = m.data().col(*c).mean();
  return ff::segment_stances(m, p);
}

/// Brings `gen` onto the stance timing of `ref`.
ff::MotionSequence retime_to(const ff::MotionSequence& gen, const ff::MotionSequence& ref, const std::string& channel) {
  if (gen.frames() == ref.frames()) return gen;
  const auto gseg = segment(gen, channel, "generated motion");
  const auto rseg = segment(ref, channel, "reference motion");
  const auto normalized = ff::tempo::encode_normalize(gen, gseg).first;
  const auto k = ff::pipeline::fit_tempo(rseg.durations(), gseg.stance_count());
  auto out = ff::tempo::retime(normalized, k);
  ff::require(out.frames() == ref.frames(), ff::ErrorCode::ShapeMismatch,
              "shape mismatch after retime: " + std::to_string(gseg.stance_count()) + " generated vs " +
                  std::to_string(rseg.stance_count()) + " reference stances");
  return out;
}

void export_series(const fs::path& dir, const ff::MotionSequence& gen, const std::vector<ff::MotionSequence>& refs,
                   const std::vector<std::string>& names) {
  fs::create_directories(dir);
  const auto joints = gen.channels().joint_indices();
  for (ff::Index j : joints) {
    std::vector<std::string> header{"frame", "generated"};
    std::vector<std::vector<double>> cols(2);
    for (ff::Index t = 0; t < gen.frames(); ++t) {
      cols[0].push_back(static_cast<double>(t));
      cols[1].push_back(gen.data()(t, j));
    }
    for (std::size_t r = 0; r < refs.size(); ++r) {
      header.push_back(names[r]);
      auto& c = cols.emplace_back();
      for (ff::Index t = 0; t < gen.frames(); ++t) c.push_back(refs[r].data()(t, j));
    }
    ff::io::write_table_csv(dir / (gen.channels().name(j) + ".csv"), header, cols);
  }
}

void run_eval(const EvalArgs& a, const CLI::App& sub) {
  RunManifest manifest("eval", sub);
  const auto gen = ff::load_motion_csv(a.gen);
  manifest.input(a.gen);
  std::vector<std::string> names = a.ref_names;
  ff::require(names.empty() || names.size() == a.refs.size(), ff::ErrorCode::InvalidArgument,
              "--ref-name needs one name per --ref");
  std::vector<ff::MotionSequence> refs, aligned;
  for (std::size_t i = 0; i < a.refs.size(); ++i) {
    refs.push_back(ff::load_motion_csv(a.refs[i]));
    manifest.input(a.refs[i]);
    if (a.ref_names.empty()) names.push_back(fs::path(a.refs[i]).stem().string());
    aligned.push_back(a.align == "retime" ? retime_to(gen, refs.back(), a.contact_channel) : gen);
  }

  ff::metrics::MetricReport report;
  report.title = "Generated vs references";
  report.columns = {"MAE", "R2", "FID", "Diversity"};
  report.seeds = {a.seed};
  std::unique_ptr<ff::dynamics::Surrogate> id;
  std::unique_ptr<ff::latent::FusionAeModel> encoder;
  std::optional<ff::metrics::FeatureSet> gen_features;
  auto features = [&](const ff::MotionSequence& m, ff::metrics::Provenance p) {
    const auto seg = segment(m, a.contact_channel, "motion");
    const auto t = ff::dynamics::infer_torques(*id, ff::tempo::encode_normalize(m, seg, encoder->codec().n_norm).first);
    return ff::metrics::extract_features(t, *encoder, p);
  };
  if (!a.encoder.empty()) {
    const fs::path data = a.data.empty() ? default_data_root() : fs::path(a.data);
    const fs::path id_path = a.id.empty() ? checkpoint_path(data, "id") : fs::path(a.id);
    ff::require(fs::exists(fs::path(id_path).concat(".json")), ff::ErrorCode::MissingCheckpoint,
                "FID features need the ID checkpoint '" + id_path.string() + "' (pass --id)");
    id = std::make_unique<ff::dynamics::Surrogate>(ff::dynamics::Surrogate::load(id_path));
    encoder = std::make_unique<ff::latent::FusionAeModel>(ff::latent::FusionAeModel::load(a.encoder));
    manifest.input(id_path);
    manifest.input(a.encoder);
    gen_features = features(gen, ff::metrics::Provenance::Generated);
  }

  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto sub_report = ff::metrics::compare_motions(aligned[i], {refs[i]}, {names[i]});
    std::optional<double> f;
    if (gen_features) f = ff::metrics::fid(features(refs[i], ff::metrics::Provenance::Real), *gen_features).value;
    report.add_row(names[i], {sub_report.rows[0].values[0], sub_report.rows[0].values[1], f, std::nullopt});
    for (const auto& n : sub_report.notes) report.notes.push_back(n);
  }
  if (gen_features)
    report.add_row("generated", {std::nullopt, std::nullopt, std::nullopt,
                                 ff::metrics::diversity(gen_features->features, a.pairs, a.seed)});
  report.notes.push_back("MAE (deg) and FID: lower is closer; R2 is the mean per-channel Pearson r, higher is more correlated");
  report.config = {{"align", a.align}, {"contact_channel", a.contact_channel}, {"diversity_pairs", a.pairs}};

  std::cout << report.to_table();
  if (!a.series.empty()) {
    export_series(a.series, aligned.empty() ? gen : aligned.front(), refs, names);
    manifest.output(a.series);
  }
  if (!a.out.empty()) {
    ff::io::write_text_atomic(a.out, report.to_json().dump(2) + "\n");
    fs::path txt = a.out;
    txt.replace_extension(".txt");
    ff::io::write_text_atomic(txt, report.to_table());
    manifest.output(a.out);
    manifest.output(txt);
    manifest.write(manifest_path_for(a.out, false));
  }
}

struct AblateArgs {
  std::string data;
  std::string checkpoints;
  std::string seeds = "1,2,3,4,5";
  ff::Index pairs = ff::metrics::AblationOptions{}.diversity_pairs;
  std::string out;
};

void run_ablate(const AblateArgs& a, const CLI::App& sub) {
  RunManifest manifest("ablate", sub);
  const fs::path data = a.data.empty() ? default_data_root() : fs::path(a.data);
  const fs::path ck = a.checkpoints.empty() ? data / "checkpoints" : fs::path(a.checkpoints);
  std::string missing;
  for (const char* name : {"id", "cvae", "fusionae"})
    if (!fs::exists(ck / (std::string(name) + ".json"))) missing += std::string(missing.empty() ? "" : ", ") + name;
  ff::require(missing.empty(), ff::ErrorCode::MissingCheckpoint,
              "missing checkpoints in " + ck.string() + ": " + missing);

  ff::metrics::AblationOptions opt;
  opt.seeds = parse_seeds(a.seeds);
  opt.diversity_pairs = a.pairs;
  const auto bundle = ff::ingest_external_csv(data);
  const auto id = ff::dynamics::Surrogate::load(ck / "id");
  const auto cvae = ff::latent::CvaeModel::load(ck / "cvae");
  const auto fusion = ff::latent::FusionAeModel::load(ck / "fusionae");
  const auto corpus = ff::pipeline::build_torque_corpus(bundle, &id, cvae.codec().n_norm);
  auto report = ff::metrics::run_ablation(ff::metrics::ablation_inputs(corpus, bundle), cvae, fusion, opt);

  std::cout << report.to_table();
  const fs::path out = a.out.empty() ? data / "ablation.json" : fs::path(a.out);
  ff::io::write_text_atomic(out, report.to_json().dump(2) + "\n");
  fs::path txt = out;
  txt.replace_extension(".txt");
  ff::io::write_text_atomic(txt, report.to_table());
  manifest.input(data);
  for (const char* name : {"id", "cvae", "fusionae"}) manifest.input(ck / name);
  for (auto s : opt.seeds) manifest.seed(s);
  manifest.output(out);
  manifest.output(txt);
  manifest.write(manifest_path_for(out, false));
}

}  // namespace

void register_eval(CLI::App& app) {
  auto a = std::make_shared<EvalArgs>();
  auto* sub = app.add_subcommand("eval", "MAE / R2 (and FID with an encoder) of a generated motion");
  sub->add_option("--gen", a->gen, "Generated motion CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--ref", a->refs, "Reference motion CSV(s)")->required()->check(CLI::ExistingFile);
  sub->add_option("--ref-name", a->ref_names, "Display name per reference (default: file stem)");
  sub->add_option("--align", a->align, "How to match frame counts")->capture_default_str()->check(CLI::IsMember({"retime", "truncate"}));
  sub->add_option("--contact-channel", a->contact_channel, "Channel used to segment stances")->capture_default_str();
  sub->add_option("--features-encoder", a->encoder, "FusionAE checkpoint for FID / Diversity features");
  sub->add_option("--id", a->id, "ID checkpoint for feature torques (default: <data>/checkpoints/id)");
  sub->add_option("--data", a->data, "Data root for default checkpoints");
  sub->add_option("--pairs", a->pairs, "Diversity pairs")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", a->seed, "Diversity pair seed")->capture_default_str();
  sub->add_option("--out", a->out, "Report JSON (a .txt table is written next to it)");
  sub->add_option("--export-series", a->series, "Directory for per-channel CSV series");
  sub->callback([a, sub] { run_eval(*a, *sub); });
}

void register_ablate(CLI::App& app) {
  auto a = std::make_shared<AblateArgs>();
  auto* sub = app.add_subcommand("ablate", "Component ablation: FID / Diversity per configuration");
  sub->add_option("--data", a->data, "Dataset directory (default: data root)");
  sub->add_option("--checkpoints", a->checkpoints, "Checkpoint directory (default: <data>/checkpoints)");
  sub->add_option("--seeds", a->seeds, "Generation seeds, comma-separated")->capture_default_str();
  sub->add_option("--pairs", a->pairs, "Diversity pairs")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--out", a->out, "Report JSON (default: <data>/ablation.json)");
  sub->callback([a, sub] { run_ablate(*a, *sub); });
}

}  // namespace ffusion
