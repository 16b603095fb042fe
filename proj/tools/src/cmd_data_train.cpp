#include "common.hpp"

#include "ff/dynamics.hpp"
#include "ff/error.hpp"
#include "ff/io.hpp"
#include "ff/latent.hpp"
#include "ff/pipeline.hpp"
#include "ff/synth.hpp"

#include <iostream>
#include <map>
#include <memory>

namespace ffusion {

namespace {

struct GenDataArgs {
  std::string out;
  int subjects = 16;
  ff::Index strides = 100;
  std::uint64_t seed = 7;
  bool force = false;
};

void run_gen_data(const GenDataArgs& a, const CLI::App& sub) {
  RunManifest manifest("gen-data", sub);
  ff::require(a.subjects >= 2, ff::ErrorCode::InvalidArgument,
              "--subjects must be at least 2 (labels need a second subject to transfer from), got " +
                  std::to_string(a.subjects));
  const fs::path out = a.out.empty() ? default_data_root() : fs::path(a.out);
  const auto bundle = ff::build_dataset(a.subjects, a.strides, a.seed);
  ff::save_dataset(bundle, out, a.force);
  manifest.seed(a.seed);
  manifest.output(out);
  manifest.extra("resolved", {{"out", out.string()}, {"subjects", a.subjects}, {"strides", a.strides}});
  manifest.write(manifest_path_for(out, true));
  std::cout << "wrote " << a.subjects << " subjects to " << out.string() << '\n';
}

struct TrainArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string id;
  std::string cvae;
  int epochs = -1;
  ff::Index batch = -1;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

void write_history(const fs::path& path, const std::map<std::string, std::vector<double>>& series) {
  std::vector<std::string> header{"epoch"};
  std::vector<std::vector<double>> cols(1);
  std::size_t n = 0;
  for (const auto& [name, v] : series) n = std::max(n, v.size());
  for (std::size_t e = 0; e < n; ++e) cols[0].push_back(static_cast<double>(e));
  for (const auto& [name, v] : series) {
    ff::require(v.size() == n, ff::ErrorCode::ShapeMismatch, "loss history '" + name + "' has a different length");
    header.push_back(name);
    cols.push_back(v);
  }
  ff::io::write_table_csv(path, header, cols);
}

ff::dynamics::Surrogate load_id(const fs::path& p) {
  ff::require(fs::exists(fs::path(p).concat(".json")), ff::ErrorCode::MissingCheckpoint,
              "ID checkpoint '" + p.string() + "' not found; run `train --model id` first");
  auto id = ff::dynamics::Surrogate::load(p);
  ff::require(id.config().direction == ff::dynamics::Direction::ID, ff::ErrorCode::MissingCheckpoint,
              p.string() + " is not an ID surrogate");
  return id;
}

void run_train(const TrainArgs& a, const CLI::App& sub) {
  RunManifest manifest("train", sub);
  const fs::path data = a.data.empty() ? default_data_root() : fs::path(a.data);
  const fs::path out = a.out.empty() ? checkpoint_path(data, a.model) : fs::path(a.out);
  const bool surrogate = a.model == "id" || a.model == "fd";
  const int default_epochs = surrogate ? ff::dynamics::TrainConfig{}.epochs
                             : a.model == "cvae" ? ff::latent::CvaeTrainConfig{}.epochs
                                                 : ff::latent::FusionAeTrainConfig{}.epochs;
  const int epochs = a.epochs < 0 ? default_epochs : a.epochs;
  if (epochs == 0) ff::warn("--epochs 0: the checkpoint holds the initial parameters");

  const auto bundle = ff::ingest_external_csv(data);
  manifest.input(data);
  manifest.seed(a.seed);
  std::map<std::string, std::vector<double>> history;

  if (surrogate) {
    ff::dynamics::SurrogateConfig cfg;
    cfg.direction = ff::dynamics::direction_from_name(a.model);
    ff::dynamics::TrainConfig tc;
    tc.epochs = epochs;
    tc.lr = a.lr;
    tc.seed = a.seed;
    if (a.batch > 0) tc.batch = a.batch;
    ff::dynamics::TrainReport rep;
    const auto body = ff::dynamics::BodyModel::standard(bundle.subjects.front().nonfatigued.channels().joint_names());
    const auto model = ff::dynamics::train_surrogate(bundle, body, cfg, tc, &rep);
    model.save(out);
    history = {{"train_loss", rep.train_loss}, {"val_loss", rep.val_loss}, {"lr", rep.lr}};
    manifest.extra("best_val_loss", rep.best_val_loss);
  } else {
    const fs::path id_path = a.id.empty() ? checkpoint_path(data, "id") : fs::path(a.id);
    const auto id = load_id(id_path);
    manifest.input(id_path);
    const auto corpus = ff::pipeline::build_torque_corpus(bundle, &id);
    if (a.model == "cvae") {
      ff::latent::CvaeConfig cfg;
      cfg.n_subjects = bundle.subject_count();
      ff::latent::CvaeTrainConfig tc;
      tc.epochs = epochs;
      tc.lr = a.lr;
      tc.seed = a.seed;
      if (a.batch > 0) tc.batch = a.batch;
      ff::latent::CvaeTrainReport rep;
      const auto model = ff::latent::cvae_train(corpus.train, corpus.validation, cfg, tc, &rep);
      model.save(out);
      history = {{"loss", rep.loss}, {"recon", rep.recon}, {"kl", rep.kl}, {"beta", rep.beta},
                 {"lr", rep.lr},     {"val_recon", rep.val_recon}, {"val_kl", rep.val_kl}};
      manifest.extra("initial_recon", rep.initial_recon);
      manifest.extra("final_recon", rep.final_recon);
    } else {
      const fs::path cvae_path = a.cvae.empty() ? checkpoint_path(data, "cvae") : fs::path(a.cvae);
      std::unique_ptr<ff::latent::CvaeModel> cvae;
      if (fs::exists(fs::path(cvae_path).concat(".json"))) {
        cvae = std::make_unique<ff::latent::CvaeModel>(ff::latent::CvaeModel::load(cvae_path));
        manifest.input(cvae_path);
      } else if (!a.cvae.empty()) {
        ff::fail(ff::ErrorCode::MissingCheckpoint, "CVAE checkpoint '" + cvae_path.string() + "' not found");
      }
      const auto fc = ff::pipeline::build_fusion_corpus(corpus, cvae.get(), a.seed);
      ff::latent::FusionAeTrainConfig tc;
      tc.epochs = epochs;
      tc.lr = a.lr;
      tc.seed = a.seed;
      if (a.batch > 0) tc.batch = a.batch;
      ff::latent::FusionAeTrainReport rep;
      const auto model = ff::latent::fusionae_train(fc.train, fc.validation, {}, tc,
                                                    cvae ? &cvae->codec() : nullptr, &rep);
      model.save(out);
      history = {{"loss", rep.loss}, {"val_loss", rep.val_loss}, {"lr", rep.lr}};
      manifest.extra("validation_mse", model.validation_mse());
    }
  }
  fs::path hist = out;
  hist += ".loss.csv";
  write_history(hist, history);
  manifest.output(fs::path(out).concat(".json"));
  manifest.output(fs::path(out).concat(".bin"));
  manifest.output(hist);
  manifest.extra("resolved", {{"data", data.string()}, {"out", out.string()}, {"epochs", epochs}, {"batch", a.batch}});
  manifest.write(manifest_path_for(out, false));
  std::cout << "trained " << a.model << " (" << epochs << " epochs) -> " << out.string() << '\n';
}

}  // namespace

void register_gen_data(CLI::App& app) {
  auto args = std::make_shared<GenDataArgs>();
  auto* sub = app.add_subcommand("gen-data", "Generate a synthetic paired gait dataset");
  sub->add_option("--out", args->out, "Output directory (default: data root)");
  sub->add_option("--subjects", args->subjects, "Number of subjects (>= 2)")->capture_default_str();
  sub->add_option("--strides", args->strides, "Stances per sequence")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", args->seed, "Generator seed")->capture_default_str();
  sub->add_flag("--force", args->force, "Overwrite a non-empty output directory");
  sub->callback([args, sub] { run_gen_data(*args, *sub); });
}

void register_train(CLI::App& app) {
  auto args = std::make_shared<TrainArgs>();
  auto* sub = app.add_subcommand("train", "Train a model on a dataset directory");
  sub->add_option("--model", args->model, "Model to train")->required()->check(CLI::IsMember({"id", "fd", "cvae", "fusionae"}));
  sub->add_option("--data", args->data, "Dataset directory (default: data root)");
  sub->add_option("--out", args->out, "Checkpoint base path (default: <data>/checkpoints/<model>)");
  sub->add_option("--epochs", args->epochs, "Epochs (default: id/fd 30, cvae 50, fusionae 20)")->check(CLI::NonNegativeNumber);
  sub->add_option("--batch", args->batch, "Batch size (default: id/fd 16, cvae/fusionae 32)")->check(CLI::PositiveNumber);
  sub->add_option("--lr", args->lr, "Initial learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", args->seed, "Training seed")->capture_default_str();
  sub->add_option("--id", args->id, "ID checkpoint for cvae/fusionae torques (default: <data>/checkpoints/id)");
  sub->add_option("--cvae", args->cvae, "CVAE checkpoint whose samples join fusionae training (used if present)");
  sub->callback([args, sub] { run_train(*args, *sub); });
}

}  // namespace ffusion
