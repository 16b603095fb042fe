#include "ff/latent.hpp"

#include "ff/error.hpp"
#include "ff/random.hpp"
#include "ff/tempo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ff::latent {

FatigueProfile compute_fatigue_profile(const TorqueSequence& t_nf, const TorqueSequence& t_f, SubjectId subject,
                                       double eps) {
  require(t_nf.data().rows() == t_f.data().rows() && t_nf.data().cols() == t_f.data().cols(),
          ErrorCode::ShapeMismatch, "fatigue profile needs aligned torque sequences of equal shape");
  require(eps > 0.0, ErrorCode::InvalidArgument, "denominator floor must be positive");
  const auto& a = t_nf.data();
  Matrix ratio(a.rows(), a.cols());
  for (Index i = 0; i < a.size(); ++i) {
    const double d = a.data()[i];
    const double denom = (d < 0.0 ? -1.0 : 1.0) * std::max(std::abs(d), eps);
    ratio.data()[i] = t_f.data().data()[i] / denom;
  }
  return {std::move(ratio), subject};
}

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma,
                               std::uint64_t noise_seed) {
  require(mu.size() == log_sigma.size(), ErrorCode::ShapeMismatch, "mu and log_sigma lengths differ");
  Rng rng(noise_seed);
  Eigen::VectorXd z(mu.size());
  for (Index i = 0; i < mu.size(); ++i) {
    const double eps = standard_normal(rng);
    const double sigma = std::exp(log_sigma(i));
    z(i) = sigma < 1e-12 ? mu(i) : mu(i) + sigma * eps;
  }
  return z;
}

Eigen::VectorXd fuse_latents(const std::vector<Eigen::VectorXd>& z, const std::vector<double>& weights) {
  require(z.size() == weights.size(), ErrorCode::ShapeMismatch,
          std::to_string(z.size()) + " latents but " + std::to_string(weights.size()) + " weights");
  require(z.size() >= 2, ErrorCode::InvalidArgument, "fusion needs at least two latents");
  validate_fusion_weights(weights);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.front().size());
  for (std::size_t n = 0; n < z.size(); ++n) {
    require(z[n].size() == out.size(), ErrorCode::ShapeMismatch, "latent dimensions differ");
    out += weights[n] * z[n];
  }
  return out;
}

Index WindowCodec::stance_count(const Matrix& normalized) const {
  require(normalized.cols() == channels(), ErrorCode::ShapeMismatch,
          "expected " + std::to_string(channels()) + " torque channels, got " + std::to_string(normalized.cols()));
  require(normalized.rows() > 0 && normalized.rows() % n_norm == 0, ErrorCode::ShapeMismatch,
          "normalized sequence has " + std::to_string(normalized.rows()) + " frames, not a multiple of " +
              std::to_string(n_norm));
  return normalized.rows() / n_norm;
}

Matrix WindowCodec::to_windows(const Matrix& normalized) const {
  const Index S = stance_count(normalized);
  const Matrix z = stats.apply(tempo::resample_stances(normalized, n_norm, window));
  Matrix out(S, features());
  for (Index s = 0; s < S; ++s)
    out.row(s) = Eigen::Map<const Eigen::RowVectorXd>(z.data() + s * features(), features());
  return out;
}

Matrix WindowCodec::from_windows(const Matrix& windows) const {
  require(windows.cols() == features(), ErrorCode::ShapeMismatch,
          "window rows have " + std::to_string(windows.cols()) + " features, expected " + std::to_string(features()));
  Matrix z(windows.rows() * window, channels());
  for (Index s = 0; s < windows.rows(); ++s)
    Eigen::Map<Eigen::RowVectorXd>(z.data() + s * features(), features()) = windows.row(s);
  return tempo::resample_stances(stats.invert(z), window, n_norm);
}

WindowCodec WindowCodec::fit(const std::vector<Matrix>& normalized, Index n_norm, Index window) {
  require(n_norm >= 2 && window >= 2 && window <= n_norm, ErrorCode::InvalidArgument,
          "window length must be in [2, n_norm]");
  WindowCodec c;
  c.n_norm = n_norm;
  c.window = window;
  c.stats = nn::Standardizer::fit(normalized);
  return c;
}

void WindowCodec::store(nn::Checkpoint& ckpt) const {
  ckpt.manifest["codec"] = {{"n_norm", n_norm}, {"window", window}, {"channels", channels()}};
  ckpt.put("codec.mean", stats.mean);
  ckpt.put("codec.scale", stats.scale);
}

WindowCodec WindowCodec::restore(const nn::Checkpoint& ckpt) {
  WindowCodec c;
  try {
    c.n_norm = ckpt.manifest.at("codec").at("n_norm").get<Index>();
    c.window = ckpt.manifest.at("codec").at("window").get<Index>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("checkpoint codec: ") + e.what());
  }
  c.stats.mean = ckpt.get("codec.mean");
  c.stats.scale = ckpt.get("codec.scale");
  return c;
}

namespace {

std::vector<Index> mlp_widths(Index in, const std::vector<Index>& hidden, Index out, bool reversed) {
  std::vector<Index> w{in};
  if (reversed)
    w.insert(w.end(), hidden.rbegin(), hidden.rend());
  else
    w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx, std::size_t b0, std::size_t b1) {
  Matrix out(static_cast<Index>(b1 - b0), m.cols());
  for (std::size_t i = b0; i < b1; ++i) out.row(static_cast<Index>(i - b0)) = m.row(static_cast<Index>(idx[i]));
  return out;
}

Matrix standard_normal_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

std::vector<Index> json_widths(const nlohmann::json& j) { return j.get<std::vector<Index>>(); }

// Windows are frame-major rows: feature k*J + j is channel j at frame k.
Matrix window_channel_means(const Matrix& w, Index J) {
  const Index frames = w.cols() / J;
  Matrix m = Matrix::Zero(w.rows(), J);
  for (Index k = 0; k < frames; ++k) m += w.middleCols(k * J, J);
  return m / static_cast<double>(frames);
}

Matrix center_windows(Matrix w, Index J) {
  const Matrix m = window_channel_means(w, J);
  for (Index k = 0; k < w.cols() / J; ++k) w.middleCols(k * J, J) -= m;
  return w;
}

}  // namespace

CvaeModel::CvaeModel(const CvaeConfig& config, WindowCodec codec, std::uint64_t seed)
    : config_(config), codec_(std::move(codec)), seed_(seed) {
  require(config.n_subjects >= 1 && config.latent >= 1 && config.embed >= 1 && !config.hidden.empty(),
          ErrorCode::InvalidArgument, "invalid CVAE configuration");
  Rng rng(derive_seed(seed, 0xc0aeu));
  const Index F = codec_.features();
  encoder_ = nn::Mlp("encoder", mlp_widths(2 * F + config.embed, config.hidden, 2 * config.latent, false),
                     nn::Activation::Relu, nn::Activation::Linear, rng);
  decoder_ = nn::Mlp("decoder", mlp_widths(config.latent + config.embed + F, config.hidden, F, true),
                     nn::Activation::Relu, nn::Activation::Linear, rng);
  embedding_.name = "embedding.table";
  embedding_.value.resize(config.n_subjects, config.embed);
  for (Index i = 0; i < embedding_.value.size(); ++i) embedding_.value.data()[i] = 0.1 * standard_normal(rng);
  embedding_.zero_grad();
}

void CvaeModel::check_label(SubjectId label) const {
  require(label.value >= 0 && label.value < config_.n_subjects, ErrorCode::UnknownLabel,
          "label " + std::to_string(label.value) + " is outside the embedding table of " +
              std::to_string(config_.n_subjects) + " subjects");
}

nn::ParamList CvaeModel::parameters() {
  auto p = encoder_.parameters();
  auto d = decoder_.parameters();
  p.insert(p.end(), d.begin(), d.end());
  p.push_back(&embedding_);
  return p;
}

Matrix CvaeModel::encoder_input(const Matrix& fatigued, const Matrix& nonfatigued,
                                const std::vector<int>& labels) const {
  const Index F = codec_.features(), B = fatigued.rows();
  require(fatigued.cols() == F && nonfatigued.cols() == F && nonfatigued.rows() == B &&
              static_cast<Index>(labels.size()) == B,
          ErrorCode::ShapeMismatch, "CVAE encoder inputs disagree in shape");
  Matrix x(B, 2 * F + config_.embed);
  x.leftCols(F) = fatigued;
  x.middleCols(F, F) = nonfatigued;
  for (Index i = 0; i < B; ++i) {
    check_label(SubjectId{labels[static_cast<std::size_t>(i)]});
    x.row(i).tail(config_.embed) = embedding_.value.row(labels[static_cast<std::size_t>(i)]);
  }
  return x;
}

Matrix CvaeModel::decoder_input(const Matrix& z, const Matrix& nonfatigued, const std::vector<int>& labels) const {
  const Index F = codec_.features(), B = z.rows();
  require(z.cols() == config_.latent && nonfatigued.cols() == F && nonfatigued.rows() == B &&
              static_cast<Index>(labels.size()) == B,
          ErrorCode::ShapeMismatch, "CVAE decoder inputs disagree in shape");
  Matrix x(B, config_.latent + config_.embed + F);
  x.leftCols(config_.latent) = z;
  for (Index i = 0; i < B; ++i) {
    check_label(SubjectId{labels[static_cast<std::size_t>(i)]});
    x.row(i).segment(config_.latent, config_.embed) = embedding_.value.row(labels[static_cast<std::size_t>(i)]);
  }
  x.rightCols(F) = nonfatigued;
  return x;
}

CvaeModel::Encoded CvaeModel::encode(const Matrix& fatigued, const Matrix& nonfatigued,
                                     const std::vector<int>& labels) const {
  const Matrix h = encoder_.forward(encoder_input(fatigued, nonfatigued, labels), nullptr);
  return {h.leftCols(config_.latent), h.rightCols(config_.latent)};
}

Matrix CvaeModel::decode(const Matrix& z, const Matrix& nonfatigued, const std::vector<int>& labels) const {
  return decoder_.forward(decoder_input(z, nonfatigued, labels), nullptr);
}

nn::Checkpoint CvaeModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.manifest["kind"] = "cvae";
  ckpt.manifest["architecture"] = {{"n_subjects", config_.n_subjects},
                                   {"latent", config_.latent},
                                   {"embed", config_.embed},
                                   {"hidden", config_.hidden}};
  ckpt.manifest["embedding"] = {{"tensor", embedding_.name}, {"rows", embedding_.value.rows()},
                                {"cols", embedding_.value.cols()}};
  ckpt.manifest["seed"] = seed_;
  codec_.store(ckpt);
  auto& self = const_cast<CvaeModel&>(*this);
  ckpt.put_params(self.encoder_.parameters(), "");
  ckpt.put_params(self.decoder_.parameters(), "");
  ckpt.put(embedding_.name, embedding_.value);
  return ckpt;
}

CvaeModel CvaeModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  CvaeConfig cfg;
  std::uint64_t seed = 0;
  try {
    require(ckpt.manifest.at("kind").get<std::string>() == "cvae", ErrorCode::Parse, "checkpoint is not a CVAE");
    const auto& a = ckpt.manifest.at("architecture");
    cfg.n_subjects = a.at("n_subjects").get<int>();
    cfg.latent = a.at("latent").get<Index>();
    cfg.embed = a.at("embed").get<Index>();
    cfg.hidden = json_widths(a.at("hidden"));
    seed = ckpt.manifest.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("CVAE checkpoint: ") + e.what());
  }
  CvaeModel m(cfg, WindowCodec::restore(ckpt), seed);
  ckpt.get_params(m.encoder_.parameters(), "");
  ckpt.get_params(m.decoder_.parameters(), "");
  ckpt.get_params({&m.embedding_}, "");
  return m;
}

void CvaeModel::save(const std::filesystem::path& base) const { nn::save_checkpoint(to_checkpoint(), base); }
CvaeModel CvaeModel::load(const std::filesystem::path& base) { return from_checkpoint(nn::load_checkpoint(base)); }

double cvae_reconstruction_mse(const CvaeModel& model, const Matrix& nf, const Matrix& f,
                               const std::vector<int>& labels) {
  if (nf.rows() == 0) return 0.0;
  const auto enc = model.encode(f, nf, labels);
  return (model.decode(enc.mu, nf, labels) - f).squaredNorm() / static_cast<double>(f.size());
}

namespace {

struct WindowSet {
  Matrix nf, f;
  std::vector<int> labels;
};

WindowSet to_window_set(const std::vector<LabeledPair>& pairs, const WindowCodec& codec) {
  std::vector<Matrix> nfs, fs;
  WindowSet ws;
  Index rows = 0;
  for (const auto& p : pairs) {
    require(p.nonfatigued.rows() == p.fatigued.rows(), ErrorCode::ShapeMismatch,
            "training pair for subject " + std::to_string(p.subject.value) + " is not stance-aligned");
    nfs.push_back(codec.to_windows(p.nonfatigued));
    fs.push_back(codec.to_windows(p.fatigued));
    rows += nfs.back().rows();
  }
  ws.nf.resize(rows, codec.features());
  ws.f.resize(rows, codec.features());
  Index r = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ws.nf.middleRows(r, nfs[i].rows()) = nfs[i];
    ws.f.middleRows(r, fs[i].rows()) = fs[i];
    for (Index k = 0; k < nfs[i].rows(); ++k) ws.labels.push_back(pairs[i].subject.value);
    r += nfs[i].rows();
  }
  return ws;
}

std::vector<int> gather_labels(const std::vector<int>& l, const std::vector<std::size_t>& idx, std::size_t b0,
                               std::size_t b1) {
  std::vector<int> out;
  for (std::size_t i = b0; i < b1; ++i) out.push_back(l[idx[i]]);
  return out;
}

}  // namespace

CvaeModel cvae_train(const std::vector<LabeledPair>& train, const std::vector<LabeledPair>& validation,
                     const CvaeConfig& config, const CvaeTrainConfig& tc, CvaeTrainReport* report) {
  require(!train.empty(), ErrorCode::InvalidArgument, "CVAE training set is empty");
  require(tc.batch >= 1 && tc.epochs >= 0, ErrorCode::InvalidArgument, "batch must be >= 1 and epochs >= 0");
  std::vector<Matrix> all;
  for (const auto& p : train) {
    all.push_back(p.nonfatigued);
    all.push_back(p.fatigued);
  }
  CvaeModel model(config, WindowCodec::fit(all), tc.seed);
  const auto ts = to_window_set(train, model.codec());
  const auto vs = to_window_set(validation, model.codec());
  const Index F = model.codec().features(), dz = config.latent, E = config.embed;

  auto params = model.parameters();
  nn::Adam adam({tc.lr});
  nn::PlateauScheduler sched(tc.plateau);
  CvaeTrainReport rep;
  rep.initial_recon = cvae_reconstruction_mse(model, ts.nf, ts.f, ts.labels);

  std::vector<std::size_t> order(static_cast<std::size_t>(ts.nf.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double beta = tc.warmup.beta(epoch);
    Rng rng(derive_seed(tc.seed, 0xc7a1u, epoch));
    shuffle(order, rng);
    double sum_loss = 0.0, sum_rec = 0.0, sum_kl = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(tc.batch), ++batches) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(tc.batch));
      const Matrix f = gather_rows(ts.f, order, b0, b1);
      Matrix nf = gather_rows(ts.nf, order, b0, b1);
      if (tc.condition_jitter > 0.0) {
        const Index J = model.codec().channels();
        for (Index i = 0; i < nf.rows(); ++i)
          for (Index j = 0; j < J; ++j) {
            const double o = tc.condition_jitter * standard_normal(rng);
            for (Index k = 0; k < model.codec().window; ++k) nf(i, k * J + j) += o;
          }
      }
      const auto labels = gather_labels(ts.labels, order, b0, b1);
      const Index B = f.rows();

      nn::zero_grads(params);
      nn::Mlp::Cache enc_cache, dec_cache;
      const Matrix h = model.encoder().forward(model.encoder_input(f, nf, labels), &enc_cache);
      const Matrix mu = h.leftCols(dz), ls = h.rightCols(dz);
      const Matrix eps = standard_normal_matrix(B, dz, rng);
      const Matrix sigma = ls.array().exp().matrix();
      const Matrix z = mu + sigma.cwiseProduct(eps);
      const Matrix y = model.decoder().forward(model.decoder_input(z, nf, labels), &dec_cache);
      const auto rec = nn::mse_loss(y, f);
      const auto kl = nn::kl_to_standard_normal(mu, ls);
      const double loss = rec.value + beta * kl.value;
      if (!std::isfinite(loss))
        fail(ErrorCode::Divergence, "CVAE loss is non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batches));

      const Matrix dxd = model.decoder().backward(dec_cache, rec.grad);
      const Matrix dz_ = dxd.leftCols(dz);
      Matrix dh(B, 2 * dz);
      dh.leftCols(dz) = dz_ + beta * kl.d_mu;
      dh.rightCols(dz) = dz_.cwiseProduct(sigma).cwiseProduct(eps) + beta * kl.d_log_sigma;
      const Matrix dxe = model.encoder().backward(enc_cache, dh);
      auto& emb = model.embedding();
      for (Index i = 0; i < B; ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        emb.grad.row(l) += dxd.row(i).segment(dz, E) + dxe.row(i).segment(2 * F, E);
      }
      adam.step(params);
      sum_loss += loss;
      sum_rec += rec.value;
      sum_kl += kl.value;
    }
    const double nb = static_cast<double>(std::max<std::size_t>(batches, 1));
    rep.loss.push_back(sum_loss / nb);
    rep.recon.push_back(sum_rec / nb);
    rep.kl.push_back(sum_kl / nb);
    rep.beta.push_back(beta);
    rep.lr.push_back(adam.learning_rate());
    double val_rec = rep.recon.back(), val_kl = rep.kl.back();
    if (vs.nf.rows() > 0) {
      const auto enc = model.encode(vs.f, vs.nf, vs.labels);
      val_rec = (model.decode(enc.mu, vs.nf, vs.labels) - vs.f).squaredNorm() / static_cast<double>(vs.f.size());
      val_kl = nn::kl_to_standard_normal(enc.mu, enc.log_sigma).value;
    }
    require(std::isfinite(val_rec) && std::isfinite(val_kl), ErrorCode::Divergence,
            "CVAE validation loss is non-finite at epoch " + std::to_string(epoch));
    rep.val_recon.push_back(val_rec);
    rep.val_kl.push_back(val_kl);
    adam.set_learning_rate(sched.step(val_rec, adam.learning_rate()));
  }
  rep.final_recon = cvae_reconstruction_mse(model, ts.nf, ts.f, ts.labels);
  if (report) *report = std::move(rep);
  return model;
}

TorqueSequence cvae_generate(const CvaeModel& model, const TorqueSequence& t_nf, SubjectId label, const Matrix& z) {
  model.check_label(label);
  const Matrix nf = model.codec().to_windows(t_nf.data());
  require(z.rows() == nf.rows() && z.cols() == model.config().latent, ErrorCode::ShapeMismatch,
          "latent matrix must have one row of size " + std::to_string(model.config().latent) + " per stance");
  const std::vector<int> labels(static_cast<std::size_t>(nf.rows()), label.value);
  return TorqueSequence(t_nf.channels(), model.codec().from_windows(model.decode(z, nf, labels)), t_nf.frame_rate());
}

TorqueSequence cvae_generate(const CvaeModel& model, const TorqueSequence& t_nf, SubjectId label,
                             std::uint64_t seed) {
  const Index S = model.codec().stance_count(t_nf.data());
  Rng rng(derive_seed(seed, 0x9e4u, label.value));
  return cvae_generate(model, t_nf, label, standard_normal_matrix(S, model.config().latent, rng));
}

FusionAeModel::FusionAeModel(const FusionAeConfig& config, WindowCodec codec, std::uint64_t seed)
    : config_(config), codec_(std::move(codec)), seed_(seed) {
  require(config.latent >= 1 && !config.hidden.empty(), ErrorCode::InvalidArgument, "invalid FusionAE configuration");
  Rng rng(derive_seed(seed, 0xf05eu));
  const Index F = codec_.features();
  encoder_ = nn::Mlp("encoder", mlp_widths(F, config.hidden, config.latent, false), nn::Activation::Relu,
                     nn::Activation::Linear, rng);
  decoder_ = nn::Mlp("decoder", mlp_widths(config.latent, config.hidden, F, true), nn::Activation::Relu,
                     nn::Activation::Linear, rng);
}

Matrix FusionAeModel::encode(const Matrix& windows) const {
  const Index J = codec_.channels();
  require(windows.cols() == codec_.features(), ErrorCode::ShapeMismatch, "FusionAE input has the wrong window size");
  const Matrix means = window_channel_means(windows, J);
  Matrix z(windows.rows(), latent_size());
  z.leftCols(J) = means;
  z.rightCols(config_.latent) = encoder_.forward(center_windows(windows, J), nullptr);
  return z;
}

Matrix FusionAeModel::decode(const Matrix& z) const {
  const Index J = codec_.channels();
  require(z.cols() == latent_size(), ErrorCode::ShapeMismatch,
          "FusionAE latent has " + std::to_string(z.cols()) + " entries, expected " + std::to_string(latent_size()));
  Matrix y = center_windows(decoder_.forward(z.rightCols(config_.latent), nullptr), J);
  for (Index k = 0; k < codec_.window; ++k) y.middleCols(k * J, J) += z.leftCols(J);
  return y;
}
Matrix FusionAeModel::encode_sequence(const Matrix& normalized) const {
  return encode(codec_.to_windows(normalized));
}
Matrix FusionAeModel::decode_sequence(const Matrix& z) const { return codec_.from_windows(decode(z)); }

nn::ParamList FusionAeModel::parameters() {
  auto p = encoder_.parameters();
  auto d = decoder_.parameters();
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

nn::Checkpoint FusionAeModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.manifest["kind"] = "fusionae";
  ckpt.manifest["architecture"] = {{"latent", config_.latent}, {"hidden", config_.hidden}};
  ckpt.manifest["seed"] = seed_;
  ckpt.manifest["validation_mse"] = validation_mse_;
  codec_.store(ckpt);
  auto& self = const_cast<FusionAeModel&>(*this);
  ckpt.put_params(self.encoder_.parameters(), "");
  ckpt.put_params(self.decoder_.parameters(), "");
  return ckpt;
}

FusionAeModel FusionAeModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  FusionAeConfig cfg;
  std::uint64_t seed = 0;
  double val = 0.0;
  try {
    require(ckpt.manifest.at("kind").get<std::string>() == "fusionae", ErrorCode::Parse,
            "checkpoint is not a FusionAE");
    cfg.latent = ckpt.manifest.at("architecture").at("latent").get<Index>();
    cfg.hidden = json_widths(ckpt.manifest.at("architecture").at("hidden"));
    seed = ckpt.manifest.at("seed").get<std::uint64_t>();
    val = ckpt.manifest.value("validation_mse", 0.0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("FusionAE checkpoint: ") + e.what());
  }
  FusionAeModel m(cfg, WindowCodec::restore(ckpt), seed);
  ckpt.get_params(m.encoder_.parameters(), "");
  ckpt.get_params(m.decoder_.parameters(), "");
  m.validation_mse_ = val;
  return m;
}

void FusionAeModel::save(const std::filesystem::path& base) const { nn::save_checkpoint(to_checkpoint(), base); }
FusionAeModel FusionAeModel::load(const std::filesystem::path& base) {
  return from_checkpoint(nn::load_checkpoint(base));
}

double fusionae_reconstruction_mse(const FusionAeModel& model, const std::vector<Matrix>& normalized) {
  double sum = 0.0, n = 0.0;
  for (const auto& x : normalized) {
    const Matrix r = model.decode_sequence(model.encode_sequence(x));
    sum += (r - x).squaredNorm();
    n += static_cast<double>(x.size());
  }
  return n > 0.0 ? sum / n : 0.0;
}

FusionAeModel fusionae_train(const std::vector<Matrix>& train, const std::vector<Matrix>& validation,
                             const FusionAeConfig& config, const FusionAeTrainConfig& tc, const WindowCodec* codec,
                             FusionAeTrainReport* report) {
  require(!train.empty(), ErrorCode::InvalidArgument, "FusionAE training set is empty");
  require(tc.batch >= 1 && tc.epochs >= 0, ErrorCode::InvalidArgument, "batch must be >= 1 and epochs >= 0");
  FusionAeModel model(config, codec ? *codec : WindowCodec::fit(train), tc.seed);
  auto stack = [&](const std::vector<Matrix>& seqs) {
    Index rows = 0;
    std::vector<Matrix> w;
    for (const auto& s : seqs) {
      w.push_back(model.codec().to_windows(s));
      rows += w.back().rows();
    }
    Matrix out(rows, model.codec().features());
    Index r = 0;
    for (const auto& m : w) {
      out.middleRows(r, m.rows()) = m;
      r += m.rows();
    }
    return out;
  };
  const Matrix X = stack(train);
  const Matrix V = validation.empty() ? Matrix(0, X.cols()) : stack(validation);
  const Index J = model.codec().channels();
  const Matrix Xc = center_windows(X, J);
  auto val_loss = [&]() {
    const Matrix& ref = V.rows() > 0 ? V : X;
    return (model.decode(model.encode(ref)) - ref).squaredNorm() / static_cast<double>(ref.size());
  };

  auto params = model.parameters();
  nn::Adam adam({tc.lr});
  nn::PlateauScheduler sched(tc.plateau);
  FusionAeTrainReport rep;
  rep.initial_val_mse = val_loss();
  std::vector<std::size_t> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Rng rng(derive_seed(tc.seed, 0xae7u, epoch));
    shuffle(order, rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(tc.batch), ++batches) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(tc.batch));
      const Matrix x = gather_rows(Xc, order, b0, b1);
      nn::zero_grads(params);
      nn::Mlp::Cache ce, cd;
      const Matrix z = model.encoder().forward(x, &ce);
      const Matrix y = center_windows(model.decoder().forward(z, &cd), J);
      const auto loss = nn::mse_loss(y, x);
      if (!std::isfinite(loss.value))
        fail(ErrorCode::Divergence, "FusionAE loss is non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batches));
      model.encoder().backward(ce, model.decoder().backward(cd, center_windows(loss.grad, J)));
      adam.step(params);
      sum += loss.value;
    }
    rep.loss.push_back(sum / static_cast<double>(std::max<std::size_t>(batches, 1)));
    const double v = val_loss();
    require(std::isfinite(v), ErrorCode::Divergence, "FusionAE validation loss is non-finite");
    rep.val_loss.push_back(v);
    rep.lr.push_back(adam.learning_rate());
    adam.set_learning_rate(sched.step(v, adam.learning_rate()));
  }
  model.set_validation_mse(fusionae_reconstruction_mse(model, validation.empty() ? train : validation));
  if (report) *report = std::move(rep);
  return model;
}

TorqueSequence fusion_pipeline(const FusionAeModel& model, const TorqueSequence& a, const TorqueSequence& b,
                               const std::vector<double>& weights) {
  require(weights.size() == 2, ErrorCode::ShapeMismatch, "fusion of two sequences needs two weights");
  validate_fusion_weights(weights);
  require(a.data().rows() == b.data().rows() && a.data().cols() == b.data().cols(), ErrorCode::ShapeMismatch,
          "fusion inputs must share a shape");
  const Matrix za = model.encode_sequence(a.data());
  const Matrix zb = model.encode_sequence(b.data());
  const Matrix fused = weights[0] * za + weights[1] * zb;
  return TorqueSequence(a.channels(), model.decode_sequence(fused), a.frame_rate());
}

TorqueSequence dynamic_fusion(const FusionAeModel& model, const TorqueSequence& a, const TorqueSequence& b,
                              const std::vector<double>& w2, bool require_monotone) {
  require(a.data().rows() == b.data().rows() && a.data().cols() == b.data().cols(), ErrorCode::ShapeMismatch,
          "fusion inputs must share a shape");
  require(static_cast<Index>(w2.size()) == a.data().rows(), ErrorCode::ShapeMismatch,
          "ramp has " + std::to_string(w2.size()) + " entries for " + std::to_string(a.data().rows()) + " frames");
  for (std::size_t t = 0; t < w2.size(); ++t) {
    require(w2[t] >= 0.0 && w2[t] <= 1.0, ErrorCode::Weights, "ramp weight outside [0, 1] at frame " + std::to_string(t));
    if (require_monotone && t > 0)
      require(w2[t] >= w2[t - 1], ErrorCode::Weights, "ramp is not monotone at frame " + std::to_string(t));
  }
  const auto& codec = model.codec();
  const Matrix za = model.encode_sequence(a.data());
  const Matrix zb = model.encode_sequence(b.data());
  const Index S = za.rows(), W = codec.window, J = codec.channels(), n = codec.n_norm;
  Matrix fused(S * W, za.cols());
  for (Index s = 0; s < S; ++s)
    for (Index k = 0; k < W; ++k) {
      const auto pos = static_cast<Index>(
          std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(W - 1)));
      const double w = w2[static_cast<std::size_t>(s * n + pos)];
      fused.row(s * W + k) = (1.0 - w) * za.row(s) + w * zb.row(s);
    }
  const Matrix decoded = model.decode(fused);
  Matrix windows(S, codec.features());
  for (Index s = 0; s < S; ++s)
    for (Index k = 0; k < W; ++k) windows.block(s, k * J, 1, J) = decoded.block(s * W + k, k * J, 1, J);
  return TorqueSequence(a.channels(), codec.from_windows(windows), a.frame_rate());
}

std::vector<double> linear_ramp(Index n) {
  require(n >= 1, ErrorCode::InvalidArgument, "ramp length must be >= 1");
  std::vector<double> r(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t) r[static_cast<std::size_t>(t)] = n == 1 ? 1.0 : static_cast<double>(t) / static_cast<double>(n - 1);
  return r;
}

}  // namespace ff::latent
