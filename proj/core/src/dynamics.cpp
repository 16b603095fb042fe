#include "ff/dynamics.hpp"

#include "ff/error.hpp"
#include "ff/random.hpp"
#include "ff/tempo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ff::dynamics {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }
Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }
Eigen::Vector2d link_dir(double theta) { return {std::sin(theta), -std::cos(theta)}; }

void check_dims(const LinkageModel& model, Index a, Index b, Index c) {
  const Index k = model.size();
  require(a == k && b == k && c == k, ErrorCode::ShapeMismatch,
          "linkage has " + std::to_string(k) + " links but got vectors of length " + std::to_string(a) + "/" +
              std::to_string(b) + "/" + std::to_string(c));
}

}  // namespace

void LinkageModel::validate() const {
  require(!links.empty(), ErrorCode::InvalidArgument, "linkage has no links");
  require(std::isfinite(gravity), ErrorCode::InvalidArgument, "gravity must be finite");
  for (const auto& l : links)
    require(l.mass > 0.0 && l.length > 0.0 && l.inertia >= 0.0 && std::isfinite(l.com), ErrorCode::InvalidArgument,
            "link mass and length must be > 0 and inertia >= 0");
}

LinkageModel LinkageModel::pendulum(double mass, double length, double com, double inertia, double gravity) {
  LinkageModel m;
  m.links = {Link{mass, length, com, inertia}};
  m.gravity = gravity;
  m.validate();
  return m;
}

LinkageModel LinkageModel::leg() {
  LinkageModel m;
  m.links = {Link{7.0, 0.43, 0.19, 0.12}, Link{3.3, 0.43, 0.19, 0.05}, Link{1.0, 0.20, 0.08, 0.004}};
  return m;
}

Eigen::VectorXd analytic_id(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& qdd,
                            const LinkageModel& model) {
  check_dims(model, q.size(), qd.size(), qdd.size());
  const Index k = model.size();
  std::vector<Eigen::Vector2d> dir(k), acc_com(k);
  std::vector<double> alpha(k);
  Eigen::Vector2d acc_joint = Eigen::Vector2d::Zero();
  double theta = 0.0, omega = 0.0, alph = 0.0;
  for (Index i = 0; i < k; ++i) {
    const auto& L = model.links[static_cast<std::size_t>(i)];
    theta += q(i);
    omega += qd(i);
    alph += qdd(i);
    dir[i] = link_dir(theta);
    alpha[i] = alph;
    acc_com[i] = acc_joint + alph * L.com * perp(dir[i]) - omega * omega * L.com * dir[i];
    acc_joint += alph * L.length * perp(dir[i]) - omega * omega * L.length * dir[i];
  }
  const Eigen::Vector2d g(0.0, -model.gravity);
  Eigen::VectorXd tau(k);
  Eigen::Vector2d f_next = Eigen::Vector2d::Zero();
  double n_next = 0.0;
  for (Index i = k - 1; i >= 0; --i) {
    const auto& L = model.links[static_cast<std::size_t>(i)];
    const Eigen::Vector2d inertial = L.mass * (acc_com[i] - g);
    const double n = L.inertia * alpha[i] + n_next + cross2(L.com * dir[i], inertial) +
                     cross2(L.length * dir[i], f_next);
    f_next = inertial + f_next;
    n_next = n;
    tau(i) = n;
  }
  return tau;
}

Eigen::MatrixXd mass_matrix(const Eigen::VectorXd& q, const LinkageModel& model) {
  const Index k = model.size();
  LinkageModel no_g = model;
  no_g.gravity = 0.0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd M(k, k);
  for (Index j = 0; j < k; ++j) M.col(j) = analytic_id(q, zero, Eigen::VectorXd::Unit(k, j), no_g);
  return M;
}

Eigen::VectorXd analytic_fd(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& tau,
                            const LinkageModel& model) {
  check_dims(model, q.size(), qd.size(), tau.size());
  const Eigen::VectorXd bias = analytic_id(q, qd, Eigen::VectorXd::Zero(model.size()), model);
  return mass_matrix(q, model).ldlt().solve(tau - bias);
}

double mechanical_energy(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const LinkageModel& model) {
  check_dims(model, q.size(), qd.size(), q.size());
  double e = 0.0, theta = 0.0, omega = 0.0;
  Eigen::Vector2d pos = Eigen::Vector2d::Zero(), vel = Eigen::Vector2d::Zero();
  for (Index i = 0; i < model.size(); ++i) {
    const auto& L = model.links[static_cast<std::size_t>(i)];
    theta += q(i);
    omega += qd(i);
    const Eigen::Vector2d d = link_dir(theta);
    const Eigen::Vector2d pc = pos + L.com * d;
    const Eigen::Vector2d vc = vel + omega * L.com * perp(d);
    e += 0.5 * L.mass * vc.squaredNorm() + 0.5 * L.inertia * omega * omega + L.mass * model.gravity * pc.y();
    pos += L.length * d;
    vel += omega * L.length * perp(d);
  }
  return e;
}

std::vector<Eigen::Vector2d> joint_positions(const Eigen::VectorXd& q, const LinkageModel& model) {
  require(q.size() == model.size(), ErrorCode::ShapeMismatch, "joint vector length does not match the linkage");
  std::vector<Eigen::Vector2d> out{Eigen::Vector2d::Zero()};
  double theta = 0.0;
  for (Index i = 0; i < model.size(); ++i) {
    theta += q(i);
    out.push_back(out.back() + model.links[static_cast<std::size_t>(i)].length * link_dir(theta));
  }
  return out;
}

BodyModel BodyModel::standard(const std::vector<std::string>& joint_names) {
  BodyModel body;
  const std::vector<std::string> leg{"hip_flexion_r", "knee_angle_r", "ankle_angle_r"};
  const bool has_leg = std::all_of(leg.begin(), leg.end(), [&](const std::string& n) {
    return std::find(joint_names.begin(), joint_names.end(), n) != joint_names.end();
  });
  if (has_leg) body.chains.push_back({LinkageModel::leg(), leg, {0.0, 0.0, 90.0}});
  for (const auto& name : joint_names) {
    if (has_leg && std::find(leg.begin(), leg.end(), name) != leg.end()) continue;
    LinkageModel m;
    if (name.rfind("lumbar", 0) == 0)
      m = LinkageModel::pendulum(35.0, 0.50, 0.25, 1.2);
    else if (name.rfind("hip", 0) == 0)
      m = LinkageModel::pendulum(11.3, 0.86, 0.37, 0.5);
    else if (name.rfind("subtalar", 0) == 0)
      m = LinkageModel::pendulum(1.0, 0.10, 0.05, 0.002);
    else
      m = LinkageModel::pendulum(5.0, 0.50, 0.25, 0.1);
    body.chains.push_back({m, {name}, {0.0}});
  }
  return body;
}

void BodyModel::validate(const ChannelSpec& channels) const {
  std::vector<std::string> seen;
  for (const auto& c : chains) {
    c.model.validate();
    require(static_cast<Index>(c.channels.size()) == c.model.size(), ErrorCode::ShapeMismatch,
            "chain channel count does not match its link count");
    require(c.offsets_deg.empty() || c.offsets_deg.size() == c.channels.size(), ErrorCode::ShapeMismatch,
            "chain offsets do not match its channels");
    for (const auto& n : c.channels) {
      auto idx = channels.index_of(n);
      require(idx.has_value() && channels.kind(*idx) == ChannelKind::JointAngle, ErrorCode::ShapeMismatch,
              "body model channel '" + n + "' is not a joint channel of the motion");
      require(std::find(seen.begin(), seen.end(), n) == seen.end(), ErrorCode::InvalidArgument,
              "channel '" + n + "' is driven by two chains");
      seen.push_back(n);
    }
  }
  for (const auto& n : channels.joint_names())
    require(std::find(seen.begin(), seen.end(), n) != seen.end(), ErrorCode::InvalidArgument,
            "joint channel '" + n + "' has no chain in the body model");
}

Matrix torques_from_angles(const Matrix& angles_deg, double frame_rate, const LinkageModel& model,
                           const std::vector<double>& offsets_deg) {
  model.validate();
  const Index T = angles_deg.rows(), k = model.size();
  require(angles_deg.cols() == k, ErrorCode::ShapeMismatch, "angle columns do not match the linkage size");
  require(T >= 3, ErrorCode::InvalidArgument, "torques need at least 3 frames for finite differences");
  require(frame_rate > 0.0, ErrorCode::InvalidArgument, "frame rate must be positive");
  Matrix q = angles_deg * kDegToRad;
  if (!offsets_deg.empty()) {
    require(static_cast<Index>(offsets_deg.size()) == k, ErrorCode::ShapeMismatch, "offset count mismatch");
    for (Index j = 0; j < k; ++j) q.col(j).array() += offsets_deg[static_cast<std::size_t>(j)] * kDegToRad;
  }
  const double dt = 1.0 / frame_rate;
  Matrix qd(T, k), qdd(T, k);
  for (Index t = 0; t < T; ++t) {
    if (t == 0) {
      qd.row(t) = (-3.0 * q.row(0) + 4.0 * q.row(1) - q.row(2)) / (2.0 * dt);
    } else if (t == T - 1) {
      qd.row(t) = (3.0 * q.row(t) - 4.0 * q.row(t - 1) + q.row(t - 2)) / (2.0 * dt);
    } else {
      qd.row(t) = (q.row(t + 1) - q.row(t - 1)) / (2.0 * dt);
    }
    if (T >= 4 && t == 0) {
      qdd.row(t) = (2.0 * q.row(0) - 5.0 * q.row(1) + 4.0 * q.row(2) - q.row(3)) / (dt * dt);
    } else if (T >= 4 && t == T - 1) {
      qdd.row(t) = (2.0 * q.row(t) - 5.0 * q.row(t - 1) + 4.0 * q.row(t - 2) - q.row(t - 3)) / (dt * dt);
    } else {
      const Index c = std::clamp<Index>(t, 1, T - 2);
      qdd.row(t) = (q.row(c + 1) - 2.0 * q.row(c) + q.row(c - 1)) / (dt * dt);
    }
  }
  Matrix tau(T, k);
  for (Index t = 0; t < T; ++t)
    tau.row(t) = analytic_id(q.row(t).transpose(), qd.row(t).transpose(), qdd.row(t).transpose(), model).transpose();
  return tau;
}

TorqueSequence torques_from_motion(const MotionSequence& seq, const BodyModel& body) {
  body.validate(seq.channels());
  const auto joints = seq.channels().joint_names();
  Matrix tau(seq.frames(), static_cast<Index>(joints.size()));
  for (const auto& chain : body.chains) {
    Matrix angles(seq.frames(), chain.model.size());
    for (Index i = 0; i < chain.model.size(); ++i)
      angles.col(i) = seq.data().col(*seq.channels().index_of(chain.channels[static_cast<std::size_t>(i)]));
    const Matrix t = torques_from_angles(angles, seq.frame_rate(), chain.model, chain.offsets_deg);
    for (Index i = 0; i < chain.model.size(); ++i) {
      const auto pos = std::find(joints.begin(), joints.end(), chain.channels[static_cast<std::size_t>(i)]);
      tau.col(pos - joints.begin()) = t.col(i);
    }
  }
  return TorqueSequence(ChannelSpec::joints_only(joints), std::move(tau), seq.frame_rate());
}

TorqueSequence normalized_torques(const MotionSequence& seq, const StanceSegmentation& seg, const BodyModel& body,
                                  Index n_norm) {
  body.validate(seq.channels());
  require(seg.total_frames() == seq.frames(), ErrorCode::ShapeMismatch, "segmentation does not cover the sequence");
  const auto joints = seq.channels().joint_names();
  const Index T = seq.frames();
  Matrix tau(T, static_cast<Index>(joints.size()));
  for (Index s = 0; s < seg.stance_count(); ++s) {
    const Index b = seg.start(s), d = seg.duration(s);
    require(d >= 2, ErrorCode::Segmentation, "stance " + std::to_string(s) + " is shorter than 2 frames");
    // One neighbour frame on each side keeps the stance edges on central differences.
    const Index lo = std::max<Index>(0, b - 1), hi = std::min<Index>(T, b + d + 1);
    const double rate = seq.frame_rate() * static_cast<double>(d - 1) / static_cast<double>(n_norm - 1);
    for (const auto& chain : body.chains) {
      Matrix angles(hi - lo, chain.model.size());
      for (Index i = 0; i < chain.model.size(); ++i)
        angles.col(i) = seq.data().col(*seq.channels().index_of(chain.channels[static_cast<std::size_t>(i)])).segment(lo, hi - lo);
      const Matrix t = torques_from_angles(angles, rate, chain.model, chain.offsets_deg);
      for (Index i = 0; i < chain.model.size(); ++i) {
        const auto pos = std::find(joints.begin(), joints.end(), chain.channels[static_cast<std::size_t>(i)]);
        tau.col(pos - joints.begin()).segment(b, d) = t.col(i).segment(b - lo, d);
      }
    }
  }
  return tempo::encode_with_map(TorqueSequence(ChannelSpec::joints_only(joints), std::move(tau), seq.frame_rate()),
                                tempo::build_frame_map(seg, n_norm));
}

std::string direction_name(Direction d) { return d == Direction::ID ? "id" : "fd"; }

Direction direction_from_name(const std::string& name) {
  if (name == "id") return Direction::ID;
  if (name == "fd") return Direction::FD;
  fail(ErrorCode::Parse, "unknown surrogate direction '" + name + "'");
}

void SurrogateConfig::validate() const {
  require(n_blocks >= 1 && n_heads >= 1 && width >= 1 && ffn_width >= 1, ErrorCode::InvalidArgument,
          "surrogate sizes must be positive");
  require(width % n_heads == 0, ErrorCode::InvalidArgument,
          "surrogate width " + std::to_string(width) + " is not divisible by " + std::to_string(n_heads) + " heads");
  require(window >= 2 && stride >= 1 && stride <= window, ErrorCode::InvalidArgument,
          "surrogate window must be >= 2 with 1 <= stride <= window");
}

Surrogate::Surrogate(SurrogateConfig config, std::vector<std::string> channels, std::uint64_t seed)
    : config_(config), channels_(std::move(channels)), seed_(seed) {
  config_.validate();
  require(!channels_.empty(), ErrorCode::InvalidArgument, "surrogate needs at least one channel");
  Rng rng(derive_seed(seed, 0x5u, static_cast<int>(config.direction)));
  nn::TransformerConfig tc;
  tc.in_channels = tc.out_channels = channel_count();
  tc.width = config.width;
  tc.heads = config.n_heads;
  tc.ffn_width = config.ffn_width;
  tc.blocks = config.n_blocks;
  net_ = nn::TransformerNet(tc, rng);
  in_stats_.mean = out_stats_.mean = Eigen::RowVectorXd::Zero(channel_count());
  in_stats_.scale = out_stats_.scale = Eigen::RowVectorXd::Ones(channel_count());
}

std::vector<Index> window_starts(Index frames, Index window, Index stride) {
  require(frames >= 1 && window >= 1 && stride >= 1, ErrorCode::InvalidArgument, "invalid windowing");
  std::vector<Index> starts;
  if (frames <= window) return {0};
  for (Index s = 0; s + window <= frames; s += stride) starts.push_back(s);
  if (starts.back() + window < frames) starts.push_back(frames - window);
  return starts;
}

Matrix Surrogate::infer_window(const Matrix& x) const { return net_.forward(x, nullptr); }

Matrix Surrogate::infer(const Matrix& x) const {
  require(x.cols() == channel_count(), ErrorCode::ShapeMismatch,
          "surrogate expects " + std::to_string(channel_count()) + " channels, got " + std::to_string(x.cols()));
  require(x.rows() >= 1, ErrorCode::ShapeMismatch, "surrogate input is empty");
  require(x.allFinite(), ErrorCode::NonFinite, "surrogate input has non-finite values");
  const Matrix z = in_stats_.apply(x);
  const Index T = z.rows();
  const Index W = std::min(config_.window, T);
  Matrix acc = Matrix::Zero(T, channel_count());
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(T);
  for (Index s : window_starts(T, W, std::max<Index>(1, W / 2))) {
    const Matrix y = net_.forward(z.middleRows(s, W), nullptr);
    for (Index i = 0; i < W; ++i) {
      const double w = static_cast<double>(std::min(i + 1, W - i));
      acc.row(s + i) += w * y.row(i);
      wsum(s + i) += w;
    }
  }
  for (Index t = 0; t < T; ++t) acc.row(t) /= wsum(t);
  return out_stats_.invert(acc);
}

nn::Checkpoint Surrogate::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.manifest["kind"] = "surrogate";
  ckpt.manifest["direction"] = direction_name(config_.direction);
  ckpt.manifest["architecture"] = {{"n_blocks", config_.n_blocks}, {"n_heads", config_.n_heads},
                                   {"width", config_.width},       {"ffn_width", config_.ffn_width},
                                   {"window", config_.window},     {"stride", config_.stride}};
  ckpt.manifest["channels"] = channels_;
  ckpt.manifest["seed"] = seed_;
  ckpt.put_params(const_cast<nn::TransformerNet&>(net_).parameters(), "net.");
  ckpt.put("stats.in_mean", in_stats_.mean);
  ckpt.put("stats.in_scale", in_stats_.scale);
  ckpt.put("stats.out_mean", out_stats_.mean);
  ckpt.put("stats.out_scale", out_stats_.scale);
  return ckpt;
}

Surrogate Surrogate::from_checkpoint(const nn::Checkpoint& ckpt) {
  SurrogateConfig cfg;
  std::vector<std::string> channels;
  std::uint64_t seed = 0;
  try {
    require(ckpt.manifest.at("kind").get<std::string>() == "surrogate", ErrorCode::Parse,
            "checkpoint is not a dynamics surrogate");
    const auto& a = ckpt.manifest.at("architecture");
    cfg.direction = direction_from_name(ckpt.manifest.at("direction").get<std::string>());
    cfg.n_blocks = a.at("n_blocks").get<Index>();
    cfg.n_heads = a.at("n_heads").get<Index>();
    cfg.width = a.at("width").get<Index>();
    cfg.ffn_width = a.at("ffn_width").get<Index>();
    cfg.window = a.at("window").get<Index>();
    cfg.stride = a.at("stride").get<Index>();
    channels = ckpt.manifest.at("channels").get<std::vector<std::string>>();
    seed = ckpt.manifest.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("surrogate checkpoint: ") + e.what());
  }
  Surrogate s(cfg, channels, seed);
  ckpt.get_params(s.net_.parameters(), "net.");
  s.in_stats_.mean = ckpt.get("stats.in_mean");
  s.in_stats_.scale = ckpt.get("stats.in_scale");
  s.out_stats_.mean = ckpt.get("stats.out_mean");
  s.out_stats_.scale = ckpt.get("stats.out_scale");
  return s;
}

void Surrogate::save(const std::filesystem::path& base) const { nn::save_checkpoint(to_checkpoint(), base); }

Surrogate Surrogate::load(const std::filesystem::path& base) { return from_checkpoint(nn::load_checkpoint(base)); }

namespace {

struct WindowRef {
  std::size_t seq;
  Index start;
};

std::vector<WindowRef> all_windows(const std::vector<Matrix>& seqs, Index window, Index stride) {
  std::vector<WindowRef> out;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    if (seqs[i].rows() >= window)
      for (Index s : window_starts(seqs[i].rows(), window, stride)) out.push_back({i, s});
  return out;
}

double window_loss(const nn::TransformerNet& net, const std::vector<Matrix>& in, const std::vector<Matrix>& tgt,
                   const std::vector<WindowRef>& windows, Index W) {
  if (windows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& w : windows) {
    const Matrix y = net.forward(in[w.seq].middleRows(w.start, W), nullptr);
    total += (y - tgt[w.seq].middleRows(w.start, W)).squaredNorm() / static_cast<double>(y.size());
  }
  return total / static_cast<double>(windows.size());
}

}  // namespace

Surrogate train_surrogate(const SequencePairs& train, const SequencePairs& validation,
                          const SurrogateConfig& config, const TrainConfig& tc,
                          const std::vector<std::string>& channels, TrainReport* report) {
  config.validate();
  require(!train.inputs.empty() && train.inputs.size() == train.targets.size(), ErrorCode::InvalidArgument,
          "surrogate training set is empty");
  require(validation.inputs.size() == validation.targets.size(), ErrorCode::InvalidArgument,
          "validation inputs and targets differ in count");
  require(tc.batch >= 1 && tc.epochs >= 0, ErrorCode::InvalidArgument, "batch must be >= 1 and epochs >= 0");
  for (std::size_t i = 0; i < train.inputs.size(); ++i)
    require(train.inputs[i].rows() == train.targets[i].rows(), ErrorCode::ShapeMismatch,
            "training pair " + std::to_string(i) + " has mismatched frame counts");

  Surrogate model(config, channels, tc.seed);
  model.input_stats() = Standardizer::fit(train.inputs);
  model.output_stats() = Standardizer::fit(train.targets);
  const Index W = config.window;

  auto standardize = [&](const std::vector<Matrix>& xs, const Standardizer& s) {
    std::vector<Matrix> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(s.apply(x));
    return out;
  };
  const auto tin = standardize(train.inputs, model.input_stats());
  const auto ttg = standardize(train.targets, model.output_stats());
  const auto vin = standardize(validation.inputs, model.input_stats());
  const auto vtg = standardize(validation.targets, model.output_stats());

  auto windows = all_windows(tin, W, config.stride);
  require(!windows.empty(), ErrorCode::InvalidArgument, "no training sequence is as long as the window");
  auto vwindows_all = all_windows(vin, W, config.stride);
  std::vector<WindowRef> vwindows;
  const auto vmax = static_cast<std::size_t>(std::max<Index>(1, tc.max_validation_windows));
  if (vwindows_all.size() <= vmax) {
    vwindows = vwindows_all;
  } else {
    for (std::size_t i = 0; i < vmax; ++i) vwindows.push_back(vwindows_all[i * vwindows_all.size() / vmax]);
  }

  auto& net = model.net();
  auto params = net.parameters();
  nn::Adam adam({tc.lr});
  nn::PlateauScheduler sched(tc.plateau);
  std::vector<Matrix> best;
  double best_val = std::numeric_limits<double>::infinity();
  TrainReport rep;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Rng rng(derive_seed(tc.seed, 0x7a1u, epoch));
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    const std::size_t used = std::min(order.size(), static_cast<std::size_t>(std::max<Index>(1, tc.max_windows_per_epoch)));
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < used; b0 += static_cast<std::size_t>(tc.batch)) {
      const std::size_t b1 = std::min(used, b0 + static_cast<std::size_t>(tc.batch));
      const double nb = static_cast<double>(b1 - b0);
      nn::zero_grads(params);
      double batch_loss = 0.0;
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& w = windows[order[i]];
        nn::TransformerNet::Cache cache;
        const Matrix y = net.forward(tin[w.seq].middleRows(w.start, W), &cache);
        auto loss = nn::mse_loss(y, ttg[w.seq].middleRows(w.start, W));
        batch_loss += loss.value;
        net.backward(cache, loss.grad / nb);
      }
      if (!std::isfinite(batch_loss))
        fail(ErrorCode::Divergence, direction_name(config.direction) + " surrogate diverged at epoch " +
                                        std::to_string(epoch) + ", batch " + std::to_string(b0 / tc.batch));
      adam.step(params);
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(used);
    const double val = vwindows.empty() ? epoch_loss : window_loss(net, vin, vtg, vwindows, W);
    require(std::isfinite(val), ErrorCode::Divergence,
            direction_name(config.direction) + " surrogate validation loss is non-finite at epoch " +
                std::to_string(epoch));
    rep.train_loss.push_back(epoch_loss);
    rep.val_loss.push_back(val);
    rep.lr.push_back(adam.learning_rate());
    if (val < best_val) {
      best_val = val;
      best.clear();
      for (auto* p : params) best.push_back(p->value);
    }
    adam.set_learning_rate(sched.step(val, adam.learning_rate()));
  }
  if (!best.empty())
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->value = best[i];
      ++params[i]->version;
    }
  rep.best_val_loss = best.empty() ? window_loss(net, vin, vtg, vwindows, W) : best_val;
  if (report) *report = std::move(rep);
  return model;
}

DynamicsCorpus build_dynamics_corpus(const DatasetBundle& bundle, const BodyModel& body, Index n_norm) {
  bundle.validate();
  DynamicsCorpus corpus;
  corpus.channels = bundle.subjects.front().nonfatigued.channels().joint_names();
  for (const auto& rec : bundle.subjects)
    for (auto state : {FatigueState::NonFatigued, FatigueState::Fatigued}) {
      const auto& motion = rec.motion(state);
      const auto& seg = rec.segmentation(state);
      const Matrix qn = tempo::encode_with_map(motion.joint_data(), tempo::build_frame_map(seg, n_norm));
      const Matrix tn = normalized_torques(motion, seg, body, n_norm).data();
      const Index split = bundle.split.first_validation_stance(seg.stance_count()) * n_norm;
      if (split > 0) {
        corpus.train.inputs.push_back(qn.topRows(split));
        corpus.train.targets.push_back(tn.topRows(split));
      }
      if (split < qn.rows()) {
        corpus.validation.inputs.push_back(qn.bottomRows(qn.rows() - split));
        corpus.validation.targets.push_back(tn.bottomRows(tn.rows() - split));
      }
    }
  return corpus;
}

SequencePairs oriented(const SequencePairs& angles_to_torques, Direction direction) {
  if (direction == Direction::ID) return angles_to_torques;
  return SequencePairs{angles_to_torques.targets, angles_to_torques.inputs};
}

Surrogate train_surrogate(const DatasetBundle& bundle, const BodyModel& body, const SurrogateConfig& config,
                          const TrainConfig& train_config, TrainReport* report) {
  const auto corpus = build_dynamics_corpus(bundle, body);
  return train_surrogate(oriented(corpus.train, config.direction), oriented(corpus.validation, config.direction),
                         config, train_config, corpus.channels, report);
}

TorqueSequence infer_torques(const Surrogate& id, const MotionSequence& motion) {
  require(id.config().direction == Direction::ID, ErrorCode::InvalidArgument, "surrogate is not an ID model");
  const auto joints = motion.channels().joint_names();
  require(joints == id.channels(), ErrorCode::ShapeMismatch, "motion joint channels do not match the ID surrogate");
  return TorqueSequence(ChannelSpec::joints_only(joints), id.infer(motion.joint_data()), motion.frame_rate());
}

Matrix infer_angles(const Surrogate& fd, const TorqueSequence& torques) {
  require(fd.config().direction == Direction::FD, ErrorCode::InvalidArgument, "surrogate is not an FD model");
  require(torques.channels().names() == fd.channels(), ErrorCode::ShapeMismatch,
          "torque channels do not match the FD surrogate");
  return fd.infer(torques.data());
}

}  // namespace ff::dynamics
