#include "ff/pipeline.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"
#include "ff/random.hpp"
#include "ff/synth.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ff::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

Matrix savitzky_golay(const Matrix& data, Index window, Index order) {
  require(window >= 1 && window % 2 == 1, ErrorCode::InvalidArgument,
          "Savitzky-Golay window must be odd and >= 1, got " + std::to_string(window));
  if (window == 1) return data;
  require(order >= 0 && order < window, ErrorCode::InvalidArgument,
          "Savitzky-Golay order must be in [0, window), got " + std::to_string(order));
  require(window <= data.rows(), ErrorCode::InvalidArgument,
          "Savitzky-Golay window " + std::to_string(window) + " exceeds the " + std::to_string(data.rows()) +
              " frames");
  const Index h = window / 2;
  Eigen::MatrixXd A(window, order + 1);
  for (Index i = 0; i < window; ++i) {
    const double x = static_cast<double>(i - h) / static_cast<double>(h);
    double p = 1.0;
    for (Index k = 0; k <= order; ++k, p *= x) A(i, k) = p;
  }
  // Hat matrix: row i evaluates the window's least-squares fit at sample i.
  const Eigen::MatrixXd H = A * A.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window, window));
  const Index T = data.rows();
  Matrix out(T, data.cols());
  for (Index t = 0; t < T; ++t) {
    Index start = t - h, row = h;
    if (t < h) {
      start = 0;
      row = t;
    } else if (t >= T - h) {
      start = T - window;
      row = t - start;
    }
    out.row(t) = H.row(row) * data.middleRows(start, window);
  }
  return out;
}

void PostProcessSettings::validate() const {
  require(sg_window >= 1 && sg_window % 2 == 1, ErrorCode::InvalidArgument, "Savitzky-Golay window must be odd");
  require(sg_window == 1 || (sg_order >= 0 && sg_order < sg_window), ErrorCode::InvalidArgument,
          "Savitzky-Golay window must exceed the polynomial order");
  require(foot_lock_tolerance > 0.0, ErrorCode::InvalidArgument, "foot lock tolerance must be > 0");
  require(contact_fraction > 0.0 && contact_fraction <= 1.0, ErrorCode::InvalidArgument,
          "contact fraction must be in (0, 1]");
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct FootModel {
  dynamics::ChainAssignment leg;
  std::vector<Index> leg_cols;
  std::optional<Index> adduction;
  Index root_x = 0, root_z = 0;
};

std::optional<FootModel> foot_model(const ChannelSpec& channels) {
  const auto joints = channels.joint_names();
  const auto body = dynamics::BodyModel::standard(joints);
  for (const auto& chain : body.chains) {
    if (chain.channels.size() != 3 || chain.channels.front() != "hip_flexion_r") continue;
    FootModel f{chain, {}, channels.index_of("hip_adduction_r"), 0, 0};
    for (const auto& c : chain.channels) f.leg_cols.push_back(*channels.index_of(c));
    const auto roots = channels.root_indices();
    f.root_x = roots[0];
    f.root_z = roots[2];
    return f;
  }
  return std::nullopt;
}

// Foot (ankle) position relative to the root in the x/z plane.
Eigen::Vector2d foot_offset(const FootModel& f, const Matrix& data, Index t) {
  Eigen::VectorXd q(3);
  for (Index k = 0; k < 3; ++k)
    q(k) = (data(t, f.leg_cols[static_cast<std::size_t>(k)]) + f.leg.offsets_deg[static_cast<std::size_t>(k)]) * kDeg;
  const auto pts = dynamics::joint_positions(q, f.leg.model);
  double lateral = 0.0;
  if (f.adduction) {
    const double reach = f.leg.model.links[0].length + f.leg.model.links[1].length;
    lateral = -reach * std::sin(data(t, *f.adduction) * kDeg);
  }
  return {pts[2].x(), lateral};
}

Index contact_frames(Index duration, double fraction) {
  return std::clamp<Index>(static_cast<Index>(std::ceil(fraction * static_cast<double>(duration))), 1, duration);
}

double stance_drift(const FootModel& f, const Matrix& data, Index b, Index c) {
  const Eigen::Vector2d root0(data(b, f.root_x), data(b, f.root_z));
  const Eigen::Vector2d p0 = root0 + foot_offset(f, data, b);
  double drift = 0.0;
  for (Index t = b + 1; t < b + c; ++t) {
    const Eigen::Vector2d p = Eigen::Vector2d(data(t, f.root_x), data(t, f.root_z)) + foot_offset(f, data, t);
    drift = std::max(drift, (p - p0).norm());
  }
  return drift;
}

}  // namespace

double max_foot_drift(const MotionSequence& seq, const StanceSegmentation& seg, double contact_fraction) {
  require(seg.total_frames() == seq.frames(), ErrorCode::Segmentation, "segmentation does not cover the motion");
  const auto f = foot_model(seq.channels());
  if (!f) return 0.0;
  double drift = 0.0;
  for (Index s = 0; s < seg.stance_count(); ++s)
    drift = std::max(drift, stance_drift(*f, seq.data(), seg.start(s), contact_frames(seg.duration(s), contact_fraction)));
  return drift;
}

MotionSequence post_process(const MotionSequence& seq, const PostProcessSettings& settings,
                            const StanceSegmentation* seg) {
  settings.validate();
  Matrix data = savitzky_golay(seq.data(), settings.sg_window, settings.sg_order);
  if (settings.foot_lock && seg) {
    require(seg->total_frames() == seq.frames(), ErrorCode::Segmentation, "segmentation does not cover the motion");
    const auto f = foot_model(seq.channels());
    if (!f) {
      warn("foot lock skipped: motion has no hip/knee/ankle leg chain");
    } else {
      const Matrix src = data;
      for (Index s = 0; s < seg->stance_count(); ++s) {
        const Index b = seg->start(s), d = seg->duration(s);
        const Index c = contact_frames(d, settings.contact_fraction);
        if (stance_drift(*f, data, b, c) <= settings.foot_lock_tolerance) {
          // keep the stance but carry over any shift applied to earlier stances
          for (Index t = b; t < b + d; ++t)
            if (t > 0) {
              data(t, f->root_x) = data(t - 1, f->root_x) + src(t, f->root_x) - src(t - 1, f->root_x);
              data(t, f->root_z) = data(t - 1, f->root_z) + src(t, f->root_z) - src(t - 1, f->root_z);
            }
          continue;
        }
        if (b > 0) {
          data(b, f->root_x) = data(b - 1, f->root_x) + src(b, f->root_x) - src(b - 1, f->root_x);
          data(b, f->root_z) = data(b - 1, f->root_z) + src(b, f->root_z) - src(b - 1, f->root_z);
        }
        const Eigen::Vector2d anchor = Eigen::Vector2d(data(b, f->root_x), data(b, f->root_z)) + foot_offset(*f, data, b);
        for (Index t = b + 1; t < b + c; ++t) {
          const Eigen::Vector2d root = anchor - foot_offset(*f, data, t);
          data(t, f->root_x) = root.x();
          data(t, f->root_z) = root.y();
        }
        for (Index t = b + c; t < b + d; ++t) {
          data(t, f->root_x) = data(t - 1, f->root_x) + src(t, f->root_x) - src(t - 1, f->root_x);
          data(t, f->root_z) = data(t - 1, f->root_z) + src(t, f->root_z) - src(t - 1, f->root_z);
        }
      }
    }
  }
  return MotionSequence(seq.channels(), std::move(data), seq.frame_rate());
}

Models Models::load(const CheckpointPaths& paths) {
  Models m;
  m.id = dynamics::Surrogate::load(paths.id);
  m.fd = dynamics::Surrogate::load(paths.fd);
  m.cvae = latent::CvaeModel::load(paths.cvae);
  m.fusion = latent::FusionAeModel::load(paths.fusion);
  require(m.id.config().direction == dynamics::Direction::ID, ErrorCode::Stage, paths.id.string() + " is not an ID surrogate");
  require(m.fd.config().direction == dynamics::Direction::FD, ErrorCode::Stage, paths.fd.string() + " is not an FD surrogate");
  return m;
}

void Models::check_compatible(const std::vector<std::string>& joints) const {
  const auto J = static_cast<Index>(joints.size());
  require(id.channels() == joints, ErrorCode::Stage, "ID surrogate channels do not match the motion's joints");
  require(fd.channels() == joints, ErrorCode::Stage, "FD surrogate channels do not match the motion's joints");
  require(cvae.codec().channels() == J, ErrorCode::Stage,
          "CVAE expects " + std::to_string(cvae.codec().channels()) + " torque channels, motion has " +
              std::to_string(J));
  require(fusion.codec().channels() == J, ErrorCode::Stage,
          "FusionAE expects " + std::to_string(fusion.codec().channels()) + " torque channels, motion has " +
              std::to_string(J));
  require(cvae.codec().n_norm == fusion.codec().n_norm, ErrorCode::Stage,
          "CVAE and FusionAE disagree on the normalized stance length");
}

void PipelineTrace::put(const std::string& symbol, const ChannelSpec& channels, const Matrix& data,
                        double frame_rate) {
  require(!has(symbol), ErrorCode::Stage, "trace already holds '" + symbol + "'");
  entries.push_back({symbol, channels, data, frame_rate});
}

bool PipelineTrace::has(const std::string& symbol) const {
  return std::any_of(entries.begin(), entries.end(), [&](const Entry& e) { return e.symbol == symbol; });
}

const PipelineTrace::Entry& PipelineTrace::get(const std::string& symbol) const {
  for (const auto& e : entries)
    if (e.symbol == symbol) return e;
  fail(ErrorCode::Stage, "trace has no artifact '" + symbol + "'");
}

void PipelineTrace::dump(const fs::path& dir) const {
  fs::create_directories(dir);
  for (const auto& e : entries) {
    const auto path = dir / (e.symbol + ".csv");
    if (e.channels.root_indices().empty())
      save_torque_csv(TorqueSequence(e.channels, e.data, e.frame_rate), path);
    else
      save_motion_csv(MotionSequence(e.channels, e.data, e.frame_rate), path);
  }
}

tempo::TempoProfile fit_tempo(const std::vector<Index>& k, Index stances) {
  require(!k.empty(), ErrorCode::InvalidArgument, "tempo profile K is empty");
  require(stances >= 1, ErrorCode::InvalidArgument, "need at least one stance");
  tempo::TempoProfile p;
  for (Index s = 0; s < stances; ++s) p.durations.push_back(k[static_cast<std::size_t>(s) % k.size()]);
  return p;
}

std::vector<double> normalized_step_sizes(const StanceSegmentation& seg, double frame_rate, Index n_norm) {
  require(frame_rate > 0.0, ErrorCode::InvalidArgument, "frame rate must be > 0");
  std::vector<double> dt;
  dt.reserve(static_cast<std::size_t>(seg.stance_count() * n_norm));
  for (Index s = 0; s < seg.stance_count(); ++s)
    dt.insert(dt.end(), static_cast<std::size_t>(n_norm),
              static_cast<double>(seg.duration(s)) / (frame_rate * static_cast<double>(n_norm)));
  return dt;
}

Matrix match_stances(const Matrix& normalized, Index n_norm, Index stances) {
  require(normalized.rows() > 0 && normalized.rows() % n_norm == 0, ErrorCode::ShapeMismatch,
          "sequence is not tempo-normalized to " + std::to_string(n_norm) + " frames per stance");
  const Index have = normalized.rows() / n_norm;
  Matrix out(stances * n_norm, normalized.cols());
  for (Index s = 0; s < stances; ++s) out.middleRows(s * n_norm, n_norm) = normalized.middleRows((s % have) * n_norm, n_norm);
  return out;
}

namespace {

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + name + ": " + e.what());
  }
}

struct FrontEnd {
  MotionSequence q_dot;
  tempo::FrameMap map;
  TorqueSequence t_nf;
  TorqueSequence t_hat_f;
  TorqueSequence partner;
};

FrontEnd front_end(const MotionSequence& q_nf, const StanceSegmentation& seg, const ControlParams& c,
                   const Models& models, const PipelineConfig& cfg, PipelineTrace* trace,
                   const TorqueSequence* partner) {
  const auto joints = q_nf.channels().joint_names();
  stage("models", [&] {
    models.check_compatible(joints);
    c.validate(models.cvae.config().n_subjects);
    require(models.cvae.codec().n_norm == cfg.n_norm, ErrorCode::Stage,
            "models were trained with " + std::to_string(models.cvae.codec().n_norm) +
                " normalized frames per stance, pipeline uses " + std::to_string(cfg.n_norm));
    return 0;
  });
  auto [q_dot, map] = stage("tempo", [&] { return tempo::encode_normalize(q_nf, seg, cfg.n_norm); });
  if (trace) trace->put("Q_dot_nf", q_dot.channels(), q_dot.data(), q_dot.frame_rate());
  auto t_nf = stage("inverse_dynamics", [&] { return dynamics::infer_torques(models.id, q_dot); });
  if (trace) trace->put("T_nf", t_nf.channels(), t_nf.data(), t_nf.frame_rate());
  auto t_hat_f = stage("cvae", [&] { return latent::cvae_generate(models.cvae, t_nf, c.label, cfg.seed); });
  if (trace) trace->put("T_hat_f", t_hat_f.channels(), t_hat_f.data(), t_hat_f.frame_rate());
  TorqueSequence p = t_nf;
  if (partner)
    p = stage("partner", [&] {
      require(partner->channels() == t_nf.channels(), ErrorCode::ShapeMismatch, "partner torque channels differ");
      return TorqueSequence(t_nf.channels(), match_stances(partner->data(), cfg.n_norm, map.stance_count()),
                            t_nf.frame_rate());
    });
  return {std::move(q_dot), std::move(map), std::move(t_nf), std::move(t_hat_f), std::move(p)};
}

Matrix intensity_m_f(const TorqueSequence& t_hat_f, const FrontEnd& fe, const StanceSegmentation& seg,
                     double frame_rate, const PipelineConfig& cfg) {
  const Matrix tl = intensity::target_load(t_hat_f, fe.t_nf);
  return intensity::simulate_fatigue(tl, cfg.intensity.rates, normalized_step_sizes(seg, frame_rate, cfg.n_norm));
}

MotionSequence back_end(const TorqueSequence& t_prime, const FrontEnd& fe, const ControlParams& c, const Models& models, const PipelineConfig& cfg,
                        PipelineTrace* trace) {
  const Matrix angles = stage("forward_dynamics", [&] { return dynamics::infer_angles(models.fd, t_prime); });
  Matrix full = fe.q_dot.data();
  const auto jidx = fe.q_dot.channels().joint_indices();
  for (std::size_t k = 0; k < jidx.size(); ++k) full.col(jidx[k]) = angles.col(static_cast<Index>(k));
  MotionSequence q_prime(fe.q_dot.channels(), std::move(full), fe.q_dot.frame_rate());
  if (trace) trace->put("Q_hat_prime_f", q_prime.channels(), q_prime.data(), q_prime.frame_rate());
  return stage("tempo_decode", [&] {
    std::optional<StanceSegmentation> out_seg;
    MotionSequence out = q_prime;
    if (c.tempo.empty()) {
      out = tempo::decode_with_map(q_prime, fe.map);
      out_seg = StanceSegmentation::from_durations(fe.map.durations());
    } else {
      const auto k = fit_tempo(c.tempo, fe.map.stance_count());
      out = tempo::retime(q_prime, k);
      out_seg = StanceSegmentation::from_durations(k.durations);
    }
    return stage("post_process", [&] { return post_process(out, cfg.post, &*out_seg); });
  });
}

}  // namespace

MotionSequence run_fatiguefusion(const MotionSequence& q_nf, const StanceSegmentation& seg, const ControlParams& c,
                                 const Models& models, const PipelineConfig& cfg, PipelineTrace* trace,
                                 const TorqueSequence* partner) {
  const auto fe = front_end(q_nf, seg, c, models, cfg, trace, partner);
  TorqueSequence fatigued = fe.t_hat_f;
  if (c.intensity_enabled) {
    fatigued = stage("intensity", [&] {
      intensity::IntensityConfig ic = cfg.intensity.config;
      ic.floor = c.intensity_floor;
      return intensity::apply_intensity(fe.t_hat_f, intensity_m_f(fe.t_hat_f, fe, seg, q_nf.frame_rate(), cfg),
                                        cfg.intensity.lambda, ic);
    });
    if (trace) trace->put("T_hat_f_plus", fatigued.channels(), fatigued.data(), fatigued.frame_rate());
  }
  const auto t_prime =
      stage("fusion", [&] { return latent::fusion_pipeline(models.fusion, fe.partner, fatigued, c.fusion_weights); });
  if (trace) trace->put("T_hat_prime_f", t_prime.channels(), t_prime.data(), t_prime.frame_rate());
  return back_end(t_prime, fe, c, models, cfg, trace);
}

MotionSequence run_progressive(const MotionSequence& q_nf, const StanceSegmentation& seg, const ControlParams& c,
                               const Models& models, const PipelineConfig& cfg, std::vector<double> w2,
                               std::vector<double> floor_ramp, PipelineTrace* trace, const TorqueSequence* partner) {
  const auto fe = front_end(q_nf, seg, c, models, cfg, trace, partner);
  const Index T = fe.t_nf.frames();
  if (w2.empty()) w2 = latent::linear_ramp(T);
  if (floor_ramp.empty()) floor_ramp = w2;
  require(static_cast<Index>(floor_ramp.size()) == T, ErrorCode::ShapeMismatch,
          "floor ramp has " + std::to_string(floor_ramp.size()) + " entries for " + std::to_string(T) + " frames");
  TorqueSequence fatigued = fe.t_hat_f;
  if (c.intensity_enabled) {
    fatigued = stage("intensity", [&] {
      intensity::IntensityConfig ic = cfg.intensity.config;
      ic.floor = 0.0;
      const Matrix m_f = intensity_m_f(fe.t_hat_f, fe, seg, q_nf.frame_rate(), cfg);
      Matrix factors = intensity::intensity_factors(m_f, cfg.intensity.lambda, ic);
      for (Index t = 0; t < T; ++t) {
        const double r = floor_ramp[static_cast<std::size_t>(t)];
        require(r >= 0.0 && r <= 1.0, ErrorCode::Weights, "floor ramp outside [0, 1] at frame " + std::to_string(t));
        const double floor_t = 1.0 - r * (1.0 - c.intensity_floor);
        factors.row(t) = factors.row(t).cwiseMax(floor_t);
      }
      return TorqueSequence(fe.t_hat_f.channels(), factors.cwiseProduct(fe.t_hat_f.data()), fe.t_hat_f.frame_rate());
    });
    if (trace) trace->put("T_hat_f_plus", fatigued.channels(), fatigued.data(), fatigued.frame_rate());
  }
  const auto t_prime = stage("fusion", [&] { return latent::dynamic_fusion(models.fusion, fe.partner, fatigued, w2); });
  if (trace) trace->put("T_hat_prime_f", t_prime.channels(), t_prime.data(), t_prime.frame_rate());
  return back_end(t_prime, fe, c, models, cfg, trace);
}

// ---------------------------------------------------------------------------
// Job files

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.empty() || p.is_absolute() ? p : base / p;
}

MotionInput motion_input_from(const json& j, const fs::path& base) {
  MotionInput in;
  if (j.contains("dataset")) {
    in.dataset = resolve(j.at("dataset").get<std::string>(), base);
    in.subject = j.at("subject").get<int>();
    in.state = j.value("state", std::string("nonfatigued"));
    require(in.state == "nonfatigued" || in.state == "fatigued", ErrorCode::Parse, "unknown state '" + in.state + "'");
    return in;
  }
  in.motion = resolve(j.at("motion").get<std::string>(), base);
  if (j.contains("boundaries")) {
    in.boundaries = j.at("boundaries").get<std::vector<Index>>();
  } else {
    in.segmentation.contact_channel = j.value("contact_channel", std::string("knee_angle_r"));
    require(j.contains("threshold"), ErrorCode::Parse, "motion input needs 'boundaries' or 'threshold'");
    in.segmentation.threshold = j.at("threshold").get<double>();
  }
  return in;
}

}  // namespace

std::pair<MotionSequence, StanceSegmentation> MotionInput::load(const fs::path& base) const {
  if (!dataset.empty()) {
    const auto bundle = ingest_external_csv(resolve(dataset, base));
    const auto& rec = bundle.subject(SubjectId{subject});
    const auto st = state == "fatigued" ? FatigueState::Fatigued : FatigueState::NonFatigued;
    return {rec.motion(st), rec.segmentation(st)};
  }
  auto seq = load_motion_csv(resolve(motion, base));
  SegmentationParams sp = segmentation;
  if (boundaries) {
    sp.method = SegmentationMethod::Provided;
    sp.boundaries = *boundaries;
  }
  auto seg = segment_stances(seq, sp);
  return {std::move(seq), std::move(seg)};
}

PipelineJob pipeline_job_from_json(const json& j, const fs::path& base) {
  PipelineJob job;
  try {
    const auto mode = j.value("mode", std::string("static"));
    require(mode == "static" || mode == "progressive", ErrorCode::Parse, "job mode must be static or progressive");
    job.mode = mode == "static" ? PipelineJob::Mode::Static : PipelineJob::Mode::Progressive;
    job.input = motion_input_from(j.at("input"), base);
    if (j.contains("partner")) job.partner = motion_input_from(j.at("partner"), base);
    const auto& c = j.at("control");
    job.control.label = SubjectId{c.at("label").get<int>()};
    if (c.contains("W")) job.control.fusion_weights = c.at("W").get<std::vector<double>>();
    if (c.contains("K")) {
      if (c.at("K").is_array())
        job.control.tempo = c.at("K").get<std::vector<Index>>();
      else
        job.tempo_from = motion_input_from(c.at("K"), base);
    }
    job.control.intensity_floor = c.value("u", job.control.intensity_floor);
    job.control.intensity_enabled = c.value("intensity", false);
    const auto& ck = j.at("checkpoints");
    job.checkpoints.id = resolve(ck.at("id").get<std::string>(), base);
    job.checkpoints.fd = resolve(ck.at("fd").get<std::string>(), base);
    job.checkpoints.cvae = resolve(ck.at("cvae").get<std::string>(), base);
    job.checkpoints.fusion = resolve(ck.at("fusionae").get<std::string>(), base);
    if (j.contains("intensity")) job.config.intensity = intensity::intensity_job_from_json(j.at("intensity"));
    if (j.contains("postprocess")) {
      const auto& p = j.at("postprocess");
      job.config.post.sg_window = p.value("sg_window", job.config.post.sg_window);
      job.config.post.sg_order = p.value("sg_order", job.config.post.sg_order);
      job.config.post.foot_lock = p.value("foot_lock", job.config.post.foot_lock);
      job.config.post.foot_lock_tolerance = p.value("foot_lock_tolerance", job.config.post.foot_lock_tolerance);
      job.config.post.contact_fraction = p.value("contact_fraction", job.config.post.contact_fraction);
      job.config.post.validate();
    }
    job.config.seed = j.value("seed", job.config.seed);
    if (j.contains("ramp")) job.ramp = j.at("ramp").get<std::vector<double>>();
    if (j.contains("floor_ramp")) job.floor_ramp = j.at("floor_ramp").get<std::vector<double>>();
    const auto& out = j.at("output");
    job.output = resolve(out.at("motion").get<std::string>(), base);
    if (out.contains("trace")) job.trace_dir = resolve(out.at("trace").get<std::string>(), base);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("pipeline job: ") + e.what());
  }
  validate_fusion_weights(job.control.fusion_weights);
  return job;
}

MotionSequence run_job(const PipelineJob& job, const fs::path& base, PipelineTrace* trace) {
  const auto models = Models::load(job.checkpoints);
  const auto [q_nf, seg] = job.input.load(base);
  ControlParams c = job.control;
  if (job.tempo_from) c.tempo = job.tempo_from->load(base).second.durations();
  std::optional<TorqueSequence> partner;
  if (job.partner) {
    const auto [pq, pseg] = job.partner->load(base);
    partner = stage("partner", [&] {
      return dynamics::infer_torques(models.id, tempo::encode_normalize(pq, pseg, job.config.n_norm).first);
    });
  }
  const TorqueSequence* p = partner ? &*partner : nullptr;
  if (job.mode == PipelineJob::Mode::Progressive)
    return run_progressive(q_nf, seg, c, models, job.config, job.ramp, job.floor_ramp, trace, p);
  return run_fatiguefusion(q_nf, seg, c, models, job.config, trace, p);
}

TorqueCorpus build_torque_corpus(const DatasetBundle& bundle, const dynamics::Surrogate* id, Index n_norm) {
  bundle.validate();
  const auto joints = bundle.subjects.front().nonfatigued.channels().joint_names();
  const auto body = dynamics::BodyModel::standard(joints);
  auto torques = [&](const MotionSequence& m, const StanceSegmentation& seg) {
    if (!id) return dynamics::normalized_torques(m, seg, body, n_norm);
    return dynamics::infer_torques(*id, tempo::encode_normalize(m, seg, n_norm).first);
  };
  TorqueCorpus c;
  for (int i = 0; i < bundle.subject_count(); ++i) {
    const auto& rec = bundle.subject(SubjectId{i});
    c.nonfatigued.push_back(torques(rec.nonfatigued, rec.segmentation_nf));
    c.fatigued.push_back(torques(rec.fatigued, rec.segmentation_f));
    const Matrix& a = c.nonfatigued.back().data();
    const Matrix& b = c.fatigued.back().data();
    const Index S = std::min(a.rows(), b.rows()) / n_norm;
    const Index v = bundle.split.first_validation_stance(S);
    if (v > 0) c.train.push_back({a.topRows(v * n_norm), b.topRows(v * n_norm), rec.subject});
    if (v < S) c.validation.push_back({a.middleRows(v * n_norm, (S - v) * n_norm), b.middleRows(v * n_norm, (S - v) * n_norm), rec.subject});
  }
  return c;
}

FusionCorpus build_fusion_corpus(const TorqueCorpus& corpus, const latent::CvaeModel* cvae, std::uint64_t seed) {
  FusionCorpus out;
  for (const auto& p : corpus.train) {
    out.train.push_back(p.nonfatigued);
    out.train.push_back(p.fatigued);
    if (cvae) {
      const TorqueSequence nf(corpus.nonfatigued.front().channels(), p.nonfatigued,
                              corpus.nonfatigued.front().frame_rate());
      out.train.push_back(latent::cvae_generate(*cvae, nf, p.subject, derive_seed(seed, p.subject.value)).data());
    }
  }
  for (const auto& p : corpus.validation) {
    out.validation.push_back(p.nonfatigued);
    out.validation.push_back(p.fatigued);
  }
  return out;
}

}  // namespace ff::pipeline
