#include "common.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"
#include "ff/pipeline.hpp"
#include "ff/synth.hpp"

#include <iostream>
#include <memory>

namespace ffusion {

namespace {

struct SynthArgs {
  std::string job;
  std::string input;
  int subject = -1;
  std::string state = "nonfatigued";
  std::string boundaries;
  std::optional<double> threshold;
  std::string contact_channel = "knee_angle_r";
  std::string partner;
  int partner_subject = -1;
  int label = -1;
  std::string weights = "0,1";
  std::string tempo;
  double u = 1.0;
  std::string intensity = "off";
  std::string lambda = "1";
  std::string mode = "remaining_capacity";
  std::string ramp;
  std::uint64_t seed = 1;
  std::string data;
  std::string checkpoints;
  ff::Index sg_window = ff::pipeline::PostProcessSettings{}.sg_window;
  ff::Index sg_order = ff::pipeline::PostProcessSettings{}.sg_order;
  bool no_foot_lock = false;
  std::string out;
  std::string trace;
};

/// Motion CSV input: provided boundaries, an explicit threshold, or the mean
/// of the contact channel as threshold.
ff::pipeline::MotionInput motion_input(const std::string& csv, int subject, const std::string& state,
                                       const SynthArgs& a, const fs::path& data) {
  ff::pipeline::MotionInput in;
  if (!csv.empty()) {
    in.motion = csv;
    in.segmentation.contact_channel = a.contact_channel;
    if (!a.boundaries.empty()) {
      in.boundaries = parse_indices(a.boundaries);
    } else if (a.threshold) {
      in.segmentation.threshold = *a.threshold;
    } else {
      const auto seq = ff::load_motion_csv(csv);
      const auto c = seq.channels().index_of(a.contact_channel);
      ff::require(c.has_value(), ff::ErrorCode::Segmentation,
                  "contact channel '" + a.contact_channel + "' not in " + csv);
      in.segmentation.threshold = seq.data().col(*c).mean();
    }
    return in;
  }
  ff::require(subject >= 0, ff::ErrorCode::InvalidArgument, "give --input <csv> or --subject <id>");
  in.dataset = data;
  in.subject = subject;
  in.state = state;
  return in;
}

ff::pipeline::PipelineJob job_from_flags(const SynthArgs& a, bool progressive) {
  const fs::path data = a.data.empty() ? default_data_root() : fs::path(a.data);
  const fs::path ck = a.checkpoints.empty() ? data / "checkpoints" : fs::path(a.checkpoints);
  ff::pipeline::PipelineJob job;
  job.mode = progressive ? ff::pipeline::PipelineJob::Mode::Progressive : ff::pipeline::PipelineJob::Mode::Static;
  job.input = motion_input(a.input, a.subject, a.state, a, data);
  if (!a.partner.empty() || a.partner_subject >= 0)
    job.partner = motion_input(a.partner, a.partner_subject, "nonfatigued", a, data);
  ff::require(a.label >= 0, ff::ErrorCode::InvalidArgument, "--label is required");
  job.control.label = ff::SubjectId{a.label};
  job.control.fusion_weights = parse_doubles(a.weights);
  ff::validate_fusion_weights(job.control.fusion_weights);
  if (a.tempo.rfind("subject:", 0) == 0) {
    ff::pipeline::MotionInput k;
    k.dataset = data;
    k.subject = static_cast<int>(parse_indices(a.tempo.substr(8)).at(0));
    k.state = "fatigued";
    job.tempo_from = k;
  } else if (!a.tempo.empty()) {
    job.control.tempo = parse_indices(a.tempo);
  }
  job.control.intensity_floor = a.u;
  job.control.intensity_enabled = a.intensity == "on";
  job.config.intensity.lambda.lambda = parse_doubles(a.lambda);
  job.config.intensity.config.floor = a.u;
  job.config.intensity.config.mode = ff::intensity::shaping_mode_from_name(a.mode);
  job.config.post.sg_window = a.sg_window;
  job.config.post.sg_order = a.sg_order;
  job.config.post.foot_lock = !a.no_foot_lock;
  job.config.post.validate();
  job.config.seed = a.seed;
  if (!a.ramp.empty()) job.ramp = parse_doubles(a.ramp);
  job.checkpoints = {ck / "id", ck / "fd", ck / "cvae", ck / "fusionae"};
  ff::require(!a.out.empty(), ff::ErrorCode::InvalidArgument, "--out is required");
  job.output = a.out;
  if (!a.trace.empty()) job.trace_dir = a.trace;
  return job;
}

void check_checkpoints(const ff::pipeline::CheckpointPaths& p) {
  std::string missing;
  for (const auto& [name, path] : {std::pair{"id", p.id}, {"fd", p.fd}, {"cvae", p.cvae}, {"fusionae", p.fusion}})
    if (!fs::exists(fs::path(path).concat(".json"))) missing += std::string(missing.empty() ? "" : ", ") + name + " (" + path.string() + ")";
  ff::require(missing.empty(), ff::ErrorCode::MissingCheckpoint, "missing checkpoints: " + missing);
}

void run_synth(const SynthArgs& a, const CLI::App& sub, bool progressive) {
  RunManifest manifest(progressive ? "progressive" : "synth", sub);
  ff::pipeline::PipelineJob job;
  fs::path base = fs::current_path();
  if (!a.job.empty()) {
    base = fs::absolute(a.job).parent_path();
    job = ff::pipeline::pipeline_job_from_json(json::parse(ff::io::read_text(a.job)), base);
    if (progressive) job.mode = ff::pipeline::PipelineJob::Mode::Progressive;
    if (!a.out.empty()) job.output = a.out;
    if (!a.trace.empty()) job.trace_dir = a.trace;
    manifest.input(a.job);
    manifest.extra("job", json::parse(ff::io::read_text(a.job)));
  } else {
    job = job_from_flags(a, progressive);
  }
  check_checkpoints(job.checkpoints);
  ff::pipeline::PipelineTrace trace;
  const auto out = ff::pipeline::run_job(job, base, job.trace_dir.empty() ? nullptr : &trace);
  ff::save_motion_csv(out, job.output);
  manifest.seed(job.config.seed);
  for (const auto& p : {job.checkpoints.id, job.checkpoints.fd, job.checkpoints.cvae, job.checkpoints.fusion})
    manifest.input(p);
  manifest.output(job.output);
  if (!job.trace_dir.empty()) {
    trace.dump(job.trace_dir);
    manifest.output(job.trace_dir);
  }
  manifest.write(manifest_path_for(job.output, false));
  std::cout << "wrote " << out.frames() << " frames to " << job.output.string() << '\n';
}

void add_common(CLI::App* sub, SynthArgs& a) {
  sub->add_option("--job", a.job, "Pipeline job JSON (other input/control flags are ignored)");
  sub->add_option("--input", a.input, "Non-fatigued motion CSV");
  sub->add_option("--subject", a.subject, "Use this dataset subject's motion as input");
  sub->add_option("--state", a.state, "State of --subject input")->check(CLI::IsMember({"nonfatigued", "fatigued"}));
  sub->add_option("--boundaries", a.boundaries, "Stance start frames of --input/--partner, comma-separated");
  sub->add_option("--threshold", a.threshold, "Contact threshold (default: contact channel mean)");
  sub->add_option("--contact-channel", a.contact_channel, "Channel used for threshold segmentation")->capture_default_str();
  sub->add_option("--partner", a.partner, "Non-fatigued motion CSV fused with the CVAE output (default: input)");
  sub->add_option("--partner-subject", a.partner_subject, "Dataset subject used as partner");
  sub->add_option("--label", a.label, "Target fatigue profile label L");
  sub->add_option("--tempo", a.tempo, "Tempo K: stance durations 'd1,d2,...' or 'subject:<id>'");
  sub->add_option("--u", a.u, "Intensity floor u")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sub->add_option("--intensity", a.intensity, "Fatigue intensity stage")->capture_default_str()->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--lambda", a.lambda, "lambda per joint, or one value for all")->capture_default_str();
  sub->add_option("--mode", a.mode, "RC shaping")->capture_default_str()->check(CLI::IsMember({"literal", "remaining_capacity"}));
  sub->add_option("--seed", a.seed, "CVAE sampling seed")->capture_default_str();
  sub->add_option("--data", a.data, "Dataset directory (default: data root)");
  sub->add_option("--checkpoints", a.checkpoints, "Checkpoint directory (default: <data>/checkpoints)");
  sub->add_option("--sg-window", a.sg_window, "Savitzky-Golay window")->capture_default_str();
  sub->add_option("--sg-order", a.sg_order, "Savitzky-Golay polynomial order")->capture_default_str();
  sub->add_flag("--no-foot-lock", a.no_foot_lock, "Skip root re-integration");
  sub->add_option("--out", a.out, "Output motion CSV");
  sub->add_option("--trace", a.trace, "Directory for intermediate CSVs");
}

}  // namespace

void register_synth(CLI::App& app) {
  auto a = std::make_shared<SynthArgs>();
  auto* sub = app.add_subcommand("synth", "Synthesize a fatigued motion from a non-fatigued one");
  add_common(sub, *a);
  sub->add_option("--weights", a->weights, "Fusion weights W = w_nf,w_f (sum to 1)")->capture_default_str();
  sub->callback([a, sub] { run_synth(*a, *sub, false); });

  auto p = std::make_shared<SynthArgs>();
  auto* prog = app.add_subcommand("progressive", "Progressively fatigued motion via dynamic fusion");
  add_common(prog, *p);
  prog->add_option("--ramp", p->ramp, "Fatigued weight per normalized frame (default: linear 0..1)");
  prog->callback([p, prog] { run_synth(*p, *prog, true); });
}

}  // namespace ffusion
