#include "common.hpp"

#include "ff/error.hpp"
#include "ff/intensity.hpp"
#include "ff/io.hpp"

#include <iostream>
#include <memory>

namespace ffusion {

namespace {

struct IntensityArgs {
  std::string torques;
  std::string reference;
  std::string job;
  std::string lambda;
  std::optional<double> u;
  std::string mode;
  std::optional<double> dt;
  std::string out;
};

void run_intensity(const IntensityArgs& a, const CLI::App& sub) {
  RunManifest manifest("intensity", sub);
  ff::intensity::IntensityJob job;
  if (!a.job.empty()) {
    job = ff::intensity::intensity_job_from_json(json::parse(ff::io::read_text(a.job)));
    manifest.input(a.job);
  }
  if (!a.lambda.empty()) job.lambda.lambda = parse_doubles(a.lambda);
  if (a.u) job.config.floor = *a.u;
  if (!a.mode.empty()) job.config.mode = ff::intensity::shaping_mode_from_name(a.mode);
  job.config.validate();
  job.rates.validate();

  const auto t_f = ff::load_torque_csv(a.torques);
  const auto t_nf = a.reference.empty() ? t_f : ff::load_torque_csv(a.reference);
  manifest.input(a.torques);
  if (!a.reference.empty()) manifest.input(a.reference);
  const double dt = a.dt ? *a.dt : 1.0 / t_f.frame_rate();
  ff::require(dt > 0.0, ff::ErrorCode::InvalidArgument, "--dt must be > 0");

  const ff::Matrix tl = ff::intensity::target_load(t_f, t_nf);
  const ff::Matrix m_f = ff::intensity::simulate_fatigue(tl, job.rates, std::vector<double>(static_cast<std::size_t>(tl.rows()), dt));
  const ff::Matrix factors = ff::intensity::intensity_factors(m_f, job.lambda, job.config);
  const auto shaped = ff::intensity::apply_intensity(t_f, m_f, job.lambda, job.config);

  const fs::path out = a.out;
  fs::create_directories(out);
  ff::intensity::save_factor_csv(tl, t_f.channels(), out / "TL.csv");
  ff::intensity::save_factor_csv(m_f, t_f.channels(), out / "M_F.csv");
  ff::intensity::save_factor_csv(factors, t_f.channels(), out / "RC_d.csv");
  ff::save_torque_csv(shaped, out / "T_hat_f_plus.csv");
  for (const char* f : {"TL.csv", "M_F.csv", "RC_d.csv", "T_hat_f_plus.csv"}) manifest.output(out / f);
  manifest.extra("intensity_job", ff::intensity::intensity_job_to_json(job));
  manifest.extra("dt", dt);
  manifest.write(manifest_path_for(out, true));
  std::cout << "min factor " << factors.minCoeff() << ", peak M_F " << m_f.maxCoeff() << " %MVC -> " << out.string()
            << '\n';
}

}  // namespace

void register_intensity(CLI::App& app) {
  auto a = std::make_shared<IntensityArgs>();
  auto* sub = app.add_subcommand("intensity", "Simulate 3CC fatigue on a torque CSV and scale it");
  sub->add_option("--torques", a->torques, "Fatigued torque CSV (T_f)")->required()->check(CLI::ExistingFile);
  sub->add_option("--reference", a->reference, "Non-fatigued torque CSV for the load scale (default: --torques)")
      ->check(CLI::ExistingFile);
  sub->add_option("--job", a->job, "Intensity job JSON {lambda, u, mode, rates}")->check(CLI::ExistingFile);
  sub->add_option("--lambda", a->lambda, "lambda per joint, or one value for all");
  sub->add_option("--u", a->u, "Intensity floor u")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--mode", a->mode, "RC shaping")->check(CLI::IsMember({"literal", "remaining_capacity"}));
  sub->add_option("--dt", a->dt, "Step size in s (default: 1 / frame rate)");
  sub->add_option("--out", a->out, "Output directory")->required();
  sub->callback([a, sub] { run_intensity(*a, *sub); });
}

}  // namespace ffusion
