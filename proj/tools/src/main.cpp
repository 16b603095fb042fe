#include "common.hpp"

#include "ff/error.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"FatigueFusion: fatigue-driven gait synthesis toolkit", "ffusion"};
  app.set_version_flag("--version", ffusion::kToolVersion);
  app.require_subcommand(1);
  app.footer(std::string("Data root defaults to $") + ffusion::kDataEnv + " (else ./ffdata).");

  ffusion::register_gen_data(app);
  ffusion::register_train(app);
  ffusion::register_synth(app);
  ffusion::register_intensity(app);
  ffusion::register_eval(app);
  ffusion::register_ablate(app);

  ff::set_warning_handler([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) std::cerr << ff::code_name(ff::ErrorCode::InvalidArgument) << ": ";
    return app.exit(e);
  } catch (const ff::Error& e) {
    std::cerr << ff::code_name(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "E_INTERNAL: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
