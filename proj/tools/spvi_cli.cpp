#include <CLI11.hpp>

#include <iostream>

#include "cli_commands.hpp"

int main(int argc, char** argv) {
  using namespace spvi::cli;
  CLI::App app{"Spatial survival models fitted by variational inference or HMC"};
  app.require_subcommand(1);

  std::string config_path;
  FlagOverrides flags;
  std::vector<std::string> report_inputs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { flags.seed = v; }, "RNG seed");
    sub->add_option_function<unsigned>("--threads", [&](const unsigned& v) { flags.threads = v; },
                                       "worker threads (0 = all cores)");
    sub->add_option_function<std::string>("--out-dir", [&](const std::string& v) { flags.out_dir = v; },
                                          "output directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "simulate a dataset");
  add_common(sim);
  CLI::App* fit = app.add_subcommand("fit", "fit a model");
  add_common(fit);
  fit->add_option_function<std::string>("--engine", [&](const std::string& v) { flags.engine = v; },
                                        "vi-alpha | vi-kl | hmc")
      ->check(CLI::IsMember({"vi-alpha", "vi-kl", "hmc"}));
  fit->add_option_function<double>("--alpha", [&](const double& v) { flags.alpha = v; }, "divergence alpha");
  fit->add_option_function<int>("--mc-samples", [&](const int& v) { flags.mc_samples = v; },
                                "Monte Carlo samples per iteration");
  CLI::App* diag = app.add_subcommand("diagnose", "residuals, NLL and spatial summaries of a fit");
  add_common(diag);
  CLI::App* rep = app.add_subcommand("report", "comparison table across fits");
  add_common(rep);
  rep->add_option("inputs", report_inputs, "fit.json files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return run_guarded([&] {
    const nlohmann::json cfg = load_config(config_path, flags);
    if (sim->parsed()) cmd_simulate(cfg);
    else if (fit->parsed()) cmd_fit(cfg);
    else if (diag->parsed()) cmd_diagnose(cfg);
    else cmd_report(cfg, report_inputs);
  });
}
