#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "spfit/errors.hpp"
#include "spfit/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> data;
  std::int64_t seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON configuration file");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "Master random seed");
  cmd->add_option("--threads", args.threads, "Worker count (0 = hardware concurrency)");
}

spfit::RunConfig build_config(const CommonArgs& args) {
  spfit::RunConfig config;
  if (!args.config_path.empty()) {
    config = spfit::load_config(args.config_path);
  }
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.threads >= 0) config.threads = args.threads;
  if (!args.data.empty()) {
    config.data_files.clear();
    for (const auto& d : args.data) config.data_files.emplace_back(d);
  }
  if (config.threads == 0) {
    if (const char* env = std::getenv("SPFIT_THREADS")) {
      config.threads = std::atoi(env);
    }
  }
  spfit::apply_defaults(config);
  return config;
}

int fail_with_json(const std::string& code, const std::string& message) {
  nlohmann::json doc;
  doc["error"] = code;
  doc["message"] = message;
  std::cout << doc.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-first Bayesian parameter estimation for ODE systems"};
  app.require_subcommand(1);

  CommonArgs sim_args, fit_args, est_args, mcmc_args, sum_args;
  std::string model_flag, surrogate_flag, fit_artifact;
  int paths_flag = 0;
  std::vector<std::string> summarize_inputs;

  CLI::App* sim = app.add_subcommand("simulate", "Generate the predator-prey benchmark dataset");
  add_common(sim, sim_args);

  CLI::App* fit = app.add_subcommand("fit", "Fit a surrogate stochastic process to data");
  add_common(fit, fit_args);
  fit->add_option("--data", fit_args.data, "Data CSV file, one per observed series");
  fit->add_option("--model", model_flag, "ODE model name");
  fit->add_option("--surrogate", surrogate_flag, "Surrogate type: gp | hetgp | hettp");

  CLI::App* est = app.add_subcommand("estimate", "Sample surrogate paths and invert them");
  add_common(est, est_args);
  est->add_option("--fit", fit_artifact, "Fit artifact produced by the fit command")->required();
  est->add_option("--paths", paths_flag, "Number of posterior sample paths (J)");

  CLI::App* mcmc = app.add_subcommand("mcmc", "Random-walk Metropolis benchmark");
  add_common(mcmc, mcmc_args);
  mcmc->add_option("--data", mcmc_args.data, "Data CSV file, one per observed series");
  mcmc->add_option("--model", model_flag, "ODE model name");

  CLI::App* sum = app.add_subcommand("summarize", "Merge ensemble/chain outputs into a report");
  add_common(sum, sum_args);
  sum->add_option("--in", summarize_inputs, "Ensemble or chain CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      auto config = build_config(sim_args);
      config.model = "lotka-volterra";
      const auto output = spfit::run_simulate(config);
      for (const auto& f : output.data_files) std::cout << f.string() << '\n';
      return 0;
    }
    if (fit->parsed()) {
      auto config = build_config(fit_args);
      if (!model_flag.empty()) {
        config.model = model_flag;
        spfit::apply_defaults(config);
      }
      if (!surrogate_flag.empty()) config.surrogate = surrogate_flag;
      const auto output = spfit::run_fit(config);
      std::cout << output.artifact.string() << '\n';
      return 0;
    }
    if (est->parsed()) {
      auto config = build_config(est_args);
      const auto artifact = spfit::load_fit_artifact(fit_artifact);
      config.model = artifact.model;
      config.surrogate = artifact.surrogate;
      config.transform = artifact.transform;
      spfit::apply_defaults(config);
      if (paths_flag > 0) config.paths = paths_flag;
      const auto output = spfit::run_estimate(config, fit_artifact);
      std::cout << output.summary_json.string() << '\n';
      return 0;
    }
    if (mcmc->parsed()) {
      auto config = build_config(mcmc_args);
      if (!model_flag.empty()) {
        config.model = model_flag;
        spfit::apply_defaults(config);
      }
      const auto output = spfit::run_mcmc(config);
      std::cout << output.summary_json.string() << '\n';
      return 0;
    }
    if (sum->parsed()) {
      auto config = build_config(sum_args);
      std::vector<std::filesystem::path> inputs(summarize_inputs.begin(), summarize_inputs.end());
      const auto output = spfit::run_summarize(inputs, config.out_dir);
      std::cout << output.report_json.string() << '\n';
      return 0;
    }
  } catch (const spfit::Error& e) {
    return fail_with_json(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail_with_json("internal_error", e.what());
  }
  return fail_with_json("invalid_argument", "no subcommand executed");
}
