// dgrd: batch CLI for the discrete goal-conditioned RL laboratory.
//
// Exit codes: 0 success, 1 validation error, 2 runtime fault,
// 3 verification failure.

#include <CLI11.hpp>
#include <iostream>

#include "dgrd/harness.hpp"

namespace {

using dgrd::ExperimentConfig;

ExperimentConfig resolve_config(const std::string& config_path,
                                const std::vector<std::string>& extras) {
  ExperimentConfig config =
      config_path.empty() ? ExperimentConfig{} : dgrd::load_config(config_path);
  for (const std::string& raw : extras) {
    std::string token = raw;
    if (token.rfind("--", 0) == 0) token = token.substr(2);
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw dgrd::ContractError("expected --key=value override, got '" + raw + "'");
    }
    dgrd::apply_override(config, token.substr(0, eq), token.substr(eq + 1));
  }
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgrd: offline goal-conditioned RL on discrete puzzles"};
  app.require_subcommand(1);

  std::string config_path;
  std::string phase = "both";
  std::string checkpoint;
  std::string dataset_path;
  std::string config_dir = "configs";
  bool corrupt_distances = false;

  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "config file (flat key = value)");
    sub->allow_extras();  // --key=value overrides any config field
  };

  CLI::App* gen = app.add_subcommand("gen-data", "collect and persist the offline dataset");
  add_config_opts(gen);

  CLI::App* verify = app.add_subcommand("verify", "run the executable theorem checks");
  add_config_opts(verify);
  verify->add_flag("--corrupt-distances", corrupt_distances,
                   "fault-injection hook: feed the sufficiency check a broken distance field")
      ->group("");

  CLI::App* train = app.add_subcommand("train", "train representation and/or policy");
  add_config_opts(train);
  train->add_option("--phase", phase, "repr | policy | both")->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a policy checkpoint");
  add_config_opts(eval);
  eval->add_option("--checkpoint", checkpoint, "DQN checkpoint path")->required();

  CLI::App* fig3 = app.add_subcommand(
      "reproduce-fig3", "two-arm comparison (original vs ideal dual) across seeds");
  fig3->add_option("--configs", config_dir, "directory of *.cfg files")->capture_default_str();

  CLI::App* inspect = app.add_subcommand("inspect-dataset", "print dataset header and checks");
  inspect->add_option("path", dataset_path, "dataset file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const ExperimentConfig config = resolve_config(config_path, gen->remaining());
      const auto result = dgrd::harness::cmd_gen_data(config);
      std::cout << "wrote " << result.dataset_path << " (" << result.transitions
                << " transitions, " << result.distinct_states << " distinct states)\n";
      return 0;
    }
    if (verify->parsed()) {
      const ExperimentConfig config = resolve_config(config_path, verify->remaining());
      return dgrd::harness::cmd_verify(config, std::cout, std::cerr, corrupt_distances);
    }
    if (train->parsed()) {
      const ExperimentConfig config = resolve_config(config_path, train->remaining());
      const auto result =
          dgrd::harness::cmd_train(config, dgrd::harness::phase_from_string(phase));
      std::cout << "run dir: " << result.run_dir << "\n";
      if (!result.repr_checkpoint.empty()) {
        std::cout << "repr checkpoint: " << result.repr_checkpoint << "\n";
      }
      if (!result.dqn_checkpoint.empty()) {
        std::cout << "dqn checkpoint: " << result.dqn_checkpoint << "\n";
        std::cout << "final success: " << result.final_success << "\n";
      }
      return 0;
    }
    if (eval->parsed()) {
      const ExperimentConfig config = resolve_config(config_path, eval->remaining());
      dgrd::harness::cmd_eval(config, checkpoint, std::cout);
      return 0;
    }
    if (fig3->parsed()) {
      const auto summary = dgrd::harness::cmd_reproduce_fig3(config_dir, std::cout);
      std::cout << "comparison: " << summary.comparison_csv << "\n";
      std::cout << "summary: " << summary.summary_csv << "\n";
      return 0;
    }
    if (inspect->parsed()) {
      dgrd::harness::cmd_inspect_dataset(dataset_path, std::cout);
      return 0;
    }
  } catch (const dgrd::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dgrd::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const dgrd::NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
