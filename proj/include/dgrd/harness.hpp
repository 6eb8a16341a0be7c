#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dgrd/config.hpp"
#include "dgrd/dqn.hpp"

namespace dgrd::harness {

enum class TrainPhase { kRepr, kPolicy, kBoth };
TrainPhase phase_from_string(const std::string& s);
const char* to_string(TrainPhase p);

// Run output root; the DGRD_RUN_ROOT environment variable overrides the
// config's out_dir.
std::string out_root(const ExperimentConfig& config);

struct GenDataResult {
  std::string dataset_path;
  uint64_t transitions = 0;
  uint64_t distinct_states = 0;
};

// Collects and persists the offline dataset plus a sidecar manifest
// (config hash, seed, counts).
GenDataResult cmd_gen_data(const ExperimentConfig& config);

// Runs the three theorem checks on the configured instance. Human-readable
// reports go to `human`, one structured record per violation to `jsonl`.
// Returns 0 when every check passes, 3 otherwise. `corrupt_distances` is a
// fault-injection hook that feeds the sufficiency check a broken field.
int cmd_verify(const ExperimentConfig& config, std::ostream& human, std::ostream& jsonl,
               bool corrupt_distances = false);

struct CurvePoint {
  int64_t step = 0;
  double success = 0.0;
};

struct TrainResult {
  std::string run_dir;
  std::string repr_checkpoint;
  std::string dqn_checkpoint;
  std::vector<CurvePoint> curve;
  uint64_t batch_stream_hash = 0;  // encoder-independent by construction
  double final_success = 0.0;
};

// Runs the requested phase(s); `both` runs representation then policy, with
// the policy phase consuming the fresh representation checkpoint.
TrainResult cmd_train(const ExperimentConfig& config, TrainPhase phase);

struct Fig3ArmStats {
  std::string puzzle;
  std::string arm;
  double auc = 0.0;            // mean success over eval points, averaged over seeds
  double final_success = 0.0;  // last eval point, averaged over seeds
};

struct Fig3Summary {
  std::vector<Fig3ArmStats> rows;
  std::string comparison_csv;
  std::string summary_csv;

  const Fig3ArmStats* find(const std::string& puzzle, const std::string& arm) const;
};

// Two-arm comparison (original vs ideal dual goal representations) across the
// configured seeds for every *.cfg in config_dir. Missing datasets are
// generated first.
Fig3Summary cmd_reproduce_fig3(const std::string& config_dir, std::ostream& log);

void cmd_inspect_dataset(const std::string& path, std::ostream& os);

// Loads a DQN checkpoint, rebuilds its encoders from the config, and runs the
// evaluation protocol.
EvalResult cmd_eval(const ExperimentConfig& config, const std::string& checkpoint_path,
                    std::ostream& os);

}  // namespace dgrd::harness
