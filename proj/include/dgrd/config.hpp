#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgrd/dataset.hpp"
#include "dgrd/dqn.hpp"
#include "dgrd/repr.hpp"

namespace dgrd {

enum class DualStateInput : uint8_t { kAuto = 0, kOn = 1, kOff = 2 };

// Every experiment decision in one flat, commented key = value file.
// Unknown and duplicate keys are rejected at parse time.
struct ExperimentConfig {
  // puzzle
  int n_x = 4;
  int n_y = 5;
  int noise_bits = 0;
  int enumeration_cap_bits = 20;

  // dataset
  std::string dataset_path = "dataset.dgrd";
  int n_traj = 40000;
  int traj_len = 25;
  uint64_t data_seed = 1;

  // training
  int64_t gradient_steps = 100000;  // desk-scale budget
  bool full_budget = false;         // raises gradient_steps to 1e6
  double learning_rate = 1e-4;
  int batch_size = 1024;
  std::vector<int> mlp_sizes{1024, 1024, 1024, 1024};
  bool layer_norm = true;
  double target_update_rate = 0.005;
  double gamma = 0.95;
  RelabelRatios dqn_ratios{0.2, 0.0, 0.5, 0.3};

  // representation
  EncoderKind encoder = EncoderKind::kOriginal;
  int repr_n = 64;
  double kappa = 0.7;
  Aggregator aggregator = Aggregator::kInnerProduct;
  RelabelRatios repr_ratios{0.2, 0.5, 0.0, 0.3};
  bool residual_qbar_minus_f = true;  // expectile_residual_sign
  DualStateInput dual_state_input = DualStateInput::kAuto;
  int landmark_count = 64;
  uint64_t landmark_seed = 7;
  std::string repr_checkpoint;  // consumed by phase=policy with learned_dual

  // evaluation
  int n_tasks = 5;
  int episodes_per_task = 15;
  int scramble_presses = 0;  // 0 = auto (n_x * n_y)
  int64_t eval_every = 5000;
  uint64_t eval_seed = 100;

  // verify
  int verify_cap_bits = 12;
  int verify_noise_bits = 6;  // used when noise_bits == 0
  int verify_samples = 100;
  double verify_tol = 1e-9;
  int verify_goals = 8;
  uint64_t verify_seed = 11;

  // run
  uint64_t train_seed = 0;
  std::string run_id;  // derived when empty
  std::string out_dir = "runs";
  std::string cache_dir;  // distance-field cache; empty disables
  std::vector<uint64_t> fig3_seeds{0, 1, 2, 3};

  PuzzleSpec puzzle() const { return PuzzleSpec{n_x, n_y}; }
  ExBcmpSpec env() const { return ExBcmpSpec{puzzle(), noise_bits}; }
  uint64_t enumeration_cap() const { return uint64_t{1} << enumeration_cap_bits; }
  int64_t effective_gradient_steps() const { return full_budget ? 1000000 : gradient_steps; }
  int effective_scramble_presses() const {
    return scramble_presses == 0 ? n_x * n_y : scramble_presses;
  }

  // Range checks with field-level messages.
  void validate() const;
};

// Flat text round trip; serialize(parse(text)) is idempotent.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);
void save_config(const ExperimentConfig& config, const std::string& path);

// Applies a "key=value" override (CLI flags).
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

// FNV-1a over the canonical serialization; stable across platforms.
uint64_t config_hash(const ExperimentConfig& config);

const char* to_string(DualStateInput v);

}  // namespace dgrd
