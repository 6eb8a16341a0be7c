#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dgrd/dataset.hpp"
#include "dgrd/nn.hpp"
#include "dgrd/oracle.hpp"
#include "dgrd/repr.hpp"

namespace dgrd {

enum class EncoderKind : uint8_t { kOriginal = 0, kIdealDual = 1, kLearnedDual = 2 };

const char* to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

// Pluggable, pure, deterministic goal (or state) featurizer.
struct GoalEncoder {
  EncoderKind kind = EncoderKind::kOriginal;
  int width = 0;
  std::function<void(BitState, double*)> encode;
};

// Raw observation bits.
GoalEncoder make_original_encoder(const ExBcmpSpec& env);

// Landmark temporal distances d*(s_i, .), one BFS per landmark (distances on
// the latent board when the env carries noise bits). Outputs are divided by
// the cell count to keep network inputs O(1).
GoalEncoder make_ideal_dual_encoder(const ExBcmpSpec& env, const LandmarkSet& landmarks,
                                    uint64_t cap = kDefaultEnumerationCap);

// Learned goal head from a representation checkpoint.
GoalEncoder make_learned_dual_encoder(const GoalEncoderCheckpoint& ck);

struct GcDqnModel {
  MlpParams q_net;  // (state encoding, goal encoding) -> |A| action values
  TargetCopy target;
  int action_count = 0;
};

struct DqnConfig {
  double gamma = 0.95;
  double learning_rate = 1e-4;
  double target_update_rate = 0.005;
  int batch_size = 1024;
  int64_t gradient_steps = 100000;
  RelabelRatios ratios{0.2, 0.0, 0.5, 0.3};
  std::vector<int> hidden_sizes{1024, 1024, 1024, 1024};
  bool layer_norm = true;
  uint64_t seed = 0;
};

struct DqnAgent {
  ExBcmpSpec env;
  GoalEncoder state_enc;  // original bits, or the dual featurizer when
                          // dual_state_input is on
  GoalEncoder goal_enc;
  GcDqnModel model;
};

DqnAgent make_dqn_agent(const ExBcmpSpec& env, GoalEncoder state_enc, GoalEncoder goal_enc,
                        const DqnConfig& cfg);

struct DqnTrainer {
  DqnAgent agent;
  AdamState opt;
  DqnConfig cfg;
  int64_t steps_done = 0;
};

DqnTrainer make_dqn_trainer(const ExBcmpSpec& env, GoalEncoder state_enc, GoalEncoder goal_enc,
                            const DqnConfig& cfg);

struct DqnDiagnostics {
  double td_loss = 0.0;
  double mean_q = 0.0;  // mean value of the taken actions
};

// One Adam step on the squared TD error against
// r + gamma * (1-done) * max_a' Qbar(s', a'), then an EMA target update.
DqnDiagnostics dqn_train_step(DqnTrainer& trainer, const TrainingBatch& batch);

// Argmax action; ties break toward the lowest index.
int greedy_action(const DqnAgent& agent, BitState s, BitState g);

struct EvalTask {
  BitState start;  // latent state
  BitState goal;   // latent state
  int max_steps = 0;
};

// Scramble-constructed tasks: start = all-off after scramble_presses random
// presses, goal = start after scramble_presses more. Reachable by
// construction; max_steps = n_x * n_y.
std::vector<EvalTask> make_eval_tasks(const PuzzleSpec& spec, int n_tasks, int scramble_presses,
                                      uint64_t seed);

struct EvalResult {
  std::vector<double> per_task;
  double aggregate = 0.0;
};

// Greedy rollouts; success iff the goal latent is reached within max_steps
// (counting the start state). The rng drives observation emission on noisy
// envs; puzzle rollouts are deterministic and episodes_per_task only matters
// for protocol fidelity.
EvalResult evaluate(const DqnAgent& agent, const std::vector<EvalTask>& tasks,
                    int episodes_per_task, Rng& rng);

// Evaluation with an arbitrary action source (oracle policies in tests).
EvalResult evaluate_policy(const ExBcmpSpec& env,
                           const std::function<int(BitState, BitState)>& policy,
                           const std::vector<EvalTask>& tasks, int episodes_per_task, Rng& rng);

// DQN checkpoint (kind 3).
void save_dqn_checkpoint(const std::string& path, const DqnTrainer& trainer);
struct DqnCheckpoint {
  ExBcmpSpec env;
  EncoderKind state_kind;
  EncoderKind goal_kind;
  int state_width = 0;
  int goal_width = 0;
  MlpParams q_net;
  MlpParams target;
  int64_t steps = 0;
};
DqnCheckpoint load_dqn_checkpoint(const std::string& path);

}  // namespace dgrd
