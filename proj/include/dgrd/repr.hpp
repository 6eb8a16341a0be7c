#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgrd/dataset.hpp"
#include "dgrd/exbcmp.hpp"
#include "dgrd/nn.hpp"

namespace dgrd {

enum class Aggregator : uint8_t { kInnerProduct = 0, kNegL2 = 1 };

const char* to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

// Factored goal-conditioned value: f(psi(s), phi(g)) with separate state and
// goal heads of equal output width.
struct FactoredValueModel {
  MlpParams psi;
  MlpParams phi;
  Aggregator aggregator = Aggregator::kInnerProduct;
  int n = 0;  // representation width
};

double aggregate(Aggregator agg, const double* s_enc, const double* g_enc, int n);

// Scalar critic over (state bits, goal bits, one-hot action) with an EMA
// target copy.
struct CriticModel {
  MlpParams q;
  TargetCopy target;
};

struct ReprTrainConfig {
  double gamma = 0.95;
  double kappa = 0.7;
  double learning_rate = 1e-4;
  double target_update_rate = 0.005;
  int batch_size = 1024;
  int64_t gradient_steps = 100000;
  RelabelRatios ratios{0.2, 0.5, 0.0, 0.3};
  int n = 64;
  Aggregator aggregator = Aggregator::kInnerProduct;
  std::vector<int> hidden_sizes{1024, 1024, 1024, 1024};
  bool layer_norm = true;
  // Expectile residual sign. True is the IQL convention u = Qbar - f (positive
  // residuals weighted by kappa, pushing f toward an upper expectile); false
  // is the literal f - Qbar reading.
  bool residual_qbar_minus_f = true;
  uint64_t seed = 0;
};

struct ReprTrainer {
  ExBcmpSpec env;
  FactoredValueModel model;
  CriticModel critic;
  AdamState opt_psi;
  AdamState opt_phi;
  AdamState opt_q;
  ReprTrainConfig cfg;
  int64_t steps_done = 0;
};

ReprTrainer make_repr_trainer(const ExBcmpSpec& env, const ReprTrainConfig& cfg);

struct ReprDiagnostics {
  double value_loss = 0.0;
  double critic_loss = 0.0;
  double mean_value = 0.0;  // mean f over the batch
  double mean_q = 0.0;      // mean critic output over the batch
};

// One step of the two-phase update: expectile regression of f(psi, phi) onto
// the target critic, then squared Bellman regression of the critic onto
// r + gamma * (1-done) * f(psi(s'), phi(g)) with f detached, then an EMA
// update of the target critic.
ReprDiagnostics repr_train_step(ReprTrainer& trainer, const TrainingBatch& batch);

// Deterministic goal-head forward on the bit features of g.
std::vector<double> encode_goal(const FactoredValueModel& model, BitState g);

// Batched f(psi(s), phi(g)) evaluation (diagnostics and tests).
double factored_value(const FactoredValueModel& model, BitState s, BitState g);

// Goal-encoder checkpoint (kind 2): spec, N, aggregator, seed, step count,
// and the phi head, in the shared checkpoint framing.
void export_representation(const ReprTrainer& trainer, const std::string& path);

struct GoalEncoderCheckpoint {
  ExBcmpSpec env;
  int n = 0;
  Aggregator aggregator = Aggregator::kInnerProduct;
  uint64_t seed = 0;
  int64_t steps = 0;
  MlpParams phi;
};

// Loads and validates a goal-encoder checkpoint; the env must match the one
// the caller is about to train on.
GoalEncoderCheckpoint import_representation(const std::string& path, const ExBcmpSpec& expected);

}  // namespace dgrd
