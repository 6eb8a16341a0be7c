#include "dgrd/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dgrd/metrics.hpp"
#include "dgrd/verify.hpp"

#ifndef DGRD_VERSION_STRING
#define DGRD_VERSION_STRING "0.0.0-unknown"
#endif

namespace dgrd::harness {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kReprBatchStream = 0xBA7C4;
constexpr uint64_t kPolicyBatchStream = 0xBA7C5;

uint64_t fnv1a(uint64_t h, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFFu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t hash_batch(uint64_t h, const TrainingBatch& batch) {
  for (size_t i = 0; i < batch.size(); ++i) {
    h = fnv1a(h, batch.s[i].bits);
    h = fnv1a(h, static_cast<uint64_t>(batch.a[i]));
    h = fnv1a(h, batch.s_next[i].bits);
    h = fnv1a(h, batch.g[i].bits);
  }
  return h;
}

std::string derive_run_id(const ExperimentConfig& config, TrainPhase phase) {
  if (!config.run_id.empty()) return config.run_id;
  std::ostringstream os;
  os << config.n_x << "x" << config.n_y;
  if (config.noise_bits > 0) os << "n" << config.noise_bits;
  os << "-" << to_string(config.encoder) << "-" << to_string(phase) << "-s" << config.train_seed;
  return os.str();
}

void write_manifest(const std::string& path, const ExperimentConfig& config,
                    const std::string& phase, const TrainResult& result,
                    const std::string& note) {
  std::ofstream out(path, std::ios::trunc);
  out << "{\n";
  out << "  \"version\": \"" << DGRD_VERSION_STRING << "\",\n";
  out << "  \"config_hash\": \"" << std::hex << config_hash(config) << std::dec << "\",\n";
  out << "  \"phase\": \"" << phase << "\",\n";
  out << "  \"train_seed\": " << config.train_seed << ",\n";
  out << "  \"dataset\": \"" << config.dataset_path << "\",\n";
  out << "  \"repr_checkpoint\": \"" << result.repr_checkpoint << "\",\n";
  out << "  \"dqn_checkpoint\": \"" << result.dqn_checkpoint << "\",\n";
  out << "  \"batch_stream_hash\": \"" << std::hex << result.batch_stream_hash << std::dec
      << "\",\n";
  out << "  \"note\": \"" << note << "\"\n";
  out << "}\n";
}

TransitionDataset load_and_check_dataset(const ExperimentConfig& config) {
  TransitionDataset dataset = load_dataset(config.dataset_path);
  if (!(dataset.spec == config.puzzle()) || dataset.noise_bits != config.noise_bits) {
    throw ContractError("dataset " + config.dataset_path + " was collected on " +
                        std::to_string(dataset.spec.n_x) + "x" + std::to_string(dataset.spec.n_y) +
                        "+" + std::to_string(dataset.noise_bits) +
                        " noise bits, which does not match the config");
  }
  return dataset;
}

ReprTrainConfig repr_config_of(const ExperimentConfig& config) {
  ReprTrainConfig cfg;
  cfg.gamma = config.gamma;
  cfg.kappa = config.kappa;
  cfg.learning_rate = config.learning_rate;
  cfg.target_update_rate = config.target_update_rate;
  cfg.batch_size = config.batch_size;
  cfg.gradient_steps = config.effective_gradient_steps();
  cfg.ratios = config.repr_ratios;
  cfg.n = config.repr_n;
  cfg.aggregator = config.aggregator;
  cfg.hidden_sizes = config.mlp_sizes;
  cfg.layer_norm = config.layer_norm;
  cfg.residual_qbar_minus_f = config.residual_qbar_minus_f;
  cfg.seed = config.train_seed;
  return cfg;
}

DqnConfig dqn_config_of(const ExperimentConfig& config) {
  DqnConfig cfg;
  cfg.gamma = config.gamma;
  cfg.learning_rate = config.learning_rate;
  cfg.target_update_rate = config.target_update_rate;
  cfg.batch_size = config.batch_size;
  cfg.gradient_steps = config.effective_gradient_steps();
  cfg.ratios = config.dqn_ratios;
  cfg.hidden_sizes = config.mlp_sizes;
  cfg.layer_norm = config.layer_norm;
  cfg.seed = config.train_seed;
  return cfg;
}

struct PhaseOutcome {
  uint64_t batch_hash = 0;
};

// Representation phase of the pipeline: goal-conditioned IQL on the factored
// value, exporting the goal head.
PhaseOutcome run_repr_phase(const ExperimentConfig& config, const TransitionDataset& dataset,
                            const std::string& run_dir, MetricsWriter& metrics,
                            TrainResult& result) {
  ReprTrainer trainer = make_repr_trainer(config.env(), repr_config_of(config));
  Rng batch_rng(config.train_seed, kReprBatchStream);
  uint64_t stream_hash = 0xcbf29ce484222325ULL;

  ReprTrainer snapshot = trainer;
  const int64_t total = trainer.cfg.gradient_steps;
  try {
    for (int64_t step = 1; step <= total; ++step) {
      const TrainingBatch batch = sample_batch(dataset, trainer.cfg.ratios, trainer.cfg.batch_size,
                                               trainer.cfg.gamma, batch_rng);
      stream_hash = hash_batch(stream_hash, batch);
      const ReprDiagnostics diag = repr_train_step(trainer, batch);
      if (step % config.eval_every == 0 || step == total) {
        metrics.append("repr", step, "value_loss", diag.value_loss);
        metrics.append("repr", step, "critic_loss", diag.critic_loss);
        metrics.append("repr", step, "mean_value", diag.mean_value);
        metrics.append("repr", step, "mean_q", diag.mean_q);
        metrics.flush();
        snapshot = trainer;
      }
    }
  } catch (const NumericFault&) {
    export_representation(snapshot, run_dir + "/repr_lastgood.ck");
    throw;
  }

  result.repr_checkpoint = run_dir + "/repr.ck";
  export_representation(trainer, result.repr_checkpoint);
  return PhaseOutcome{stream_hash};
}

GoalEncoder build_goal_encoder(const ExperimentConfig& config, const TransitionDataset& dataset,
                               const std::string& repr_checkpoint) {
  const ExBcmpSpec env = config.env();
  switch (config.encoder) {
    case EncoderKind::kOriginal:
      return make_original_encoder(env);
    case EncoderKind::kIdealDual: {
      const LandmarkSet landmarks =
          sample_landmarks(dataset, config.landmark_count, config.landmark_seed);
      return make_ideal_dual_encoder(env, landmarks, config.enumeration_cap());
    }
    case EncoderKind::kLearnedDual: {
      if (repr_checkpoint.empty()) {
        throw ContractError(
            "learned_dual policy training needs repr_checkpoint (or phase = both)");
      }
      return make_learned_dual_encoder(import_representation(repr_checkpoint, env));
    }
  }
  throw ContractError("unhandled encoder kind");
}

// Downstream GCRL phase: goal-conditioned DQN on the chosen representation.
PhaseOutcome run_policy_phase(const ExperimentConfig& config, const TransitionDataset& dataset,
                              const std::string& run_dir, MetricsWriter& metrics,
                              TrainResult& result) {
  const ExBcmpSpec env = config.env();
  const GoalEncoder goal_enc = build_goal_encoder(config, dataset, result.repr_checkpoint);

  const bool dual_state = config.dual_state_input == DualStateInput::kOn ||
                          (config.dual_state_input == DualStateInput::kAuto &&
                           config.encoder == EncoderKind::kIdealDual);
  const GoalEncoder state_enc = dual_state && config.encoder != EncoderKind::kOriginal
                                    ? goal_enc
                                    : make_original_encoder(env);

  const std::vector<EvalTask> tasks = make_eval_tasks(
      config.puzzle(), config.n_tasks, config.effective_scramble_presses(), config.eval_seed);

  DqnTrainer trainer = make_dqn_trainer(env, state_enc, goal_enc, dqn_config_of(config));
  Rng batch_rng(config.train_seed, kPolicyBatchStream);
  uint64_t stream_hash = 0xcbf29ce484222325ULL;

  DqnTrainer snapshot = trainer;
  const int64_t total = trainer.cfg.gradient_steps;
  try {
    for (int64_t step = 1; step <= total; ++step) {
      const TrainingBatch batch = sample_batch(dataset, trainer.cfg.ratios, trainer.cfg.batch_size,
                                               trainer.cfg.gamma, batch_rng);
      stream_hash = hash_batch(stream_hash, batch);
      const DqnDiagnostics diag = dqn_train_step(trainer, batch);
      if (step % config.eval_every == 0 || step == total) {
        Rng eval_rng(config.eval_seed, static_cast<uint64_t>(step));
        const EvalResult eval =
            evaluate(trainer.agent, tasks, config.episodes_per_task, eval_rng);
        metrics.append("policy", step, "td_loss", diag.td_loss);
        metrics.append("policy", step, "mean_q", diag.mean_q);
        for (size_t ti = 0; ti < eval.per_task.size(); ++ti) {
          metrics.append("policy", step, "success_task_" + std::to_string(ti), eval.per_task[ti]);
        }
        metrics.append("policy", step, "success", eval.aggregate);
        metrics.flush();
        if (result.curve.empty() || result.curve.back().step != step) {
          result.curve.push_back(CurvePoint{step, eval.aggregate});
        }
        snapshot = trainer;
      }
    }
  } catch (const NumericFault&) {
    save_dqn_checkpoint(run_dir + "/dqn_lastgood.ck", snapshot);
    throw;
  }

  result.dqn_checkpoint = run_dir + "/dqn.ck";
  save_dqn_checkpoint(result.dqn_checkpoint, trainer);
  result.final_success = result.curve.empty() ? 0.0 : result.curve.back().success;
  return PhaseOutcome{stream_hash};
}

}  // namespace

TrainPhase phase_from_string(const std::string& s) {
  if (s == "repr") return TrainPhase::kRepr;
  if (s == "policy") return TrainPhase::kPolicy;
  if (s == "both") return TrainPhase::kBoth;
  throw ContractError("unknown phase '" + s + "' (repr | policy | both)");
}

const char* to_string(TrainPhase p) {
  switch (p) {
    case TrainPhase::kRepr: return "repr";
    case TrainPhase::kPolicy: return "policy";
    case TrainPhase::kBoth: return "both";
  }
  return "unknown";
}

std::string out_root(const ExperimentConfig& config) {
  if (const char* env = std::getenv("DGRD_RUN_ROOT"); env && *env) return env;
  return config.out_dir;
}

GenDataResult cmd_gen_data(const ExperimentConfig& config) {
  config.validate();
  const TransitionDataset dataset =
      collect_dataset(config.env(), static_cast<uint32_t>(config.n_traj),
                      static_cast<uint32_t>(config.traj_len), config.data_seed);
  if (const auto parent = fs::path(config.dataset_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  save_dataset(dataset, config.dataset_path);

  std::ofstream manifest(config.dataset_path + ".manifest.json", std::ios::trunc);
  manifest << "{\n";
  manifest << "  \"version\": \"" << DGRD_VERSION_STRING << "\",\n";
  manifest << "  \"config_hash\": \"" << std::hex << config_hash(config) << std::dec << "\",\n";
  manifest << "  \"data_seed\": " << config.data_seed << ",\n";
  manifest << "  \"n_traj\": " << config.n_traj << ",\n";
  manifest << "  \"traj_len\": " << config.traj_len << ",\n";
  manifest << "  \"transitions\": " << dataset.transition_count() << ",\n";
  manifest << "  \"distinct_states\": " << dataset.distinct_states.size() << "\n";
  manifest << "}\n";

  return GenDataResult{config.dataset_path, dataset.transition_count(),
                       dataset.distinct_states.size()};
}

int cmd_verify(const ExperimentConfig& config, std::ostream& human, std::ostream& jsonl,
               bool corrupt_distances) {
  config.validate();
  const PuzzleSpec spec = config.puzzle();
  const uint64_t cap = std::min(config.enumeration_cap(), uint64_t{1} << config.verify_cap_bits);
  if (spec.state_count() > cap) {
    throw ContractError("verification on " + std::to_string(spec.n_x) + "x" +
                        std::to_string(spec.n_y) + " needs 2^" + std::to_string(spec.cells()) +
                        " states, beyond the cap " + std::to_string(cap) +
                        "; raise enumeration_cap_bits / verify_cap_bits to override");
  }

  std::vector<TheoremReport> reports;
  if (corrupt_distances) {
    // Fault injection: reverse the distance ordering so the induced policy
    // walks away from goals.
    reports.push_back(check_sufficiency_with(
        spec, config.gamma,
        [&](BitState goal) {
          DistanceField f = bfs_distances(spec, goal, cap);
          for (auto& d : f.dist) {
            if (d != DistanceField::kUnreachable && d != 0) {
              d = static_cast<uint8_t>(spec.cells() + 1 - d);
            }
          }
          return f;
        },
        cap));
  } else {
    reports.push_back(check_sufficiency(spec, config.gamma, cap));
  }

  const int nb = config.noise_bits > 0 ? config.noise_bits : config.verify_noise_bits;
  reports.push_back(check_noise_invariance(ExBcmpSpec{spec, nb}, config.gamma,
                                           config.verify_samples, config.verify_seed, cap));
  reports.push_back(check_distance_value_identity(spec, config.gamma, config.verify_tol,
                                                  config.verify_goals, config.verify_seed, cap));

  bool all_passed = true;
  for (const TheoremReport& r : reports) {
    human << r.text() << "\n";
    jsonl << r.jsonl();
    all_passed = all_passed && r.passed();
  }
  return all_passed ? 0 : 3;
}

TrainResult cmd_train(const ExperimentConfig& config, TrainPhase phase) {
  config.validate();
  const TransitionDataset dataset = load_and_check_dataset(config);

  TrainResult result;
  result.run_dir = out_root(config) + "/" + derive_run_id(config, phase);
  fs::create_directories(result.run_dir);
  save_config(config, result.run_dir + "/config.cfg");
  MetricsWriter metrics(result.run_dir + "/metrics.csv", derive_run_id(config, phase));

  uint64_t stream_hash = 0;
  std::string note = "ok";
  try {
    if (phase == TrainPhase::kRepr || phase == TrainPhase::kBoth) {
      stream_hash = run_repr_phase(config, dataset, result.run_dir, metrics, result).batch_hash;
    }
    if (phase == TrainPhase::kPolicy || phase == TrainPhase::kBoth) {
      if (phase == TrainPhase::kPolicy && config.encoder == EncoderKind::kLearnedDual) {
        result.repr_checkpoint = config.repr_checkpoint;
      }
      stream_hash = run_policy_phase(config, dataset, result.run_dir, metrics, result).batch_hash;
    }
  } catch (const NumericFault& e) {
    note = std::string("numeric fault: ") + e.what();
    result.batch_stream_hash = stream_hash;
    write_manifest(result.run_dir + "/manifest.json", config, to_string(phase), result, note);
    throw;
  }

  result.batch_stream_hash = stream_hash;
  write_manifest(result.run_dir + "/manifest.json", config, to_string(phase), result, note);
  return result;
}

const Fig3ArmStats* Fig3Summary::find(const std::string& puzzle, const std::string& arm) const {
  for (const auto& row : rows) {
    if (row.puzzle == puzzle && row.arm == arm) return &row;
  }
  return nullptr;
}

Fig3Summary cmd_reproduce_fig3(const std::string& config_dir, std::ostream& log) {
  std::vector<std::string> config_paths;
  for (const auto& entry : fs::directory_iterator(config_dir)) {
    if (entry.path().extension() == ".cfg") config_paths.push_back(entry.path().string());
  }
  std::sort(config_paths.begin(), config_paths.end());
  if (config_paths.empty()) {
    throw ContractError("no *.cfg files in " + config_dir);
  }

  Fig3Summary summary;
  std::ostringstream comparison;
  comparison << "puzzle,arm,seed,step,success_rate\n";

  for (const std::string& path : config_paths) {
    ExperimentConfig base = load_config(path);
    const std::string puzzle = std::to_string(base.n_x) + "x" + std::to_string(base.n_y);
    if (!fs::exists(base.dataset_path)) {
      log << "dataset " << base.dataset_path << " missing; generating\n";
      cmd_gen_data(base);
    }

    for (const char* arm : {"original", "ideal_dual"}) {
      double auc_sum = 0.0;
      double final_sum = 0.0;
      for (uint64_t seed : base.fig3_seeds) {
        ExperimentConfig config = base;
        config.encoder = encoder_kind_from_string(arm);
        config.train_seed = seed;
        config.run_id = "fig3-" + puzzle + "-" + arm + "-s" + std::to_string(seed);
        log << "training " << config.run_id << " (" << config.effective_gradient_steps()
            << " steps)\n";
        const TrainResult r = cmd_train(config, TrainPhase::kPolicy);
        double auc = 0.0;
        for (const CurvePoint& p : r.curve) {
          comparison << puzzle << "," << arm << "," << seed << "," << p.step << "," << p.success
                     << "\n";
          auc += p.success;
        }
        if (!r.curve.empty()) auc /= static_cast<double>(r.curve.size());
        auc_sum += auc;
        final_sum += r.final_success;
      }
      const double n_seeds = static_cast<double>(base.fig3_seeds.size());
      summary.rows.push_back(Fig3ArmStats{puzzle, arm, auc_sum / n_seeds, final_sum / n_seeds});
    }
  }

  const std::string fig3_dir = "fig3";
  fs::create_directories(fig3_dir);
  summary.comparison_csv = fig3_dir + "/comparison.csv";
  summary.summary_csv = fig3_dir + "/summary.csv";
  std::ofstream(summary.comparison_csv, std::ios::trunc) << comparison.str();
  std::ofstream sum_out(summary.summary_csv, std::ios::trunc);
  sum_out << "puzzle,arm,auc,final_success\n";
  for (const auto& row : summary.rows) {
    sum_out << row.puzzle << "," << row.arm << "," << row.auc << "," << row.final_success << "\n";
  }

  for (const auto& row : summary.rows) {
    log << row.puzzle << " " << row.arm << ": auc " << row.auc << ", final " << row.final_success
        << "\n";
  }
  return summary;
}

void cmd_inspect_dataset(const std::string& path, std::ostream& os) {
  const TransitionDataset dataset = load_dataset(path);
  os << "dataset " << path << "\n";
  os << "  board: " << dataset.spec.n_x << "x" << dataset.spec.n_y << " (" << dataset.spec.cells()
     << " cells)\n";
  os << "  noise_bits: " << dataset.noise_bits << "\n";
  os << "  trajectories: " << dataset.n_traj << " x " << dataset.traj_len << " transitions = "
     << dataset.transition_count() << "\n";
  os << "  distinct states: " << dataset.distinct_states.size() << "\n";
  verify_dynamics(dataset);
  os << "  dynamics replay: ok\n";
}

EvalResult cmd_eval(const ExperimentConfig& config, const std::string& checkpoint_path,
                    std::ostream& os) {
  config.validate();
  const DqnCheckpoint ck = load_dqn_checkpoint(checkpoint_path);
  const ExBcmpSpec env = config.env();
  if (!(ck.env == env)) {
    throw IoError(IoErrorKind::kSpecMismatch, "checkpoint env does not match config");
  }

  const TransitionDataset dataset = load_and_check_dataset(config);
  ExperimentConfig enc_config = config;
  enc_config.encoder = ck.goal_kind;
  const GoalEncoder goal_enc = build_goal_encoder(enc_config, dataset, config.repr_checkpoint);
  const GoalEncoder state_enc = ck.state_kind == EncoderKind::kOriginal
                                    ? make_original_encoder(env)
                                    : goal_enc;
  if (goal_enc.width != ck.goal_width || state_enc.width != ck.state_width) {
    throw IoError(IoErrorKind::kSpecMismatch, "encoder widths do not match checkpoint");
  }

  DqnAgent agent;
  agent.env = env;
  agent.state_enc = state_enc;
  agent.goal_enc = goal_enc;
  agent.model.q_net = ck.q_net;
  agent.model.target = TargetCopy{ck.target, config.target_update_rate};
  agent.model.action_count = env.base.action_count();

  const std::vector<EvalTask> tasks = make_eval_tasks(
      config.puzzle(), config.n_tasks, config.effective_scramble_presses(), config.eval_seed);
  Rng eval_rng(config.eval_seed, 0xEA1);
  const EvalResult result = evaluate(agent, tasks, config.episodes_per_task, eval_rng);
  for (size_t ti = 0; ti < result.per_task.size(); ++ti) {
    os << "task " << ti << ": success " << result.per_task[ti] << "\n";
  }
  os << "aggregate: " << result.aggregate << "\n";
  return result;
}

}  // namespace dgrd::harness
