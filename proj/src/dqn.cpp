#include "dgrd/dqn.hpp"

#include <cmath>
#include <memory>

namespace dgrd {

const char* to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::kOriginal: return "original";
    case EncoderKind::kIdealDual: return "ideal_dual";
    case EncoderKind::kLearnedDual: return "learned_dual";
  }
  return "unknown";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "original") return EncoderKind::kOriginal;
  if (s == "ideal_dual") return EncoderKind::kIdealDual;
  if (s == "learned_dual") return EncoderKind::kLearnedDual;
  throw ContractError("unknown encoder '" + s + "' (original | ideal_dual | learned_dual)");
}

GoalEncoder make_original_encoder(const ExBcmpSpec& env) {
  GoalEncoder enc;
  enc.kind = EncoderKind::kOriginal;
  enc.width = env.obs_width();
  enc.encode = [](BitState s, double* out) { bit_features(s, out); };
  return enc;
}

GoalEncoder make_ideal_dual_encoder(const ExBcmpSpec& env, const LandmarkSet& landmarks,
                                    uint64_t cap) {
  env.validate();
  if (landmarks.states.empty()) throw ContractError("ideal dual encoder needs landmarks");

  // One BFS rooted at each landmark; undirectedness gives d(s_i, g) for all g.
  auto fields = std::make_shared<std::vector<DistanceField>>();
  fields->reserve(landmarks.states.size());
  const ExBcmpSpec env_copy = env;
  for (const BitState& lm : landmarks.states) {
    const BitState lm_latent = latent_of(env, lm);
    fields->push_back(bfs_distances(env.base, lm_latent, cap));
  }
  const double scale = 1.0 / static_cast<double>(env.base.cells());

  GoalEncoder enc;
  enc.kind = EncoderKind::kIdealDual;
  enc.width = static_cast<int>(landmarks.states.size());
  enc.encode = [fields, env_copy, scale](BitState g, double* out) {
    const BitState z = latent_of(env_copy, g);
    for (size_t i = 0; i < fields->size(); ++i) {
      const uint8_t d = (*fields)[i].at(z);
      if (d == DistanceField::kUnreachable) {
        throw ContractError("goal " + to_binary_string(z) + " unreachable from landmark " +
                            to_binary_string((*fields)[i].goal));
      }
      out[i] = static_cast<double>(d) * scale;
    }
  };
  return enc;
}

GoalEncoder make_learned_dual_encoder(const GoalEncoderCheckpoint& ck) {
  auto phi = std::make_shared<MlpParams>(ck.phi);
  GoalEncoder enc;
  enc.kind = EncoderKind::kLearnedDual;
  enc.width = ck.n;
  const int in_width = ck.phi.input_width();
  enc.encode = [phi, in_width](BitState g, double* out) {
    Mat x(1, in_width);
    bit_features(g, x.row(0));
    const Mat y = mlp_forward(*phi, x);
    for (int i = 0; i < y.cols; ++i) out[i] = y.at(0, i);
  };
  return enc;
}

namespace {

std::vector<int> full_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes;
  sizes.push_back(input);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

void encode_pair(const DqnAgent& agent, BitState s, BitState g, double* row) {
  agent.state_enc.encode(s, row);
  agent.goal_enc.encode(g, row + agent.state_enc.width);
}

int argmax_row(const double* q, int n) {
  int best = 0;
  for (int a = 1; a < n; ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

}  // namespace

DqnAgent make_dqn_agent(const ExBcmpSpec& env, GoalEncoder state_enc, GoalEncoder goal_enc,
                        const DqnConfig& cfg) {
  env.validate();
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ContractError("gamma must lie in (0, 1)");
  cfg.ratios.validate();

  DqnAgent agent;
  agent.env = env;
  agent.state_enc = std::move(state_enc);
  agent.goal_enc = std::move(goal_enc);

  Rng rng(cfg.seed, 0xD0);
  const int in_width = agent.state_enc.width + agent.goal_enc.width;
  agent.model.action_count = env.base.action_count();
  agent.model.q_net =
      make_mlp(full_sizes(in_width, cfg.hidden_sizes, agent.model.action_count), cfg.layer_norm, rng);
  agent.model.target = make_target(agent.model.q_net, cfg.target_update_rate);
  return agent;
}

DqnTrainer make_dqn_trainer(const ExBcmpSpec& env, GoalEncoder state_enc, GoalEncoder goal_enc,
                            const DqnConfig& cfg) {
  DqnTrainer t;
  t.agent = make_dqn_agent(env, std::move(state_enc), std::move(goal_enc), cfg);
  t.opt = make_adam(t.agent.model.q_net, cfg.learning_rate);
  t.cfg = cfg;
  return t;
}

DqnDiagnostics dqn_train_step(DqnTrainer& t, const TrainingBatch& batch) {
  DqnAgent& agent = t.agent;
  const int batch_size = static_cast<int>(batch.size());
  const int actions = agent.model.action_count;
  const int in_width = agent.state_enc.width + agent.goal_enc.width;

  Mat x(batch_size, in_width);
  Mat xn(batch_size, in_width);
  for (int i = 0; i < batch_size; ++i) {
    encode_pair(agent, batch.s[static_cast<size_t>(i)], batch.g[static_cast<size_t>(i)], x.row(i));
    encode_pair(agent, batch.s_next[static_cast<size_t>(i)], batch.g[static_cast<size_t>(i)],
                xn.row(i));
  }

  // Targets from the EMA copy; the representation is outside the gradient.
  const Mat qt = mlp_forward(agent.model.target.shadow, xn);

  ForwardCache cache;
  const Mat q = mlp_forward(agent.model.q_net, x, cache);

  Mat dq(batch_size, actions);
  double loss = 0.0;
  double mean_q = 0.0;
  const double inv_n = 1.0 / batch_size;
  for (int i = 0; i < batch_size; ++i) {
    const double* qtr = qt.row(i);
    double best = qtr[0];
    for (int a = 1; a < actions; ++a) best = std::max(best, qtr[a]);
    const double y = batch.reward[static_cast<size_t>(i)] +
                     t.cfg.gamma * (1.0 - batch.done_mask[static_cast<size_t>(i)]) * best;
    const int a_taken = batch.a[static_cast<size_t>(i)];
    const double err = q.at(i, a_taken) - y;
    loss += err * err * inv_n;
    dq.at(i, a_taken) = 2.0 * err * inv_n;
    mean_q += q.at(i, a_taken) * inv_n;
  }
  if (!std::isfinite(loss)) throw NumericFault("TD loss is not finite");

  MlpGrads grads = make_grads_like(agent.model.q_net);
  mlp_backward(agent.model.q_net, cache, dq, grads);
  adam_step(agent.model.q_net, grads, t.opt);
  ema_update(agent.model.target, agent.model.q_net);
  t.steps_done += 1;

  return DqnDiagnostics{loss, mean_q};
}

int greedy_action(const DqnAgent& agent, BitState s, BitState g) {
  Mat x(1, agent.state_enc.width + agent.goal_enc.width);
  encode_pair(agent, s, g, x.row(0));
  const Mat q = mlp_forward(agent.model.q_net, x);
  return argmax_row(q.row(0), agent.model.action_count);
}

std::vector<EvalTask> make_eval_tasks(const PuzzleSpec& spec, int n_tasks, int scramble_presses,
                                      uint64_t seed) {
  spec.validate();
  if (n_tasks < 1) throw ContractError("n_tasks must be >= 1");
  if (scramble_presses < 0) throw ContractError("scramble_presses must be >= 0");

  std::vector<EvalTask> tasks;
  tasks.reserve(static_cast<size_t>(n_tasks));
  for (int k = 0; k < n_tasks; ++k) {
    Rng rng(seed, static_cast<uint64_t>(k) + 0xE7A1);
    BitState start = all_off(spec);
    for (int i = 0; i < scramble_presses; ++i) {
      start = step(spec, start, static_cast<int>(rng.uniform_u64(spec.action_count())));
    }
    BitState goal = start;
    for (int i = 0; i < scramble_presses; ++i) {
      goal = step(spec, goal, static_cast<int>(rng.uniform_u64(spec.action_count())));
    }
    tasks.push_back(EvalTask{start, goal, spec.cells()});
  }
  return tasks;
}

EvalResult evaluate_policy(const ExBcmpSpec& env,
                           const std::function<int(BitState, BitState)>& policy,
                           const std::vector<EvalTask>& tasks, int episodes_per_task, Rng& rng) {
  EvalResult result;
  result.per_task.resize(tasks.size(), 0.0);
  for (size_t ti = 0; ti < tasks.size(); ++ti) {
    const EvalTask& task = tasks[ti];
    int successes = 0;
    for (int ep = 0; ep < episodes_per_task; ++ep) {
      BitState z = task.start;
      const BitState goal_obs = env.noise_bits > 0 ? emit(env, task.goal, rng) : task.goal;
      bool reached = z.bits == task.goal.bits;
      for (int t = 0; t < task.max_steps && !reached; ++t) {
        const BitState obs = env.noise_bits > 0 ? emit(env, z, rng) : z;
        const int a = policy(obs, goal_obs);
        if (a < 0 || a >= env.base.action_count()) {
          throw ContractError("policy returned action out of range");
        }
        z = step(env.base, z, a);
        reached = z.bits == task.goal.bits;
      }
      if (reached) ++successes;
    }
    result.per_task[ti] = static_cast<double>(successes) / episodes_per_task;
  }
  double sum = 0.0;
  for (double v : result.per_task) sum += v;
  result.aggregate = result.per_task.empty() ? 0.0 : sum / static_cast<double>(result.per_task.size());
  return result;
}

EvalResult evaluate(const DqnAgent& agent, const std::vector<EvalTask>& tasks,
                    int episodes_per_task, Rng& rng) {
  return evaluate_policy(
      agent.env, [&agent](BitState s, BitState g) { return greedy_action(agent, s, g); }, tasks,
      episodes_per_task, rng);
}

void save_dqn_checkpoint(const std::string& path, const DqnTrainer& t) {
  io::Writer w;
  w.u32(kCheckpointVersion);
  w.u32(static_cast<uint32_t>(CheckpointKind::kDqn));
  w.u32(static_cast<uint32_t>(t.agent.env.base.n_x));
  w.u32(static_cast<uint32_t>(t.agent.env.base.n_y));
  w.u32(static_cast<uint32_t>(t.agent.env.noise_bits));
  w.u8(static_cast<uint8_t>(t.agent.state_enc.kind));
  w.u8(static_cast<uint8_t>(t.agent.goal_enc.kind));
  w.u32(static_cast<uint32_t>(t.agent.state_enc.width));
  w.u32(static_cast<uint32_t>(t.agent.goal_enc.width));
  w.u64(static_cast<uint64_t>(t.steps_done));
  write_mlp_block(w, t.agent.model.q_net);
  write_mlp_block(w, t.agent.model.target.shadow);
  io::write_file(path, kCheckpointMagic, w);
}

DqnCheckpoint load_dqn_checkpoint(const std::string& path) {
  const std::vector<uint8_t> payload = io::read_file(path, kCheckpointMagic);
  io::Reader r(payload.data(), payload.size());
  if (r.u32() != kCheckpointVersion) {
    throw IoError(IoErrorKind::kVersionMismatch, "checkpoint version unsupported");
  }
  if (r.u32() != static_cast<uint32_t>(CheckpointKind::kDqn)) {
    throw IoError(IoErrorKind::kSpecMismatch, "checkpoint is not a DQN model");
  }
  DqnCheckpoint ck;
  ck.env.base.n_x = static_cast<int>(r.u32());
  ck.env.base.n_y = static_cast<int>(r.u32());
  ck.env.noise_bits = static_cast<int>(r.u32());
  ck.state_kind = static_cast<EncoderKind>(r.u8());
  ck.goal_kind = static_cast<EncoderKind>(r.u8());
  ck.state_width = static_cast<int>(r.u32());
  ck.goal_width = static_cast<int>(r.u32());
  ck.steps = static_cast<int64_t>(r.u64());
  ck.q_net = read_mlp_block(r);
  ck.target = read_mlp_block(r);
  if (r.remaining() != 0) throw IoError(IoErrorKind::kTruncated, "trailing bytes in " + path);
  return ck;
}

}  // namespace dgrd
