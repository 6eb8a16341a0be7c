#include "dgrd/repr.hpp"

#include <cmath>

namespace dgrd {

const char* to_string(Aggregator a) {
  return a == Aggregator::kInnerProduct ? "inner_product" : "neg_l2";
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "inner_product") return Aggregator::kInnerProduct;
  if (s == "neg_l2") return Aggregator::kNegL2;
  throw ContractError("unknown aggregator '" + s + "' (inner_product | neg_l2)");
}

double aggregate(Aggregator agg, const double* s_enc, const double* g_enc, int n) {
  if (agg == Aggregator::kInnerProduct) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += s_enc[i] * g_enc[i];
    return acc;
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = s_enc[i] - g_enc[i];
    acc += d * d;
  }
  return -std::sqrt(acc);
}

namespace {

// d f / d s_enc and d f / d g_enc for one row.
void aggregate_grads(Aggregator agg, const double* s_enc, const double* g_enc, int n, double df,
                     double* ds_out, double* dg_out) {
  if (agg == Aggregator::kInnerProduct) {
    for (int i = 0; i < n; ++i) {
      ds_out[i] = df * g_enc[i];
      dg_out[i] = df * s_enc[i];
    }
    return;
  }
  double norm = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = s_enc[i] - g_enc[i];
    norm += d * d;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    // subgradient 0 at coincident encodings
    for (int i = 0; i < n; ++i) {
      ds_out[i] = 0.0;
      dg_out[i] = 0.0;
    }
    return;
  }
  for (int i = 0; i < n; ++i) {
    const double d = (s_enc[i] - g_enc[i]) / norm;
    ds_out[i] = df * -d;
    dg_out[i] = df * d;
  }
}

std::vector<int> full_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes;
  sizes.push_back(input);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

void fill_state_goal_action(const ExBcmpSpec& env, const TrainingBatch& batch, Mat& out) {
  const int w = env.obs_width();
  const int actions = env.base.action_count();
  const int batch_size = static_cast<int>(batch.size());
  out.resize(batch_size, 2 * w + actions);
  for (int i = 0; i < batch_size; ++i) {
    double* row = out.row(i);
    bit_features(batch.s[static_cast<size_t>(i)], row);
    bit_features(batch.g[static_cast<size_t>(i)], row + w);
    row[2 * w + batch.a[static_cast<size_t>(i)]] = 1.0;
  }
}

void fill_bits(const std::vector<BitState>& states, int width, Mat& out) {
  out.resize(static_cast<int>(states.size()), width);
  for (size_t i = 0; i < states.size(); ++i) bit_features(states[i], out.row(static_cast<int>(i)));
}

}  // namespace

ReprTrainer make_repr_trainer(const ExBcmpSpec& env, const ReprTrainConfig& cfg) {
  env.validate();
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ContractError("gamma must lie in (0, 1)");
  if (!(cfg.kappa > 0.0 && cfg.kappa < 1.0)) throw ContractError("kappa must lie in (0, 1)");
  cfg.ratios.validate();

  const int w = env.obs_width();
  const int actions = env.base.action_count();

  ReprTrainer t;
  t.env = env;
  t.cfg = cfg;

  Rng rng(cfg.seed, 0xA11CE);
  t.model.aggregator = cfg.aggregator;
  t.model.n = cfg.n;
  t.model.psi = make_mlp(full_sizes(w, cfg.hidden_sizes, cfg.n), cfg.layer_norm, rng);
  t.model.phi = make_mlp(full_sizes(w, cfg.hidden_sizes, cfg.n), cfg.layer_norm, rng);
  t.critic.q = make_mlp(full_sizes(2 * w + actions, cfg.hidden_sizes, 1), cfg.layer_norm, rng);
  t.critic.target = make_target(t.critic.q, cfg.target_update_rate);

  t.opt_psi = make_adam(t.model.psi, cfg.learning_rate);
  t.opt_phi = make_adam(t.model.phi, cfg.learning_rate);
  t.opt_q = make_adam(t.critic.q, cfg.learning_rate);
  return t;
}

ReprDiagnostics repr_train_step(ReprTrainer& t, const TrainingBatch& batch) {
  const int batch_size = static_cast<int>(batch.size());
  const int n = t.model.n;
  const double gamma = t.cfg.gamma;

  Mat sga;
  fill_state_goal_action(t.env, batch, sga);
  Mat xs;
  fill_bits(batch.s, t.env.obs_width(), xs);
  Mat xg;
  fill_bits(batch.g, t.env.obs_width(), xg);

  // --- value step: expectile-regress f(psi(s), phi(g)) onto Qbar ---
  const Mat qbar = mlp_forward(t.critic.target.shadow, sga);

  ForwardCache cache_s, cache_g;
  const Mat ps = mlp_forward(t.model.psi, xs, cache_s);
  const Mat pg = mlp_forward(t.model.phi, xg, cache_g);

  std::vector<double> f(static_cast<size_t>(batch_size));
  std::vector<double> residual(static_cast<size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    f[static_cast<size_t>(i)] = aggregate(t.model.aggregator, ps.row(i), pg.row(i), n);
    const double u = qbar.at(i, 0) - f[static_cast<size_t>(i)];
    residual[static_cast<size_t>(i)] = t.cfg.residual_qbar_minus_f ? u : -u;
  }

  std::vector<double> dresidual;
  const double value_loss = expectile_loss(residual, t.cfg.kappa, &dresidual);

  // d loss / d f; residual sign flips the chain rule accordingly.
  Mat dps(batch_size, n);
  Mat dpg(batch_size, n);
  for (int i = 0; i < batch_size; ++i) {
    const double df =
        t.cfg.residual_qbar_minus_f ? -dresidual[static_cast<size_t>(i)] : dresidual[static_cast<size_t>(i)];
    aggregate_grads(t.model.aggregator, ps.row(i), pg.row(i), n, df, dps.row(i), dpg.row(i));
  }

  MlpGrads gpsi = make_grads_like(t.model.psi);
  MlpGrads gphi = make_grads_like(t.model.phi);
  mlp_backward(t.model.psi, cache_s, dps, gpsi);
  mlp_backward(t.model.phi, cache_g, dpg, gphi);
  if (!std::isfinite(value_loss)) throw NumericFault("value loss is not finite");
  adam_step(t.model.psi, gpsi, t.opt_psi);
  adam_step(t.model.phi, gphi, t.opt_phi);

  // --- critic step: squared Bellman regression, f term detached ---
  Mat xsn;
  fill_bits(batch.s_next, t.env.obs_width(), xsn);
  const Mat psn = mlp_forward(t.model.psi, xsn);
  const Mat pg2 = mlp_forward(t.model.phi, xg);

  ForwardCache cache_q;
  const Mat q = mlp_forward(t.critic.q, sga, cache_q);

  Mat dq(batch_size, 1);
  double critic_loss = 0.0;
  double mean_q = 0.0;
  const double inv_n = 1.0 / batch_size;
  for (int i = 0; i < batch_size; ++i) {
    const double f_next = aggregate(t.model.aggregator, psn.row(i), pg2.row(i), n);
    const double target = batch.reward[static_cast<size_t>(i)] +
                          gamma * (1.0 - batch.done_mask[static_cast<size_t>(i)]) * f_next;
    const double err = q.at(i, 0) - target;
    critic_loss += err * err * inv_n;
    dq.at(i, 0) = 2.0 * err * inv_n;
    mean_q += q.at(i, 0) * inv_n;
  }
  if (!std::isfinite(critic_loss)) throw NumericFault("critic loss is not finite");

  MlpGrads gq = make_grads_like(t.critic.q);
  mlp_backward(t.critic.q, cache_q, dq, gq);
  adam_step(t.critic.q, gq, t.opt_q);
  ema_update(t.critic.target, t.critic.q);

  t.steps_done += 1;

  ReprDiagnostics d;
  d.value_loss = value_loss;
  d.critic_loss = critic_loss;
  double mean_f = 0.0;
  for (double x : f) mean_f += x;
  d.mean_value = mean_f * inv_n;
  d.mean_q = mean_q;
  return d;
}

std::vector<double> encode_goal(const FactoredValueModel& model, BitState g) {
  Mat x(1, g.width);
  bit_features(g, x.row(0));
  const Mat out = mlp_forward(model.phi, x);
  return out.v;
}

double factored_value(const FactoredValueModel& model, BitState s, BitState g) {
  Mat xs(1, s.width);
  bit_features(s, xs.row(0));
  Mat xg(1, g.width);
  bit_features(g, xg.row(0));
  const Mat ps = mlp_forward(model.psi, xs);
  const Mat pg = mlp_forward(model.phi, xg);
  return aggregate(model.aggregator, ps.row(0), pg.row(0), model.n);
}

void export_representation(const ReprTrainer& trainer, const std::string& path) {
  io::Writer w;
  w.u32(kCheckpointVersion);
  w.u32(static_cast<uint32_t>(CheckpointKind::kGoalEncoder));
  w.u32(static_cast<uint32_t>(trainer.env.base.n_x));
  w.u32(static_cast<uint32_t>(trainer.env.base.n_y));
  w.u32(static_cast<uint32_t>(trainer.env.noise_bits));
  w.u32(static_cast<uint32_t>(trainer.model.n));
  w.u8(static_cast<uint8_t>(trainer.model.aggregator));
  w.u64(trainer.cfg.seed);
  w.u64(static_cast<uint64_t>(trainer.steps_done));
  write_mlp_block(w, trainer.model.phi);
  io::write_file(path, kCheckpointMagic, w);
}

GoalEncoderCheckpoint import_representation(const std::string& path, const ExBcmpSpec& expected) {
  const std::vector<uint8_t> payload = io::read_file(path, kCheckpointMagic);
  io::Reader r(payload.data(), payload.size());
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError(IoErrorKind::kVersionMismatch, "checkpoint version unsupported");
  }
  const uint32_t kind = r.u32();
  if (kind != static_cast<uint32_t>(CheckpointKind::kGoalEncoder)) {
    throw IoError(IoErrorKind::kSpecMismatch, "checkpoint is not a goal encoder");
  }
  GoalEncoderCheckpoint ck;
  ck.env.base.n_x = static_cast<int>(r.u32());
  ck.env.base.n_y = static_cast<int>(r.u32());
  ck.env.noise_bits = static_cast<int>(r.u32());
  ck.n = static_cast<int>(r.u32());
  ck.aggregator = static_cast<Aggregator>(r.u8());
  ck.seed = r.u64();
  ck.steps = static_cast<int64_t>(r.u64());
  ck.phi = read_mlp_block(r);
  if (r.remaining() != 0) throw IoError(IoErrorKind::kTruncated, "trailing bytes in " + path);
  if (!(ck.env == expected)) {
    throw IoError(IoErrorKind::kSpecMismatch,
                  "goal encoder was trained on " + std::to_string(ck.env.base.n_x) + "x" +
                      std::to_string(ck.env.base.n_y) + "+" + std::to_string(ck.env.noise_bits) +
                      " noise bits, expected " + std::to_string(expected.base.n_x) + "x" +
                      std::to_string(expected.base.n_y) + "+" + std::to_string(expected.noise_bits));
  }
  if (ck.phi.output_width() != ck.n || ck.phi.input_width() != expected.obs_width()) {
    throw IoError(IoErrorKind::kSpecMismatch, "goal encoder widths are inconsistent");
  }
  return ck;
}

}  // namespace dgrd
