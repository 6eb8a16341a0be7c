#include "dgrd/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "dgrd/io.hpp"

namespace dgrd {

namespace {

constexpr char kDatasetMagic[8] = {'D', 'G', 'R', 'D', '-', 'D', 'S', '\0'};

void collect_one_trajectory(const ExBcmpSpec& spec, TransitionDataset& out, uint32_t traj,
                            BitState initial_latent, uint64_t seed) {
  Rng rng(seed, traj);
  const uint32_t T = out.traj_len;
  const int actions = spec.base.action_count();

  BitState z = initial_latent;
  uint64_t* states = &out.states[static_cast<size_t>(traj) * (T + 1)];
  uint8_t* acts = &out.actions[static_cast<size_t>(traj) * T];

  states[0] = emit(spec, z, rng).bits;
  for (uint32_t t = 0; t < T; ++t) {
    const int a = static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(actions)));
    acts[t] = static_cast<uint8_t>(a);
    z = step(spec.base, z, a);
    states[t + 1] = emit(spec, z, rng).bits;
  }
}

BitState scrambled_start(const PuzzleSpec& spec, uint32_t presses, Rng& rng) {
  BitState s = all_off(spec);
  for (uint32_t i = 0; i < presses; ++i) {
    s = step(spec, s, static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(spec.action_count()))));
  }
  return s;
}

}  // namespace

bool TransitionDataset::contains_state(uint64_t bits) const {
  return std::binary_search(distinct_states.begin(), distinct_states.end(), bits);
}

void TransitionDataset::rebuild_distinct_index() {
  distinct_states = states;
  std::sort(distinct_states.begin(), distinct_states.end());
  distinct_states.erase(std::unique(distinct_states.begin(), distinct_states.end()),
                        distinct_states.end());
}

TransitionDataset collect_dataset(const ExBcmpSpec& spec, uint32_t n_traj, uint32_t traj_len,
                                  uint64_t seed) {
  spec.validate();
  if (n_traj < 1 || traj_len < 1) throw ContractError("n_traj and traj_len must be >= 1");

  TransitionDataset out;
  out.spec = spec.base;
  out.noise_bits = spec.noise_bits;
  out.n_traj = n_traj;
  out.traj_len = traj_len;
  out.states.resize(static_cast<size_t>(n_traj) * (traj_len + 1));
  out.actions.resize(static_cast<size_t>(n_traj) * traj_len);

  // Initial latents use a dedicated substream per trajectory so the whole
  // collection is order-independent.
#pragma omp parallel for schedule(static)
  for (int64_t traj = 0; traj < static_cast<int64_t>(n_traj); ++traj) {
    Rng scramble_rng(seed ^ 0x5c7a3b1ed5c7a3b1ULL, static_cast<uint64_t>(traj));
    const BitState start = scrambled_start(spec.base, traj_len, scramble_rng);
    collect_one_trajectory(spec, out, static_cast<uint32_t>(traj), start, seed);
  }

  out.rebuild_distinct_index();
  return out;
}

TransitionDataset collect_dataset(const PuzzleSpec& spec, uint32_t n_traj, uint32_t traj_len,
                                  uint64_t seed) {
  return collect_dataset(ExBcmpSpec{spec, 0}, n_traj, traj_len, seed);
}

TransitionDataset collect_dataset_from(const ExBcmpSpec& spec,
                                       const std::vector<BitState>& initial_latents,
                                       uint32_t n_traj, uint32_t traj_len, uint64_t seed) {
  spec.validate();
  if (initial_latents.empty()) throw ContractError("initial_latents must be nonempty");
  if (n_traj < 1 || traj_len < 1) throw ContractError("n_traj and traj_len must be >= 1");

  TransitionDataset out;
  out.spec = spec.base;
  out.noise_bits = spec.noise_bits;
  out.n_traj = n_traj;
  out.traj_len = traj_len;
  out.states.resize(static_cast<size_t>(n_traj) * (traj_len + 1));
  out.actions.resize(static_cast<size_t>(n_traj) * traj_len);

#pragma omp parallel for schedule(static)
  for (int64_t traj = 0; traj < static_cast<int64_t>(n_traj); ++traj) {
    const BitState start = initial_latents[static_cast<size_t>(traj) % initial_latents.size()];
    collect_one_trajectory(spec, out, static_cast<uint32_t>(traj), start, seed);
  }

  out.rebuild_distinct_index();
  return out;
}

void verify_dynamics(const TransitionDataset& dataset) {
  const ExBcmpSpec env = dataset.env();
  for (uint32_t traj = 0; traj < dataset.n_traj; ++traj) {
    for (uint32_t t = 0; t < dataset.traj_len; ++t) {
      const BitState z = latent_of(env, dataset.state_at(traj, t));
      const BitState z_next = latent_of(env, dataset.state_at(traj, t + 1));
      const BitState expect = step(dataset.spec, z, dataset.action_at(traj, t));
      if (expect.bits != z_next.bits) {
        throw ContractError("dynamics mismatch at trajectory " + std::to_string(traj) + " step " +
                            std::to_string(t));
      }
    }
  }
}

void RelabelRatios::validate() const {
  const double vals[4] = {p_cur, p_geom, p_traj, p_rand};
  double sum = 0.0;
  for (double v : vals) {
    if (v < 0.0 || !std::isfinite(v)) throw ContractError("relabel ratios must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ContractError("relabel ratios must sum to 1, got " + std::to_string(sum));
  }
}

TrainingBatch sample_batch(const TransitionDataset& dataset, const RelabelRatios& ratios,
                           int batch_size, double gamma, Rng& rng) {
  ratios.validate();
  if (dataset.n_traj == 0) throw ContractError("cannot sample from an empty dataset");
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");

  const uint32_t T = dataset.traj_len;
  TrainingBatch batch;
  batch.s.resize(static_cast<size_t>(batch_size));
  batch.a.resize(static_cast<size_t>(batch_size));
  batch.s_next.resize(static_cast<size_t>(batch_size));
  batch.g.resize(static_cast<size_t>(batch_size));
  batch.reward.resize(static_cast<size_t>(batch_size));
  batch.done_mask.resize(static_cast<size_t>(batch_size));
  batch.branch.resize(static_cast<size_t>(batch_size));

  for (int i = 0; i < batch_size; ++i) {
    const uint32_t traj = static_cast<uint32_t>(rng.uniform_u64(dataset.n_traj));
    const uint32_t t = static_cast<uint32_t>(rng.uniform_u64(T));
    batch.s[i] = dataset.state_at(traj, t);
    batch.a[i] = dataset.action_at(traj, t);
    batch.s_next[i] = dataset.state_at(traj, t + 1);

    const double u = rng.uniform01();
    BitState goal;
    RelabelBranch branch;
    if (u < ratios.p_cur) {
      branch = RelabelBranch::kCur;
      goal = batch.s[i];
    } else if (u < ratios.p_cur + ratios.p_geom) {
      branch = RelabelBranch::kGeom;
      const uint64_t offset = t + 1 + rng.geometric_from_gamma(gamma);
      goal = dataset.state_at(traj, static_cast<uint32_t>(std::min<uint64_t>(offset, T)));
    } else if (u < ratios.p_cur + ratios.p_geom + ratios.p_traj) {
      branch = RelabelBranch::kTraj;
      const uint32_t idx = t + 1 + static_cast<uint32_t>(rng.uniform_u64(T - t));
      goal = dataset.state_at(traj, idx);
    } else {
      branch = RelabelBranch::kRand;
      const uint32_t traj2 = static_cast<uint32_t>(rng.uniform_u64(dataset.n_traj));
      const uint32_t idx2 = static_cast<uint32_t>(rng.uniform_u64(uint64_t{T} + 1));
      goal = dataset.state_at(traj2, idx2);
    }

    batch.g[i] = goal;
    batch.branch[i] = branch;
    const bool at_goal = dataset.goal_match(batch.s[i], goal);
    batch.reward[i] = at_goal ? 0.0 : -1.0;
    batch.done_mask[i] = at_goal ? 1.0 : 0.0;
  }
  return batch;
}

void save_dataset(const TransitionDataset& dataset, const std::string& path) {
  io::Writer w;
  w.u32(1);  // version
  w.u32(static_cast<uint32_t>(dataset.spec.n_x));
  w.u32(static_cast<uint32_t>(dataset.spec.n_y));
  w.u32(static_cast<uint32_t>(dataset.noise_bits));
  w.u32(dataset.n_traj);
  w.u32(dataset.traj_len);
  for (uint32_t traj = 0; traj < dataset.n_traj; ++traj) {
    const uint64_t* states = &dataset.states[static_cast<size_t>(traj) * (dataset.traj_len + 1)];
    for (uint32_t t = 0; t <= dataset.traj_len; ++t) w.u64(states[t]);
    const uint8_t* acts = &dataset.actions[static_cast<size_t>(traj) * dataset.traj_len];
    w.bytes(acts, dataset.traj_len);
  }
  io::write_file(path, kDatasetMagic, w);
}

TransitionDataset load_dataset(const std::string& path) {
  const std::vector<uint8_t> payload = io::read_file(path, kDatasetMagic);
  io::Reader r(payload.data(), payload.size());

  const uint32_t version = r.u32();
  if (version != 1) {
    throw IoError(IoErrorKind::kVersionMismatch,
                  "dataset version " + std::to_string(version) + " unsupported");
  }
  TransitionDataset out;
  out.spec.n_x = static_cast<int>(r.u32());
  out.spec.n_y = static_cast<int>(r.u32());
  out.noise_bits = static_cast<int>(r.u32());
  out.spec.validate();
  out.n_traj = r.u32();
  out.traj_len = r.u32();
  out.states.resize(static_cast<size_t>(out.n_traj) * (out.traj_len + 1));
  out.actions.resize(static_cast<size_t>(out.n_traj) * out.traj_len);
  for (uint32_t traj = 0; traj < out.n_traj; ++traj) {
    uint64_t* states = &out.states[static_cast<size_t>(traj) * (out.traj_len + 1)];
    for (uint32_t t = 0; t <= out.traj_len; ++t) states[t] = r.u64();
    uint8_t* acts = &out.actions[static_cast<size_t>(traj) * out.traj_len];
    r.bytes(acts, out.traj_len);
  }
  if (r.remaining() != 0) throw IoError(IoErrorKind::kTruncated, "trailing bytes in " + path);
  out.rebuild_distinct_index();
  return out;
}

}  // namespace dgrd
