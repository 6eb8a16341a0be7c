#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgrd/bitstate.hpp"
#include "dgrd/exbcmp.hpp"
#include "dgrd/rng.hpp"

namespace dgrd {

// Offline trajectories collected by a uniform random policy. All trajectories
// share one length. When noise_bits > 0 the stored states are Ex-BCMP
// observations (noise resampled at every emission); the latent dynamics still
// replay exactly through the puzzle step function.
struct TransitionDataset {
  PuzzleSpec spec;
  int noise_bits = 0;
  uint32_t n_traj = 0;
  uint32_t traj_len = 0;
  std::vector<uint64_t> states;           // n_traj * (traj_len + 1), row-major
  std::vector<uint8_t> actions;           // n_traj * traj_len
  std::vector<uint64_t> distinct_states;  // sorted, unique

  ExBcmpSpec env() const { return ExBcmpSpec{spec, noise_bits}; }
  int obs_width() const { return spec.cells() + noise_bits; }
  uint64_t transition_count() const { return uint64_t{n_traj} * traj_len; }

  BitState state_at(uint32_t traj, uint32_t t) const {
    return BitState{states[static_cast<size_t>(traj) * (traj_len + 1) + t], obs_width()};
  }
  int action_at(uint32_t traj, uint32_t t) const {
    return actions[static_cast<size_t>(traj) * traj_len + t];
  }

  // Exact equality on puzzle states, latent equality on observations.
  bool goal_match(BitState a, BitState b) const {
    if (noise_bits == 0) return a.bits == b.bits;
    const ExBcmpSpec e = env();
    return latent_of(e, a).bits == latent_of(e, b).bits;
  }

  bool contains_state(uint64_t bits) const;
  void rebuild_distinct_index();

  bool operator==(const TransitionDataset&) const = default;
};

// Uniform-random-policy collection. Each trajectory starts from the all-off
// state scrambled by traj_len uniformly random presses, keeping every visited
// state inside the reachable component of all-off. Trajectories use
// independent rng substreams, so collection order (or threading) cannot
// change the result.
TransitionDataset collect_dataset(const PuzzleSpec& spec, uint32_t n_traj, uint32_t traj_len,
                                  uint64_t seed);
TransitionDataset collect_dataset(const ExBcmpSpec& spec, uint32_t n_traj, uint32_t traj_len,
                                  uint64_t seed);

// Collection with explicit initial latent states, cycled across trajectories.
// Needed when the scramble construction cannot reach every component (the
// 1x2 board splits into two 2-cycles).
TransitionDataset collect_dataset_from(const ExBcmpSpec& spec,
                                       const std::vector<BitState>& initial_latents,
                                       uint32_t n_traj, uint32_t traj_len, uint64_t seed);

// Replays every stored transition through the step function; throws
// ContractError on the first mismatch.
void verify_dynamics(const TransitionDataset& dataset);

// Hindsight relabeling mixture (OGBench convention).
struct RelabelRatios {
  double p_cur = 0.0;
  double p_geom = 0.0;
  double p_traj = 0.0;
  double p_rand = 0.0;

  void validate() const;
};

enum class RelabelBranch : uint8_t { kCur, kGeom, kTraj, kRand };

struct TrainingBatch {
  std::vector<BitState> s;
  std::vector<int> a;
  std::vector<BitState> s_next;
  std::vector<BitState> g;
  std::vector<double> reward;     // 0 at the goal, -1 elsewhere
  std::vector<double> done_mask;  // 1 at the goal (absorbing)
  std::vector<RelabelBranch> branch;

  size_t size() const { return s.size(); }
};

// Draws batch_size transitions uniformly and relabels goals by the ratio
// mixture: CUR -> current state, GEOM -> future offset 1+Delta with
// Delta ~ Geometric(1-gamma), TRAJ -> uniform future state, RAND -> uniform
// dataset state. Reward and done mask follow the -1/0 absorbing convention on
// goal_match(s, g).
TrainingBatch sample_batch(const TransitionDataset& dataset, const RelabelRatios& ratios,
                           int batch_size, double gamma, Rng& rng);

// Dataset file, magic "DGRD-DS\0", version 1, little-endian, CRC32 trailer.
void save_dataset(const TransitionDataset& dataset, const std::string& path);
TransitionDataset load_dataset(const std::string& path);

}  // namespace dgrd
