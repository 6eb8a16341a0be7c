#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dgrd/bitstate.hpp"
#include "dgrd/dataset.hpp"

namespace dgrd {

// Exact shortest-path distances from every state to one goal. Stored densely,
// indexed by state bits; distances on a w-cell board never exceed w (a state
// is solved by pressing each button at most once), so uint8_t suffices.
struct DistanceField {
  static constexpr uint8_t kUnreachable = 0xFF;

  PuzzleSpec spec;
  BitState goal;
  std::vector<uint8_t> dist;

  uint8_t at(BitState s) const { return dist[s.bits]; }
  bool reachable(BitState s) const { return dist[s.bits] != kUnreachable; }
};

// Single BFS rooted at the goal. Every action is an involution, so the
// transition graph is undirected and dist(s, g) == dist(g, s).
DistanceField bfs_distances(const PuzzleSpec& spec, BitState goal,
                            uint64_t cap = kDefaultEnumerationCap);

enum class RewardConvention : uint8_t {
  kMinusOneZero,  // r = -1 off goal, 0 at goal; V* = -(1-gamma^d)/(1-gamma)
  kZeroOne,       // r = I(s == g), absorbing; V* = gamma^d
};

struct ValueField {
  PuzzleSpec spec;
  BitState goal;
  double gamma = 0.0;
  RewardConvention convention = RewardConvention::kMinusOneZero;
  std::vector<double> value;
  uint64_t iterations = 0;

  double at(BitState s) const { return value[s.bits]; }
};

// Synchronous Bellman-optimality sweeps with an absorbing goal, stopping when
// the sup-norm update falls below tol. Throws (with the residual) if the
// geometric-contraction iteration cap is exceeded.
ValueField value_iteration(const PuzzleSpec& spec, BitState goal, double gamma, double tol = 1e-10,
                           RewardConvention convention = RewardConvention::kMinusOneZero,
                           uint64_t cap = kDefaultEnumerationCap);

double closed_form_value(uint8_t dist, double gamma, RewardConvention convention);

struct LandmarkSet {
  std::vector<BitState> states;
  uint64_t seed = 0;
};

// k distinct states drawn uniformly without replacement from a pool.
LandmarkSet sample_landmarks(const std::vector<uint64_t>& pool, int state_width, int k,
                             uint64_t seed);
// Pool = the distinct states appearing in the dataset.
LandmarkSet sample_landmarks(const TransitionDataset& dataset, int k, uint64_t seed);

// Ideal dual representation of a goal: component i is d*(landmark_i, goal).
// The provider supplies the per-goal distance field (one BFS rooted at the
// goal covers every landmark). Unreachable landmarks are a hard error.
std::vector<double> ideal_dual_rep(const LandmarkSet& landmarks, BitState goal,
                                   const std::function<const DistanceField&(BitState)>& provider);
std::vector<double> ideal_dual_rep(const LandmarkSet& landmarks, BitState goal,
                                   const DistanceField& goal_field);

// Distance-field files: magic "DGRD-DF\0", version 1, little-endian, CRC32.
void save_distance_field(const DistanceField& field, const std::string& path);
DistanceField load_distance_field(const std::string& path);

// Optional directory cache keyed by (spec, goal).
class DistanceFieldCache {
 public:
  // Empty directory disables persistence (every call recomputes).
  explicit DistanceFieldCache(std::string dir = "", uint64_t cap = kDefaultEnumerationCap);

  const DistanceField& get(const PuzzleSpec& spec, BitState goal);

 private:
  std::string dir_;
  uint64_t cap_;
  std::vector<std::unique_ptr<DistanceField>> loaded_;  // stable addresses
};

}  // namespace dgrd
