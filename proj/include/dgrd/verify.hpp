#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dgrd/bitstate.hpp"
#include "dgrd/exbcmp.hpp"
#include "dgrd/oracle.hpp"

namespace dgrd {

struct Violation {
  BitState s;
  BitState g;
  double expected = 0.0;
  double got = 0.0;
};

struct TheoremReport {
  std::string theorem_id;
  std::string instance;
  uint64_t pairs_checked = 0;
  std::vector<Violation> violations;
  // Control pairs for the noise-invariance check (zero elsewhere).
  uint64_t control_pairs = 0;
  uint64_t control_identical = 0;

  bool passed() const { return violations.empty(); }
  std::string text() const;   // human-readable summary
  std::string jsonl() const;  // one structured record per violation
};

// Sufficiency: the policy induced by the ideal dual representation,
// argmax_a gamma^{phi(g)(step(s, a))}, reaches every goal in exactly the BFS
// distance. Rollouts are executed; every reachable (s, g) pair is checked.
TheoremReport check_sufficiency(const PuzzleSpec& spec, double gamma,
                                uint64_t cap = kDefaultEnumerationCap);

// Same check against an arbitrary distance-field provider (fault-injection
// hook for tests and the CLI).
TheoremReport check_sufficiency_with(
    const PuzzleSpec& spec, double gamma,
    const std::function<DistanceField(BitState)>& distance_provider,
    uint64_t cap = kDefaultEnumerationCap);

// Noise invariance: two observations of one latent goal get bitwise-identical
// ideal dual representations; control pairs with different latents must differ
// (at most 5% collisions tolerated before the check fails).
TheoremReport check_noise_invariance(const ExBcmpSpec& spec, double gamma, int samples,
                                     uint64_t seed, uint64_t cap = kDefaultEnumerationCap);

// Distance/value identity: -1/0-reward value iteration matches
// -(1-gamma^d)/(1-gamma) and 0/1-reward value iteration matches gamma^d, with
// d from BFS, for sampled goals over all states.
TheoremReport check_distance_value_identity(const PuzzleSpec& spec, double gamma, double tol,
                                            int n_goals, uint64_t seed,
                                            uint64_t cap = kDefaultEnumerationCap);

}  // namespace dgrd
