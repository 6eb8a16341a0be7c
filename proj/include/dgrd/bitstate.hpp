#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgrd/errors.hpp"

namespace dgrd {

// A discrete state packed into a 64-bit word. `width` is the number of
// meaningful low bits; everything above must be zero.
struct BitState {
  uint64_t bits = 0;
  int width = 0;

  bool operator==(const BitState&) const = default;
};

inline std::string to_binary_string(BitState s) {
  std::string out(static_cast<size_t>(s.width), '0');
  for (int i = 0; i < s.width; ++i) {
    if ((s.bits >> i) & 1u) out[static_cast<size_t>(s.width - 1 - i)] = '1';
  }
  return "0b" + out;
}

// Lights Out grid. Cell (i, j) lives at bit index i*n_y + j (row-major).
// Pressing a button toggles it and its orthogonal in-bounds neighbors.
struct PuzzleSpec {
  int n_x = 0;
  int n_y = 0;

  bool operator==(const PuzzleSpec&) const = default;

  int cells() const { return n_x * n_y; }
  int action_count() const { return cells(); }
  uint64_t state_count() const { return uint64_t{1} << cells(); }

  void validate() const {
    if (n_x < 1 || n_y < 1 || cells() > 30) {
      throw ContractError("puzzle spec must satisfy 1 <= n_x*n_y <= 30, got " +
                          std::to_string(n_x) + "x" + std::to_string(n_y));
    }
  }
};

constexpr uint64_t kDefaultEnumerationCap = uint64_t{1} << 20;

inline uint64_t toggle_mask(const PuzzleSpec& spec, int action) {
  const int i = action / spec.n_y;
  const int j = action % spec.n_y;
  uint64_t mask = uint64_t{1} << action;
  if (i > 0) mask |= uint64_t{1} << (action - spec.n_y);
  if (i + 1 < spec.n_x) mask |= uint64_t{1} << (action + spec.n_y);
  if (j > 0) mask |= uint64_t{1} << (action - 1);
  if (j + 1 < spec.n_y) mask |= uint64_t{1} << (action + 1);
  return mask;
}

// All toggle masks of a spec, indexed by action.
inline std::vector<uint64_t> toggle_masks(const PuzzleSpec& spec) {
  std::vector<uint64_t> masks(static_cast<size_t>(spec.action_count()));
  for (int a = 0; a < spec.action_count(); ++a) masks[static_cast<size_t>(a)] = toggle_mask(spec, a);
  return masks;
}

inline BitState step(const PuzzleSpec& spec, BitState state, int action) {
  if (action < 0 || action >= spec.action_count()) {
    throw ContractError("action " + std::to_string(action) + " out of range [0, " +
                        std::to_string(spec.action_count()) + ")");
  }
  return BitState{state.bits ^ toggle_mask(spec, action), spec.cells()};
}

inline BitState all_off(const PuzzleSpec& spec) { return BitState{0, spec.cells()}; }

// Network input features: one {0,1} entry per bit.
inline void bit_features(BitState s, double* out) {
  for (int i = 0; i < s.width; ++i) out[i] = static_cast<double>((s.bits >> i) & 1u);
}

// All 2^(n_x*n_y) states in ascending bit order. Refuses beyond the cap so
// exact all-state work on large boards requires an explicit override.
inline std::vector<BitState> enumerate_states(const PuzzleSpec& spec,
                                              uint64_t cap = kDefaultEnumerationCap) {
  spec.validate();
  const uint64_t n = spec.state_count();
  if (n > cap) {
    throw ContractError("state count 2^" + std::to_string(spec.cells()) +
                        " exceeds enumeration cap " + std::to_string(cap));
  }
  std::vector<BitState> states(n);
  for (uint64_t s = 0; s < n; ++s) states[s] = BitState{s, spec.cells()};
  return states;
}

}  // namespace dgrd
