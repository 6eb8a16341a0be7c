#pragma once

#include "dgrd/bitstate.hpp"
#include "dgrd/rng.hpp"

namespace dgrd {

// Exogenous-noise observation wrapper around a latent puzzle. Observations
// append `noise_bits` uniform random high bits to the latent state, so the
// observation supports of different latents are disjoint by construction.
struct ExBcmpSpec {
  PuzzleSpec base;
  int noise_bits = 0;

  bool operator==(const ExBcmpSpec&) const = default;

  int obs_width() const { return base.cells() + noise_bits; }

  void validate() const {
    base.validate();
    if (noise_bits < 0 || obs_width() > 64) {
      throw ContractError("observation width " + std::to_string(obs_width()) +
                          " must fit in 64 bits");
    }
  }
};

// Observation emission: low bits carry the latent, high bits are resampled
// uniformly on every call.
inline BitState emit(const ExBcmpSpec& spec, BitState latent, Rng& rng) {
  uint64_t noise = 0;
  if (spec.noise_bits > 0) noise = rng.uniform_u64(uint64_t{1} << spec.noise_bits);
  return BitState{latent.bits | (noise << spec.base.cells()), spec.obs_width()};
}

// Latent mapping p^l: strips the noise block.
inline BitState latent_of(const ExBcmpSpec& spec, BitState observation) {
  const uint64_t mask = (uint64_t{1} << spec.base.cells()) - 1;
  return BitState{observation.bits & mask, spec.base.cells()};
}

}  // namespace dgrd
