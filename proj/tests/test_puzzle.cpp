#include <doctest.h>

#include "dgrd/bitstate.hpp"
#include "dgrd/exbcmp.hpp"
#include "dgrd/rng.hpp"

using namespace dgrd;

TEST_CASE("single cell has no neighbors") {
  const PuzzleSpec spec{1, 1};
  CHECK(step(spec, BitState{0b0, 1}, 0).bits == 0b1);
}

TEST_CASE("center press on 3x3 toggles the plus shape") {
  const PuzzleSpec spec{3, 3};
  // rows 010 / 111 / 010, row-major with bit index i*n_y + j
  CHECK(step(spec, BitState{0, 9}, 4).bits == 0b010111010);
}

TEST_CASE("step is an involution and masks commute") {
  const PuzzleSpec spec{3, 4};
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const BitState s{rng.uniform_u64(spec.state_count()), spec.cells()};
    const int a = static_cast<int>(rng.uniform_u64(spec.action_count()));
    const int b = static_cast<int>(rng.uniform_u64(spec.action_count()));
    CHECK(step(spec, step(spec, s, a), a).bits == s.bits);
    CHECK(step(spec, step(spec, s, a), b).bits == step(spec, step(spec, s, b), a).bits);
  }
}

TEST_CASE("step never touches bits outside the grid") {
  const PuzzleSpec spec{2, 3};
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const BitState s{rng.uniform_u64(spec.state_count()), spec.cells()};
    const int a = static_cast<int>(rng.uniform_u64(spec.action_count()));
    CHECK((step(spec, s, a).bits >> spec.cells()) == 0);
  }
}

TEST_CASE("action out of range is a contract violation") {
  const PuzzleSpec spec{2, 2};
  CHECK_THROWS_AS(step(spec, BitState{0, 4}, 4), ContractError);
  CHECK_THROWS_AS(step(spec, BitState{0, 4}, -1), ContractError);
}

TEST_CASE("enumerate_states small boards") {
  const auto one = enumerate_states(PuzzleSpec{1, 1});
  REQUIRE(one.size() == 2);
  CHECK(one[0].bits == 0b0);
  CHECK(one[1].bits == 0b1);

  const auto two = enumerate_states(PuzzleSpec{1, 2});
  REQUIRE(two.size() == 4);
  for (uint64_t i = 0; i < 4; ++i) CHECK(two[i].bits == i);
}

TEST_CASE("enumerate_states refuses beyond the cap") {
  CHECK_THROWS_WITH_AS(enumerate_states(PuzzleSpec{4, 6}), doctest::Contains("cap"),
                       ContractError);
  CHECK_NOTHROW(enumerate_states(PuzzleSpec{4, 6}, uint64_t{1} << 24));
}

TEST_CASE("puzzle spec bounds") {
  CHECK_THROWS_AS((PuzzleSpec{0, 5}.validate()), ContractError);
  CHECK_THROWS_AS((PuzzleSpec{5, 7}.validate()), ContractError);  // 35 cells
  CHECK_NOTHROW((PuzzleSpec{5, 6}.validate()));                   // 30 cells
}

TEST_CASE("emit keeps the latent in the low bits") {
  const ExBcmpSpec spec{PuzzleSpec{2, 2}, 6};
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const BitState z{rng.uniform_u64(16), 4};
    const BitState obs = emit(spec, z, rng);
    CHECK(latent_of(spec, obs).bits == z.bits);
    CHECK((obs.bits >> spec.obs_width()) == 0);
  }
}

TEST_CASE("zero noise bits is the identity wrapper") {
  const ExBcmpSpec spec{PuzzleSpec{2, 2}, 0};
  Rng rng(4);
  const BitState z{0b1010, 4};
  for (int trial = 0; trial < 10; ++trial) CHECK(emit(spec, z, rng).bits == z.bits);
  CHECK(latent_of(spec, BitState{0b1010, 4}).bits == 0b1010);
}

TEST_CASE("latent_of masks all noise bits") {
  const ExBcmpSpec spec{PuzzleSpec{2, 2}, 4};
  const uint64_t all_noise = 0b1111ULL << 4;
  CHECK(latent_of(spec, BitState{all_noise | 0b0110, 8}).bits == 0b0110);
}

TEST_CASE("emit noise bits are uniform per bit (3 sigma)") {
  const ExBcmpSpec spec{PuzzleSpec{2, 2}, 8};
  Rng rng(5);
  const BitState z{0b0101, 4};
  const int draws = 10000;
  int counts[8] = {0};
  for (int i = 0; i < draws; ++i) {
    const uint64_t noise = emit(spec, z, rng).bits >> 4;
    for (int b = 0; b < 8; ++b) counts[b] += static_cast<int>((noise >> b) & 1u);
  }
  // Binomial(10^4, 1/2): mean 5000, sigma 50.
  for (int b = 0; b < 8; ++b) {
    CHECK(std::abs(counts[b] - 5000) <= 150);
  }
}

TEST_CASE("observation width must fit 64 bits") {
  CHECK_THROWS_AS((ExBcmpSpec{PuzzleSpec{5, 6}, 40}.validate()), ContractError);
  CHECK_NOTHROW((ExBcmpSpec{PuzzleSpec{5, 6}, 34}.validate()));
}
