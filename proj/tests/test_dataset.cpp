#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dgrd/dataset.hpp"

using namespace dgrd;

TEST_CASE("collected transitions replay through the dynamics") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 3}, 50, 12, 42);
  CHECK(d.transition_count() == 600);
  CHECK_NOTHROW(verify_dynamics(d));
}

TEST_CASE("collection is deterministic per seed") {
  const TransitionDataset a = collect_dataset(PuzzleSpec{2, 2}, 20, 10, 7);
  const TransitionDataset b = collect_dataset(PuzzleSpec{2, 2}, 20, 10, 7);
  const TransitionDataset c = collect_dataset(PuzzleSpec{2, 2}, 20, 10, 8);
  CHECK(a == b);
  CHECK(a.states != c.states);
}

TEST_CASE("ex-bcmp collection stores observations with latent dynamics") {
  const ExBcmpSpec env{PuzzleSpec{2, 2}, 5};
  const TransitionDataset d = collect_dataset(env, 30, 8, 3);
  CHECK(d.noise_bits == 5);
  CHECK_NOTHROW(verify_dynamics(d));
  bool any_noise = false;
  for (uint64_t s : d.states) any_noise = any_noise || (s >> 4) != 0;
  CHECK(any_noise);
}

TEST_CASE("explicit initial states cover disconnected components") {
  const ExBcmpSpec env{PuzzleSpec{1, 2}, 0};
  const std::vector<BitState> inits = {BitState{0b00, 2}, BitState{0b01, 2}, BitState{0b10, 2},
                                       BitState{0b11, 2}};
  const TransitionDataset d = collect_dataset_from(env, inits, 40, 6, 1);
  CHECK(d.distinct_states.size() == 4);
  CHECK_NOTHROW(verify_dynamics(d));
}

TEST_CASE("relabel ratios validate") {
  CHECK_THROWS_AS((RelabelRatios{0.5, 0.2, 0.1, 0.1}.validate()), ContractError);
  CHECK_THROWS_AS((RelabelRatios{-0.1, 0.5, 0.3, 0.3}.validate()), ContractError);
  CHECK_NOTHROW((RelabelRatios{0.2, 0.0, 0.5, 0.3}.validate()));
}

TEST_CASE("cur relabeling sets the goal to the current state") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 2}, 10, 10, 9);
  Rng rng(1);
  const TrainingBatch batch = sample_batch(d, RelabelRatios{1, 0, 0, 0}, 256, 0.95, rng);
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch.g[i].bits == batch.s[i].bits);
    CHECK(batch.branch[i] == RelabelBranch::kCur);
    // current-state goal match: reward 0, done 1
    CHECK(batch.reward[i] == 0.0);
    CHECK(batch.done_mask[i] == 1.0);
  }
}

TEST_CASE("traj relabeling draws future states only") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 2}, 6, 15, 10);
  Rng rng(2);
  const TrainingBatch batch = sample_batch(d, RelabelRatios{0, 0, 1, 0}, 512, 0.95, rng);
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch.branch[i] == RelabelBranch::kTraj);
    // the goal must appear at some strictly-future index of the same
    // trajectory; verify by replaying from s_next
    bool found = false;
    for (uint32_t traj = 0; traj < d.n_traj && !found; ++traj) {
      for (uint32_t t = 0; t + 1 <= d.traj_len && !found; ++t) {
        if (d.state_at(traj, t).bits == batch.s[i].bits &&
            d.action_at(traj, t) == batch.a[i] &&
            d.state_at(traj, t + 1).bits == batch.s_next[i].bits) {
          for (uint32_t u = t + 1; u <= d.traj_len; ++u) {
            if (d.state_at(traj, u).bits == batch.g[i].bits) found = true;
          }
        }
      }
    }
    CHECK(found);
  }
}

TEST_CASE("relabel mixture fractions converge to the ratios") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 3}, 20, 20, 11);
  const RelabelRatios ratios{0.2, 0.0, 0.5, 0.3};
  Rng rng(3);
  const int n = 20000;
  const TrainingBatch batch = sample_batch(d, ratios, n, 0.95, rng);
  int counts[4] = {0, 0, 0, 0};
  for (auto b : batch.branch) counts[static_cast<int>(b)] += 1;
  const double expected[4] = {0.2, 0.0, 0.5, 0.3};
  for (int k = 0; k < 4; ++k) {
    const double sigma = std::sqrt(n * expected[k] * (1.0 - expected[k]));
    CHECK(std::abs(counts[k] - n * expected[k]) <= 3.0 * sigma + 1.0);
  }
}

TEST_CASE("geometric offsets match the exact pmf") {
  // One long trajectory; measure the GEOM offset distribution from t=0 draws.
  const double gamma = 0.95;
  const uint32_t T = 2000;
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 3}, 1, T, 12);
  Rng rng(4);
  const int n = 100000;

  // Count goal indices: with one trajectory, offset = goal_index - (t+1).
  // Sample per-element (traj fixed). To isolate the offset we rebuild the
  // sampler's draws: use sample_batch and recover t via matching s and a at
  // a unique index. Simpler: draw offsets directly through the rng facade.
  std::vector<int> counts(64, 0);
  int overflow = 0;
  for (int i = 0; i < n; ++i) {
    const uint64_t delta = rng.geometric_from_gamma(gamma);
    if (delta < counts.size()) {
      counts[static_cast<size_t>(delta)] += 1;
    } else {
      ++overflow;
    }
  }
  for (int k = 0; k < 40; ++k) {
    const double p = std::pow(gamma, k) * (1.0 - gamma);
    const double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(std::abs(counts[static_cast<size_t>(k)] - n * p) <= 3.0 * sigma + 1.0);
  }
  CHECK(overflow < n);  // sanity; tail mass beyond 64 is ~3.7%
  (void)d;
}

TEST_CASE("geom relabeling clamps at the trajectory end") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 2}, 4, 5, 13);
  Rng rng(5);
  // gamma near 1 forces huge offsets; goals must clamp to states[T]
  const TrainingBatch batch = sample_batch(d, RelabelRatios{0, 1, 0, 0}, 128, 0.999999, rng);
  int clamped = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch.branch[i] == RelabelBranch::kGeom);
    bool is_tail = false;
    for (uint32_t traj = 0; traj < d.n_traj; ++traj) {
      if (batch.g[i].bits == d.state_at(traj, d.traj_len).bits) is_tail = true;
    }
    if (is_tail) ++clamped;
  }
  CHECK(clamped == static_cast<int>(batch.size()));
}

TEST_CASE("reward and done follow the -1/0 absorbing convention") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 2}, 10, 10, 14);
  Rng rng(6);
  const TrainingBatch batch = sample_batch(d, RelabelRatios{0.25, 0.25, 0.25, 0.25}, 2048, 0.95, rng);
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch.s[i].bits == batch.g[i].bits) {
      CHECK(batch.reward[i] == 0.0);
      CHECK(batch.done_mask[i] == 1.0);
    } else {
      CHECK(batch.reward[i] == -1.0);
      CHECK(batch.done_mask[i] == 0.0);
    }
  }
}

TEST_CASE("ex-bcmp goal match works at the latent level") {
  const ExBcmpSpec env{PuzzleSpec{2, 2}, 4};
  const TransitionDataset d = collect_dataset(env, 10, 10, 15);
  Rng rng(7);
  const TrainingBatch batch = sample_batch(d, RelabelRatios{1, 0, 0, 0}, 256, 0.95, rng);
  for (size_t i = 0; i < batch.size(); ++i) {
    // CUR goals equal the current observation including noise, so latent
    // matching must fire even when a different-noise occurrence is compared.
    CHECK(batch.reward[i] == 0.0);
    CHECK(d.goal_match(batch.s[i], batch.g[i]));
  }
  const BitState a{0b0011, 8};
  const BitState b{0b110011, 8};  // same latent, different noise
  const BitState c{0b0010, 8};
  CHECK(d.goal_match(a, b));
  CHECK_FALSE(d.goal_match(a, c));
}

TEST_CASE("dataset file round trip is lossless") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{2, 3}, 25, 9, 16);
  const std::string path = "ds_test.dgrd";
  save_dataset(d, path);
  const TransitionDataset loaded = load_dataset(path);
  CHECK(loaded == d);
  std::filesystem::remove(path);
}

TEST_CASE("dataset file corruption and magic errors are distinct") {
  const TransitionDataset d = collect_dataset(PuzzleSpec{1, 2}, 3, 4, 17);
  const std::string path = "ds_corrupt.dgrd";
  save_dataset(d, path);

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(20);
    char c;
    f.get(c);
    f.seekp(20);
    f.put(static_cast<char>(c ^ 0x01));
  }
  try {
    load_dataset(path);
    FAIL("expected checksum error");
  } catch (const IoError& e) {
    CHECK(e.kind() == IoErrorKind::kChecksumMismatch);
  }

  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "WRONGMAG" << std::string(64, 'y');
  }
  try {
    load_dataset(path);
    FAIL("expected magic error");
  } catch (const IoError& e) {
    CHECK(e.kind() == IoErrorKind::kMagicMismatch);
  }
  std::filesystem::remove(path);
}

TEST_CASE("sampling an empty dataset or bad batch size fails") {
  TransitionDataset empty;
  Rng rng(8);
  CHECK_THROWS_AS(sample_batch(empty, RelabelRatios{1, 0, 0, 0}, 4, 0.95, rng), ContractError);
}
