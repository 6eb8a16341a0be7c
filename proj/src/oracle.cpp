#include "dgrd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "dgrd/io.hpp"
#include "dgrd/rng.hpp"

namespace dgrd {

namespace {

constexpr char kDistanceFieldMagic[8] = {'D', 'G', 'R', 'D', '-', 'D', 'F', '\0'};

}  // namespace

DistanceField bfs_distances(const PuzzleSpec& spec, BitState goal, uint64_t cap) {
  spec.validate();
  const uint64_t n = spec.state_count();
  if (n > cap) {
    throw ContractError("state count 2^" + std::to_string(spec.cells()) +
                        " exceeds enumeration cap " + std::to_string(cap));
  }
  const std::vector<uint64_t> masks = toggle_masks(spec);

  DistanceField field;
  field.spec = spec;
  field.goal = goal;
  field.dist.assign(n, DistanceField::kUnreachable);
  field.dist[goal.bits] = 0;

  std::vector<uint64_t> frontier{goal.bits};
  std::vector<uint64_t> next;
  uint8_t depth = 0;
  while (!frontier.empty()) {
    ++depth;
    next.clear();
    for (const uint64_t s : frontier) {
      for (const uint64_t mask : masks) {
        const uint64_t t = s ^ mask;
        if (field.dist[t] == DistanceField::kUnreachable) {
          field.dist[t] = depth;
          next.push_back(t);
        }
      }
    }
    frontier.swap(next);
  }
  return field;
}

double closed_form_value(uint8_t dist, double gamma, RewardConvention convention) {
  if (convention == RewardConvention::kMinusOneZero) {
    if (dist == DistanceField::kUnreachable) return -1.0 / (1.0 - gamma);
    return -(1.0 - std::pow(gamma, static_cast<double>(dist))) / (1.0 - gamma);
  }
  if (dist == DistanceField::kUnreachable) return 0.0;
  return std::pow(gamma, static_cast<double>(dist));
}

ValueField value_iteration(const PuzzleSpec& spec, BitState goal, double gamma, double tol,
                           RewardConvention convention, uint64_t cap) {
  spec.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("gamma must lie in (0, 1)");
  if (!(tol > 0.0)) throw ContractError("tol must be positive");
  const uint64_t n = spec.state_count();
  if (n > cap) {
    throw ContractError("state count 2^" + std::to_string(spec.cells()) +
                        " exceeds enumeration cap " + std::to_string(cap));
  }
  const std::vector<uint64_t> masks = toggle_masks(spec);

  ValueField field;
  field.spec = spec;
  field.goal = goal;
  field.gamma = gamma;
  field.convention = convention;

  const double goal_value = convention == RewardConvention::kMinusOneZero ? 0.0 : 1.0;
  const double step_reward = convention == RewardConvention::kMinusOneZero ? -1.0 : 0.0;

  std::vector<double> v(n, 0.0);
  std::vector<double> v_next(n, 0.0);
  v[goal.bits] = goal_value;

  const uint64_t max_iters =
      static_cast<uint64_t>(std::ceil(std::log(tol * (1.0 - gamma)) / std::log(gamma))) + 100;

  double residual = 0.0;
  for (uint64_t iter = 0; iter < max_iters; ++iter) {
    residual = 0.0;
#pragma omp parallel for schedule(static) reduction(max : residual)
    for (int64_t si = 0; si < static_cast<int64_t>(n); ++si) {
      const uint64_t s = static_cast<uint64_t>(si);
      if (s == goal.bits) {
        v_next[s] = goal_value;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (const uint64_t mask : masks) {
        const double q = step_reward + gamma * v[s ^ mask];
        if (q > best) best = q;
      }
      v_next[s] = best;
      const double delta = std::abs(best - v[s]);
      if (delta > residual) residual = delta;
    }
    v.swap(v_next);
    field.iterations = iter + 1;
    if (residual <= tol) {
      field.value = std::move(v);
      return field;
    }
  }
  throw ContractError("value iteration failed to converge: residual " + std::to_string(residual) +
                      " after " + std::to_string(max_iters) + " sweeps");
}

LandmarkSet sample_landmarks(const std::vector<uint64_t>& pool, int state_width, int k,
                             uint64_t seed) {
  if (k < 0 || static_cast<size_t>(k) > pool.size()) {
    throw ContractError("cannot sample " + std::to_string(k) + " landmarks from " +
                        std::to_string(pool.size()) + " distinct states");
  }
  std::vector<uint64_t> shuffled = pool;
  Rng rng(seed);
  for (int i = 0; i < k; ++i) {
    const size_t j =
        static_cast<size_t>(i) + rng.uniform_u64(static_cast<uint64_t>(shuffled.size() - i));
    std::swap(shuffled[static_cast<size_t>(i)], shuffled[j]);
  }
  LandmarkSet out;
  out.seed = seed;
  out.states.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) out.states.push_back(BitState{shuffled[static_cast<size_t>(i)], state_width});
  return out;
}

LandmarkSet sample_landmarks(const TransitionDataset& dataset, int k, uint64_t seed) {
  return sample_landmarks(dataset.distinct_states, dataset.obs_width(), k, seed);
}

std::vector<double> ideal_dual_rep(const LandmarkSet& landmarks, BitState goal,
                                   const DistanceField& goal_field) {
  std::vector<double> rep(landmarks.states.size());
  for (size_t i = 0; i < landmarks.states.size(); ++i) {
    const uint8_t d = goal_field.at(landmarks.states[i]);
    if (d == DistanceField::kUnreachable) {
      throw ContractError("landmark " + to_binary_string(landmarks.states[i]) +
                          " unreachable from goal " + to_binary_string(goal));
    }
    rep[i] = static_cast<double>(d);
  }
  return rep;
}

std::vector<double> ideal_dual_rep(const LandmarkSet& landmarks, BitState goal,
                                   const std::function<const DistanceField&(BitState)>& provider) {
  return ideal_dual_rep(landmarks, goal, provider(goal));
}

void save_distance_field(const DistanceField& field, const std::string& path) {
  io::Writer w;
  w.u32(1);
  w.u32(static_cast<uint32_t>(field.spec.n_x));
  w.u32(static_cast<uint32_t>(field.spec.n_y));
  w.u64(field.goal.bits);
  w.u64(field.dist.size());
  w.bytes(field.dist.data(), field.dist.size());
  io::write_file(path, kDistanceFieldMagic, w);
}

DistanceField load_distance_field(const std::string& path) {
  const std::vector<uint8_t> payload = io::read_file(path, kDistanceFieldMagic);
  io::Reader r(payload.data(), payload.size());
  const uint32_t version = r.u32();
  if (version != 1) {
    throw IoError(IoErrorKind::kVersionMismatch,
                  "distance field version " + std::to_string(version) + " unsupported");
  }
  DistanceField field;
  field.spec.n_x = static_cast<int>(r.u32());
  field.spec.n_y = static_cast<int>(r.u32());
  field.spec.validate();
  field.goal = BitState{r.u64(), field.spec.cells()};
  const uint64_t n = r.u64();
  if (n != field.spec.state_count()) {
    throw IoError(IoErrorKind::kSpecMismatch, "distance field size does not match spec");
  }
  field.dist.resize(n);
  r.bytes(field.dist.data(), n);
  if (r.remaining() != 0) throw IoError(IoErrorKind::kTruncated, "trailing bytes in " + path);
  return field;
}

DistanceFieldCache::DistanceFieldCache(std::string dir, uint64_t cap)
    : dir_(std::move(dir)), cap_(cap) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

const DistanceField& DistanceFieldCache::get(const PuzzleSpec& spec, BitState goal) {
  for (const auto& f : loaded_) {
    if (f->spec == spec && f->goal.bits == goal.bits) return *f;
  }
  if (!dir_.empty()) {
    char name[64];
    std::snprintf(name, sizeof(name), "df_%dx%d_g%016llx.dgrd", spec.n_x, spec.n_y,
                  static_cast<unsigned long long>(goal.bits));
    const std::string path = dir_ + "/" + name;
    if (std::filesystem::exists(path)) {
      auto f = std::make_unique<DistanceField>(load_distance_field(path));
      if (!(f->spec == spec)) throw IoError(IoErrorKind::kSpecMismatch, "cached field spec differs");
      loaded_.push_back(std::move(f));
      return *loaded_.back();
    }
    auto f = std::make_unique<DistanceField>(bfs_distances(spec, goal, cap_));
    save_distance_field(*f, path);
    loaded_.push_back(std::move(f));
    return *loaded_.back();
  }
  loaded_.push_back(std::make_unique<DistanceField>(bfs_distances(spec, goal, cap_)));
  return *loaded_.back();
}

}  // namespace dgrd
