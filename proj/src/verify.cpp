#include "dgrd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dgrd/rng.hpp"

namespace dgrd {

std::string TheoremReport::text() const {
  std::ostringstream os;
  os << theorem_id << " on " << instance << ": " << (passed() ? "PASS" : "FAIL") << " ("
     << pairs_checked << " pairs checked, " << violations.size() << " violations";
  if (control_pairs > 0) {
    os << ", " << control_identical << "/" << control_pairs << " control pairs identical";
  }
  os << ")";
  return os.str();
}

std::string TheoremReport::jsonl() const {
  std::ostringstream os;
  for (const Violation& v : violations) {
    os << "{\"theorem\":\"" << theorem_id << "\",\"s\":" << v.s.bits << ",\"g\":" << v.g.bits
       << ",\"expected\":" << v.expected << ",\"got\":" << v.got << "}\n";
  }
  return os.str();
}

TheoremReport check_sufficiency_with(
    const PuzzleSpec& spec, double gamma,
    const std::function<DistanceField(BitState)>& distance_provider, uint64_t cap) {
  spec.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("gamma must lie in (0, 1)");
  const std::vector<BitState> states = enumerate_states(spec, cap);
  const std::vector<uint64_t> masks = toggle_masks(spec);
  const int actions = spec.action_count();

  TheoremReport report;
  report.theorem_id = "sufficiency";
  report.instance = std::to_string(spec.n_x) + "x" + std::to_string(spec.n_y) +
                    " gamma=" + std::to_string(gamma);

  for (const BitState& goal : states) {
    const DistanceField field = distance_provider(goal);
    for (const BitState& start : states) {
      const uint8_t d = field.at(start);
      if (d == DistanceField::kUnreachable) continue;
      report.pairs_checked += 1;

      // Roll out the induced policy; an optimal policy needs exactly d steps.
      BitState cur = start;
      int steps = 0;
      while (cur.bits != goal.bits && steps < static_cast<int>(d)) {
        int best_a = 0;
        double best_v = -1.0;
        for (int a = 0; a < actions; ++a) {
          const uint8_t dn = field.dist[cur.bits ^ masks[static_cast<size_t>(a)]];
          const double v = dn == DistanceField::kUnreachable
                               ? 0.0
                               : std::pow(gamma, static_cast<double>(dn));
          if (v > best_v) {
            best_v = v;
            best_a = a;
          }
        }
        cur = step(spec, cur, best_a);
        ++steps;
      }
      if (cur.bits != goal.bits) {
        report.violations.push_back(Violation{start, goal, static_cast<double>(d),
                                              static_cast<double>(spec.cells() + 1)});
      }
    }
  }
  return report;
}

TheoremReport check_sufficiency(const PuzzleSpec& spec, double gamma, uint64_t cap) {
  return check_sufficiency_with(
      spec, gamma, [&](BitState goal) { return bfs_distances(spec, goal, cap); }, cap);
}

TheoremReport check_noise_invariance(const ExBcmpSpec& spec, double gamma, int samples,
                                     uint64_t seed, uint64_t cap) {
  spec.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("gamma must lie in (0, 1)");
  if (samples < 1) throw ContractError("samples must be >= 1");
  const uint64_t latent_count = spec.base.state_count();
  if (latent_count > cap) {
    throw ContractError("latent state count exceeds enumeration cap " + std::to_string(cap));
  }

  TheoremReport report;
  report.theorem_id = "noise_invariance";
  report.instance = std::to_string(spec.base.n_x) + "x" + std::to_string(spec.base.n_y) + "+" +
                    std::to_string(spec.noise_bits) + "b noise";

  Rng rng(seed);

  // Landmark observations drawn from distinct latents (full coverage on small
  // boards); representations go through latent_of on both sides.
  std::vector<uint64_t> latents(latent_count);
  for (uint64_t i = 0; i < latent_count; ++i) latents[i] = i;
  const int k = static_cast<int>(std::min<uint64_t>(64, latent_count));
  LandmarkSet landmark_latents = sample_landmarks(latents, spec.base.cells(), k, seed);
  LandmarkSet landmark_obs;
  landmark_obs.seed = seed;
  for (const BitState& z : landmark_latents.states) landmark_obs.states.push_back(emit(spec, z, rng));

  const auto rep_of = [&](BitState obs) {
    const BitState z = latent_of(spec, obs);
    const DistanceField field = bfs_distances(spec.base, z, cap);
    std::vector<double> rep(landmark_obs.states.size());
    for (size_t i = 0; i < landmark_obs.states.size(); ++i) {
      const BitState lz = latent_of(spec, landmark_obs.states[i]);
      rep[i] = static_cast<double>(field.at(lz));
    }
    return rep;
  };

  // Same-latent pairs must match exactly.
  for (int i = 0; i < samples; ++i) {
    const BitState z{rng.uniform_u64(latent_count), spec.base.cells()};
    const BitState g1 = emit(spec, z, rng);
    const BitState g2 = emit(spec, z, rng);
    const std::vector<double> r1 = rep_of(g1);
    const std::vector<double> r2 = rep_of(g2);
    report.pairs_checked += 1;
    for (size_t c = 0; c < r1.size(); ++c) {
      if (r1[c] != r2[c]) {
        report.violations.push_back(Violation{g1, g2, r1[c], r2[c]});
        break;
      }
    }
  }

  // Control pairs with different latents should differ somewhere.
  if (latent_count > 1) {
    for (int i = 0; i < samples; ++i) {
      const BitState z1{rng.uniform_u64(latent_count), spec.base.cells()};
      BitState z2 = z1;
      while (z2.bits == z1.bits) z2 = BitState{rng.uniform_u64(latent_count), spec.base.cells()};
      const std::vector<double> r1 = rep_of(emit(spec, z1, rng));
      const std::vector<double> r2 = rep_of(emit(spec, z2, rng));
      report.control_pairs += 1;
      if (r1 == r2) report.control_identical += 1;
    }
    if (report.control_identical * 20 > report.control_pairs) {
      report.violations.push_back(Violation{BitState{0, spec.base.cells()},
                                            BitState{0, spec.base.cells()},
                                            0.0,
                                            static_cast<double>(report.control_identical)});
    }
  }
  return report;
}

TheoremReport check_distance_value_identity(const PuzzleSpec& spec, double gamma, double tol,
                                            int n_goals, uint64_t seed, uint64_t cap) {
  spec.validate();
  if (!(tol > 0.0)) throw ContractError("tol must be positive");
  const uint64_t n = spec.state_count();
  if (n > cap) {
    throw ContractError("state count exceeds enumeration cap " + std::to_string(cap));
  }

  TheoremReport report;
  report.theorem_id = "distance_value_identity";
  report.instance = std::to_string(spec.n_x) + "x" + std::to_string(spec.n_y) +
                    " gamma=" + std::to_string(gamma) + " tol=" + std::to_string(tol);

  // Stop value iteration tightly enough that the fixed-point gap
  // (residual * gamma / (1-gamma)) stays well under tol.
  const double vi_tol = tol * (1.0 - gamma) / gamma * 0.5;

  Rng rng(seed);
  for (int gi = 0; gi < n_goals; ++gi) {
    const BitState goal{rng.uniform_u64(n), spec.cells()};
    const DistanceField field = bfs_distances(spec, goal, cap);
    const ValueField vm =
        value_iteration(spec, goal, gamma, vi_tol, RewardConvention::kMinusOneZero, cap);
    const ValueField vz = value_iteration(spec, goal, gamma, vi_tol, RewardConvention::kZeroOne, cap);
    for (uint64_t s = 0; s < n; ++s) {
      report.pairs_checked += 1;
      const uint8_t d = field.dist[s];
      const double want_m = closed_form_value(d, gamma, RewardConvention::kMinusOneZero);
      const double want_z = closed_form_value(d, gamma, RewardConvention::kZeroOne);
      const BitState sb{s, spec.cells()};
      if (std::abs(vm.value[s] - want_m) > tol) {
        report.violations.push_back(Violation{sb, goal, want_m, vm.value[s]});
      }
      if (std::abs(vz.value[s] - want_z) > tol) {
        report.violations.push_back(Violation{sb, goal, want_z, vz.value[s]});
      }
    }
  }
  return report;
}

}  // namespace dgrd
