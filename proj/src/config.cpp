#include "dgrd/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dgrd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int64_t parse_i64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ContractError("config field '" + key + "': expected integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  const int64_t r = parse_i64(key, v);
  if (r < 0) throw ContractError("config field '" + key + "': expected nonnegative integer");
  return static_cast<uint64_t>(r);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ContractError("config field '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ContractError("config field '" + key + "': expected true|false, got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

std::string join_commas(const std::vector<std::string>& parts) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

RelabelRatios parse_ratios(const std::string& key, const std::string& v) {
  const auto parts = split_commas(v);
  if (parts.size() != 4) {
    throw ContractError("config field '" + key + "': expected 4 comma-separated ratios");
  }
  return RelabelRatios{parse_double(key, parts[0]), parse_double(key, parts[1]),
                       parse_double(key, parts[2]), parse_double(key, parts[3])};
}

std::string ratios_to_string(const RelabelRatios& r) {
  return join_commas({fmt_double(r.p_cur), fmt_double(r.p_geom), fmt_double(r.p_traj),
                      fmt_double(r.p_rand)});
}

struct FieldDef {
  const char* key;
  const char* comment;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

const std::vector<FieldDef>& field_defs() {
  auto int_field = [](const char* key, const char* comment, int ExperimentConfig::* member) {
    return FieldDef{key, comment,
                    [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
                    [member, key](ExperimentConfig& c, const std::string& v) {
                      c.*member = static_cast<int>(parse_i64(key, v));
                    }};
  };
  auto i64_field = [](const char* key, const char* comment, int64_t ExperimentConfig::* member) {
    return FieldDef{key, comment,
                    [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
                    [member, key](ExperimentConfig& c, const std::string& v) {
                      c.*member = parse_i64(key, v);
                    }};
  };
  auto u64_field = [](const char* key, const char* comment, uint64_t ExperimentConfig::* member) {
    return FieldDef{key, comment,
                    [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
                    [member, key](ExperimentConfig& c, const std::string& v) {
                      c.*member = parse_u64(key, v);
                    }};
  };
  auto dbl_field = [](const char* key, const char* comment, double ExperimentConfig::* member) {
    return FieldDef{key, comment,
                    [member](const ExperimentConfig& c) { return fmt_double(c.*member); },
                    [member, key](ExperimentConfig& c, const std::string& v) {
                      c.*member = parse_double(key, v);
                    }};
  };
  auto bool_field = [](const char* key, const char* comment, bool ExperimentConfig::* member) {
    return FieldDef{key, comment,
                    [member](const ExperimentConfig& c) { return c.*member ? "true" : "false"; },
                    [member, key](ExperimentConfig& c, const std::string& v) {
                      c.*member = parse_bool(key, v);
                    }};
  };
  auto str_field = [](const char* key, const char* comment, std::string ExperimentConfig::* member) {
    return FieldDef{key, comment, [member](const ExperimentConfig& c) { return c.*member; },
                    [member](ExperimentConfig& c, const std::string& v) { c.*member = v; }};
  };
  auto ratio_field = [](const char* key, const char* comment,
                        RelabelRatios ExperimentConfig::* member) {
    return FieldDef{key, comment,
                    [member](const ExperimentConfig& c) { return ratios_to_string(c.*member); },
                    [member, key](ExperimentConfig& c, const std::string& v) {
                      c.*member = parse_ratios(key, v);
                    }};
  };

  static const std::vector<FieldDef> defs = {
      // puzzle
      int_field("puzzle_n_x", "board rows", &ExperimentConfig::n_x),
      int_field("puzzle_n_y", "board columns", &ExperimentConfig::n_y),
      int_field("noise_bits", "exogenous observation bits (0 = plain puzzle)",
                &ExperimentConfig::noise_bits),
      int_field("enumeration_cap_bits", "refuse exact all-state work beyond 2^this",
                &ExperimentConfig::enumeration_cap_bits),
      // dataset
      str_field("dataset_path", "offline dataset file", &ExperimentConfig::dataset_path),
      int_field("n_traj", "trajectories collected by the uniform random policy",
                &ExperimentConfig::n_traj),
      int_field("traj_len", "transitions per trajectory", &ExperimentConfig::traj_len),
      u64_field("data_seed", "collection seed", &ExperimentConfig::data_seed),
      // training
      i64_field("gradient_steps", "per-phase step budget", &ExperimentConfig::gradient_steps),
      bool_field("full_budget", "true raises gradient_steps to 1000000",
                 &ExperimentConfig::full_budget),
      dbl_field("learning_rate", "Adam learning rate", &ExperimentConfig::learning_rate),
      int_field("batch_size", "minibatch size", &ExperimentConfig::batch_size),
      FieldDef{"mlp_sizes", "hidden layer widths",
               [](const ExperimentConfig& c) {
                 std::vector<std::string> parts;
                 for (int s : c.mlp_sizes) parts.push_back(std::to_string(s));
                 return join_commas(parts);
               },
               [](ExperimentConfig& c, const std::string& v) {
                 c.mlp_sizes.clear();
                 for (const auto& p : split_commas(v)) {
                   c.mlp_sizes.push_back(static_cast<int>(parse_i64("mlp_sizes", p)));
                 }
               }},
      bool_field("layer_norm", "layer normalization on hidden layers",
                 &ExperimentConfig::layer_norm),
      dbl_field("target_update_rate", "EMA rate for target networks",
                &ExperimentConfig::target_update_rate),
      dbl_field("gamma", "discount factor", &ExperimentConfig::gamma),
      ratio_field("dqn_relabel_ratios", "policy-phase (p_cur, p_geom, p_traj, p_rand)",
                  &ExperimentConfig::dqn_ratios),
      // representation
      FieldDef{"encoder", "goal encoder: original | ideal_dual | learned_dual",
               [](const ExperimentConfig& c) { return std::string(to_string(c.encoder)); },
               [](ExperimentConfig& c, const std::string& v) {
                 c.encoder = encoder_kind_from_string(v);
               }},
      int_field("repr_n", "goal representation width N", &ExperimentConfig::repr_n),
      dbl_field("kappa", "expectile for the factored value", &ExperimentConfig::kappa),
      FieldDef{"aggregator", "factored value head combiner: inner_product | neg_l2",
               [](const ExperimentConfig& c) { return std::string(to_string(c.aggregator)); },
               [](ExperimentConfig& c, const std::string& v) {
                 c.aggregator = aggregator_from_string(v);
               }},
      ratio_field("repr_relabel_ratios", "representation-phase (p_cur, p_geom, p_traj, p_rand)",
                  &ExperimentConfig::repr_ratios),
      FieldDef{"expectile_residual_sign", "qbar_minus_f (IQL convention) | f_minus_qbar",
               [](const ExperimentConfig& c) {
                 return std::string(c.residual_qbar_minus_f ? "qbar_minus_f" : "f_minus_qbar");
               },
               [](ExperimentConfig& c, const std::string& v) {
                 if (v == "qbar_minus_f") {
                   c.residual_qbar_minus_f = true;
                 } else if (v == "f_minus_qbar") {
                   c.residual_qbar_minus_f = false;
                 } else {
                   throw ContractError(
                       "config field 'expectile_residual_sign': expected qbar_minus_f|f_minus_qbar");
                 }
               }},
      FieldDef{"dual_state_input", "auto | on | off",
               [](const ExperimentConfig& c) { return std::string(to_string(c.dual_state_input)); },
               [](ExperimentConfig& c, const std::string& v) {
                 if (v == "auto") {
                   c.dual_state_input = DualStateInput::kAuto;
                 } else if (v == "on") {
                   c.dual_state_input = DualStateInput::kOn;
                 } else if (v == "off") {
                   c.dual_state_input = DualStateInput::kOff;
                 } else {
                   throw ContractError("config field 'dual_state_input': expected auto|on|off");
                 }
               }},
      int_field("landmark_count", "landmarks for the ideal dual representation",
                &ExperimentConfig::landmark_count),
      u64_field("landmark_seed", "landmark sampling seed", &ExperimentConfig::landmark_seed),
      str_field("repr_checkpoint", "goal-encoder checkpoint for learned_dual policy runs",
                &ExperimentConfig::repr_checkpoint),
      // evaluation
      int_field("n_tasks", "evaluation tasks", &ExperimentConfig::n_tasks),
      int_field("episodes_per_task", "episodes per task", &ExperimentConfig::episodes_per_task),
      int_field("scramble_presses", "task scramble presses (0 = n_x*n_y)",
                &ExperimentConfig::scramble_presses),
      i64_field("eval_every", "evaluation period in gradient steps", &ExperimentConfig::eval_every),
      u64_field("eval_seed", "task generation / eval rollout seed", &ExperimentConfig::eval_seed),
      // verify
      int_field("verify_cap_bits", "exhaustive checks refuse beyond 2^this states",
                &ExperimentConfig::verify_cap_bits),
      int_field("verify_noise_bits", "noise bits for the invariance check when noise_bits = 0",
                &ExperimentConfig::verify_noise_bits),
      int_field("verify_samples", "sampled goals for the invariance check",
                &ExperimentConfig::verify_samples),
      dbl_field("verify_tol", "distance/value identity tolerance", &ExperimentConfig::verify_tol),
      int_field("verify_goals", "sampled goals for the identity check",
                &ExperimentConfig::verify_goals),
      u64_field("verify_seed", "verification sampling seed", &ExperimentConfig::verify_seed),
      // run
      u64_field("train_seed", "training seed", &ExperimentConfig::train_seed),
      str_field("run_id", "run directory name (derived when empty)", &ExperimentConfig::run_id),
      str_field("out_dir", "run output root (DGRD_RUN_ROOT overrides)", &ExperimentConfig::out_dir),
      str_field("cache_dir", "distance-field cache directory (empty disables)",
                &ExperimentConfig::cache_dir),
      FieldDef{"fig3_seeds", "seeds for the two-arm comparison",
               [](const ExperimentConfig& c) {
                 std::vector<std::string> parts;
                 for (uint64_t s : c.fig3_seeds) parts.push_back(std::to_string(s));
                 return join_commas(parts);
               },
               [](ExperimentConfig& c, const std::string& v) {
                 c.fig3_seeds.clear();
                 for (const auto& p : split_commas(v)) {
                   c.fig3_seeds.push_back(parse_u64("fig3_seeds", p));
                 }
               }},
  };
  return defs;
}

}  // namespace

const char* to_string(DualStateInput v) {
  switch (v) {
    case DualStateInput::kAuto: return "auto";
    case DualStateInput::kOn: return "on";
    case DualStateInput::kOff: return "off";
  }
  return "auto";
}

void ExperimentConfig::validate() const {
  puzzle().validate();
  env().validate();
  if (enumeration_cap_bits < 1 || enumeration_cap_bits > 30) {
    throw ContractError("config field 'enumeration_cap_bits': must lie in [1, 30]");
  }
  if (n_traj < 1) throw ContractError("config field 'n_traj': must be >= 1");
  if (traj_len < 1) throw ContractError("config field 'traj_len': must be >= 1");
  if (gradient_steps < 1) throw ContractError("config field 'gradient_steps': must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ContractError("config field 'learning_rate': must be a finite nonnegative number");
  }
  if (batch_size < 1) throw ContractError("config field 'batch_size': must be >= 1");
  for (int s : mlp_sizes) {
    if (s < 1) throw ContractError("config field 'mlp_sizes': widths must be positive");
  }
  if (!(target_update_rate > 0.0 && target_update_rate <= 1.0)) {
    throw ContractError("config field 'target_update_rate': must lie in (0, 1]");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ContractError("config field 'gamma': must lie in (0, 1)");
  }
  try {
    dqn_ratios.validate();
  } catch (const ContractError& e) {
    throw ContractError("config field 'dqn_relabel_ratios': " + std::string(e.what()));
  }
  try {
    repr_ratios.validate();
  } catch (const ContractError& e) {
    throw ContractError("config field 'repr_relabel_ratios': " + std::string(e.what()));
  }
  if (repr_n < 1) throw ContractError("config field 'repr_n': must be >= 1");
  if (!(kappa > 0.0 && kappa < 1.0)) throw ContractError("config field 'kappa': must lie in (0, 1)");
  if (landmark_count < 1) throw ContractError("config field 'landmark_count': must be >= 1");
  if (n_tasks < 1) throw ContractError("config field 'n_tasks': must be >= 1");
  if (episodes_per_task < 1) throw ContractError("config field 'episodes_per_task': must be >= 1");
  if (scramble_presses < 0) throw ContractError("config field 'scramble_presses': must be >= 0");
  if (eval_every < 1) throw ContractError("config field 'eval_every': must be >= 1");
  if (verify_cap_bits < 1 || verify_cap_bits > 30) {
    throw ContractError("config field 'verify_cap_bits': must lie in [1, 30]");
  }
  if (verify_noise_bits < 1 || puzzle().cells() + verify_noise_bits > 64) {
    throw ContractError("config field 'verify_noise_bits': must keep observations within 64 bits");
  }
  if (verify_samples < 1) throw ContractError("config field 'verify_samples': must be >= 1");
  if (!(verify_tol > 0.0)) throw ContractError("config field 'verify_tol': must be positive");
  if (verify_goals < 1) throw ContractError("config field 'verify_goals': must be >= 1");
  if (fig3_seeds.empty()) throw ContractError("config field 'fig3_seeds': must be nonempty");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const FieldDef* def = nullptr;
    for (const auto& d : field_defs()) {
      if (key == d.key) {
        def = &d;
        break;
      }
    }
    if (!def) {
      throw ContractError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (seen[key]) {
      throw ContractError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    seen[key] = true;
    def->set(config, value);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kOpenFailed, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream os;
  for (const auto& d : field_defs()) {
    os << "# " << d.comment << "\n" << d.key << " = " << d.get(config) << "\n";
  }
  return os.str();
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::kOpenFailed, "cannot write config " + path);
  out << serialize_config(config);
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& d : field_defs()) {
    if (key == d.key) {
      d.set(config, value);
      return;
    }
  }
  throw ContractError("unknown config key '" + key + "'");
}

uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = serialize_config(config);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dgrd
