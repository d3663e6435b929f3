#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <sstream>

#include "robreg/errors.hpp"
#include "robreg/harness.hpp"

namespace robreg {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

double to_double(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + s + "'");
  }
  if (used != s.size()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + s + "'");
  }
  return v;
}

long long to_int(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + s + "'");
  }
  if (used != s.size()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
      })) {
    throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' is out of range");
  }
}

std::vector<double> to_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(part, key));
  return out;
}

std::shared_ptr<const TabulatedDensity> gaussian_table(double loc, double scale) {
  if (!(scale > 0.0)) throw ConfigError("config: adversary scale must be positive");
  Grid1D grid = Grid1D::uniform(loc - 12.0 * scale, loc + 12.0 * scale, 2001);
  std::vector<double> v(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    v[k] = normal_pdf(grid.nodes()[k], loc, scale * scale);
  }
  return std::make_shared<const TabulatedDensity>(std::move(grid), std::move(v));
}

std::vector<std::string> default_estimators(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kRate1d: return {"trunc", "lad"};
    case ExperimentKind::kRateHd: return {"depth", "lad"};
    case ExperimentKind::kLadRate: return {"lad"};
    case ExperimentKind::kGammaEffect: return {"trunc"};
    default: return {};
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kRate1d: return "rate_1d";
    case ExperimentKind::kRateHd: return "rate_hd";
    case ExperimentKind::kLadRate: return "lad_rate";
    case ExperimentKind::kGammaEffect: return "gamma_effect";
    case ExperimentKind::kL2TruncDemo: return "l2_trunc_demo";
    case ExperimentKind::kMatchingCheck: return "matching_check";
    case ExperimentKind::kHardnessCheck: return "hardness_check";
    case ExperimentKind::kFanoCurve: return "fano_curve";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto kind : {ExperimentKind::kRate1d, ExperimentKind::kRateHd,
                    ExperimentKind::kLadRate, ExperimentKind::kGammaEffect,
                    ExperimentKind::kL2TruncDemo, ExperimentKind::kMatchingCheck,
                    ExperimentKind::kHardnessCheck, ExperimentKind::kFanoCurve}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("config: unknown experiment kind '" + name + "'");
}

AdversarySpec parse_adversary(const std::string& text) {
  const std::vector<std::string> parts = split(text, ':');
  const std::string& name = parts.empty() ? text : parts[0];
  auto arity = [&](std::size_t n) {
    if (parts.size() != n + 1) {
      throw ConfigError("config: adversary '" + name + "' expects " + std::to_string(n) +
                        " parameter(s)");
    }
  };
  if (name == "none") return arity(0), adversary::None{};
  if (name == "flip_sign") return arity(0), adversary::FlipSign{};
  if (name == "nonuniform_lb") return arity(0), adversary::NonuniformLb{};
  if (name == "point_mass") {
    arity(1);
    return adversary::PointMass{to_double(parts[1], "adversary")};
  }
  if (name == "matched_pair") {
    arity(1);
    return adversary::MatchedPair{to_double(parts[1], "adversary")};
  }
  if (name == "sparse_additive") {
    arity(1);
    return adversary::SparseAdditive{to_double(parts[1], "adversary")};
  }
  if (name == "oblivious_noise" || name == "oblivious_response") {
    arity(2);
    auto q = gaussian_table(to_double(parts[1], "adversary"), to_double(parts[2], "adversary"));
    if (name == "oblivious_noise") return adversary::ObliviousNoise{q};
    return adversary::ObliviousResponse{q};
  }
  throw ConfigError("config: unknown adversary '" + text + "'");
}

TruncationPolicy parse_policy(const std::string& text) {
  const std::vector<std::string> parts = split(text, ':');
  if (text == "thm1") return TruncationPolicy::thm1();
  if (text == "thm2") return TruncationPolicy::thm2();
  if (text == "thm5") return TruncationPolicy::thm5(2.0);
  if (parts.size() == 2 && parts[0] == "thm5") {
    return TruncationPolicy::thm5(to_double(parts[1], "t_policy"));
  }
  if (parts.size() == 2 && parts[0] == "fixed") {
    return TruncationPolicy::fixed(to_double(parts[1], "t_policy"));
  }
  throw ConfigError("config: unknown truncation policy '" + text + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.n_grid.empty()) throw ConfigError("config: n_grid must be non-empty");
  for (long long n : c.n_grid) {
    if (n < 1) throw ConfigError("config: n_grid entries must be positive");
  }
  if (c.eps_grid.empty()) throw ConfigError("config: eps_grid must be non-empty");
  for (double e : c.eps_grid) {
    if (!(e >= 0.0 && e < 0.5)) throw ConfigError("config: eps_grid entries must lie in [0, 1/2)");
  }
  if (c.p < 1) throw ConfigError("config: p must be positive");
  if (c.reps < 1) throw ConfigError("config: reps must be at least 1");
  if (!(c.sigma > 0.0)) throw ConfigError("config: sigma must be positive");
  if (!c.beta.empty() && static_cast<int>(c.beta.size()) != c.p) {
    throw ConfigError("config: beta length must equal p");
  }
  for (double g : c.gamma_grid) {
    if (!(g > 0.0)) throw ConfigError("config: gamma_grid entries must be positive");
  }
  if (c.m < 0) throw ConfigError("config: m must be non-negative");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("config: delta must lie in (0, 1)");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  bool have_estimators = false;
  bool have_policy = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + " is not key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "kind") {
      c.kind = parse_experiment_kind(value);
    } else if (key == "n_grid" || key == "n") {
      c.n_grid.clear();
      for (const auto& part : split(value, ',')) c.n_grid.push_back(to_int(part, key));
    } else if (key == "p") {
      c.p = static_cast<int>(to_int(value, key));
    } else if (key == "eps_grid" || key == "eps") {
      c.eps_grid = to_doubles(value, key);
    } else if (key == "sigma") {
      c.sigma = to_double(value, key);
    } else if (key == "adversary") {
      if (value != "hard_sq") parse_adversary(value);
      c.adversary = value;
    } else if (key == "estimators") {
      c.estimators = split(value, ',');
      have_estimators = true;
    } else if (key == "t_policy") {
      c.t_policy = parse_policy(value);
      have_policy = true;
    } else if (key == "reps") {
      c.reps = static_cast<int>(to_int(value, key));
    } else if (key == "base_seed" || key == "seed") {
      c.base_seed = to_u64(value, key);
    } else if (key == "beta") {
      c.beta = to_doubles(value, key);
    } else if (key == "gamma_grid" || key == "gamma") {
      c.gamma_grid = to_doubles(value, key);
    } else if (key == "t_grid") {
      c.t_grid = to_doubles(value, key);
    } else if (key == "m") {
      c.m = static_cast<int>(to_int(value, key));
    } else if (key == "delta") {
      c.delta = to_double(value, key);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (!have_estimators) c.estimators = default_estimators(c.kind);
  if (!have_policy && c.kind == ExperimentKind::kGammaEffect) {
    c.t_policy = TruncationPolicy::thm5(2.0);
  }
  if (c.eps_grid.empty()) c.eps_grid = {0.0};
  if (c.n_grid.empty()) {
    switch (c.kind) {
      case ExperimentKind::kL2TruncDemo: c.n_grid = {1000}; break;
      case ExperimentKind::kMatchingCheck: c.n_grid = {1}; break;
      case ExperimentKind::kHardnessCheck: c.n_grid = {100000}; break;
      case ExperimentKind::kFanoCurve: c.n_grid = {1000, 10000, 100000, 1000000}; break;
      default: break;
    }
  }
  if (c.kind == ExperimentKind::kGammaEffect && c.gamma_grid.empty()) c.gamma_grid = {1.0, 2.0};
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  return parse_config(in);
}

}  // namespace robreg
