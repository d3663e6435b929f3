#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "robreg/contamination.hpp"
#include "robreg/errors.hpp"
#include "robreg/harness.hpp"
#include "robreg/sq_hardness.hpp"
#include "selftest.hpp"

namespace {

using namespace robreg;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Flags {
  std::string config;
  std::string out;
  std::string in;
  std::string svg;
  std::uint64_t seed = 0;
  bool have_seed = false;
  int threads = 1;
  bool timing = false;
};

// A missing kind= line falls back to the subcommand's natural kind.
ExperimentConfig load_as(const std::string& path, ExperimentKind fallback) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream text;
  text << file.rdbuf();
  std::string body = text.str();
  bool has_kind = false;
  std::istringstream lines(body);
  for (std::string line; std::getline(lines, line);) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line.compare(first, 4, "kind") == 0) has_kind = true;
  }
  if (!has_kind) body = "kind=" + to_string(fallback) + "\n" + body;
  std::istringstream in(body);
  return parse_config(in);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw IoError("write to '" + path + "' failed");
}

int report_checks(const std::vector<CheckResult>& results) {
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  int failed = 0;
  for (const auto& r : results) {
    std::cout << fmt::format("{:<{}}  {}", r.name, width, r.passed ? "PASS" : "FAIL");
    if (!r.passed) {
      ++failed;
      std::cout << "  " << r.detail;
    }
    std::cout << '\n';
  }
  std::cout << fmt::format("{} of {} checks passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : kExitFailure;
}

int cmd_simulate(const Flags& f) {
  const ExperimentConfig c = load_as(f.config, ExperimentKind::kRate1d);
  if (c.adversary == "hard_sq") throw ConfigError("simulate: hard_sq samples come from 'hardness'");
  ModelSpec model;
  model.beta = Eigen::VectorXd::Zero(c.p);
  if (c.beta.empty()) {
    model.beta(0) = 1.0;
  } else {
    for (int j = 0; j < c.p; ++j) model.beta(j) = c.beta[j];
  }
  model.sigma = c.sigma;
  model.epsilon = c.eps_grid.front();
  model.design = c.gamma_grid.empty() ? DesignSpec::gaussian(c.p)
                                      : DesignSpec::generalized(c.gamma_grid.front(), c.p);
  model.adversary = parse_adversary(c.adversary);
  RngStream rng(f.have_seed ? f.seed : c.base_seed, 0);
  const ContaminatedSample s = generate(model, static_cast<int>(c.n_grid.front()), rng);

  std::string text;
  for (int j = 0; j < c.p; ++j) text += fmt::format("x{},", j + 1);
  text += "y,inlier\n";
  for (int i = 0; i < s.n(); ++i) {
    for (int j = 0; j < c.p; ++j) text += fmt::format("{:.17g},", s.X(i, j));
    text += fmt::format("{:.17g},{}\n", s.y(i), s.inlier_mask[i] ? 1 : 0);
  }
  write_text(f.out, text);
  return 0;
}

int cmd_rates(const Flags& f) {
  ExperimentConfig c = load_as(f.config, ExperimentKind::kRate1d);
  if (f.have_seed) c.base_seed = f.seed;
  const std::vector<ResultRow> rows = run_experiment(c, f.threads);
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      std::cerr << fmt::format("cell n={} eps={} {}: {}\n", r.n, r.eps, r.estimator, r.error);
    }
  }
  write_text(f.out, format_csv(rows, f.timing));
  if (!f.svg.empty()) emit_svg_loglog(rows, f.svg);
  return 0;
}

int cmd_matching(const Flags& f) {
  return report_checks(matching_certifications(f.have_seed ? f.seed : 0));
}

std::string verification_text(const HardInstance& inst) {
  const HardVerification v = inst.verify();
  std::string out;
  out += fmt::format("m {}\neps {:.17g}\ndelta {:.17g}\n", inst.m(), inst.epsilon(), inst.delta());
  out += fmt::format("kappa {:.17g}\n", inst.kappa());
  for (std::size_t i = 0; i < inst.achieved_B().size(); ++i) {
    out += fmt::format("achieved_B_{} {:.17g}  target_B_{} {:.17g}\n", i + 1,
                       inst.achieved_B()[i], i + 1, inst.target_B()[i]);
  }
  out += fmt::format("g_moment_residual {:.17g}\n", v.g_moment_residual);
  out += fmt::format("moment_residual {:.17g}\n", v.moment_residual);
  out += fmt::format("marginal_residual {:.17g}\n", v.marginal_residual);
  out += fmt::format("fluctuation_excess {:.17g}\n", v.fluctuation_excess);
  out += fmt::format("min_Ay {:.17g}\n", v.min_Ay);
  out += fmt::format("ay_mass_residual {:.17g}\n", v.ay_mass_residual);
  out += fmt::format("mass_D {:.17g}\nmass_R {:.17g}\n", v.mass_D, v.mass_R);
  out += fmt::format("chi2_avg {:.17g}\n", inst.chi2_avg());
  return out;
}

int cmd_hardness(const Flags& f) {
  if (!f.in.empty()) {
    std::ifstream is(f.in);
    if (!is) throw IoError("cannot open '" + f.in + "'");
    std::cout << verification_text(HardInstance::import_text(is));
    return 0;
  }
  const ExperimentConfig c = f.config.empty()
                                 ? [] {
                                     std::istringstream in("kind=hardness_check\neps=0.2\n");
                                     return parse_config(in);
                                   }()
                                 : load_as(f.config, ExperimentKind::kHardnessCheck);
  const HardInstance inst = HardInstance::build(c.m, c.eps_grid.front(), c.delta);
  std::cout << verification_text(inst);
  if (!f.out.empty()) {
    std::ostringstream os;
    inst.export_text(os);
    write_text(f.out, os.str());
  }
  return 0;
}

int cmd_fano(const Flags& f) {
  ExperimentConfig c;
  if (f.config.empty()) {
    std::istringstream in("kind=fano_curve\neps=0,0.05,0.1,0.2\n");
    c = parse_config(in);
  } else {
    c = load_as(f.config, ExperimentKind::kFanoCurve);
  }
  if (c.kind != ExperimentKind::kFanoCurve) throw ConfigError("fano: config kind must be fano_curve");
  write_text(f.out, format_csv(run_experiment(c, 1)));
  return 0;
}

int cmd_selftest() { return report_checks(tools::run_selftest()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust regression experiments and certification tools"};
  app.require_subcommand(1);
  Flags flags;
  std::string seed_text;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", flags.config, "Experiment config file (key=value)");
    if (config_required) opt->required();
    sub->add_option("--out", flags.out, "Output path (default: standard output)");
    sub->add_option("--seed", seed_text, "Base seed (unsigned 64-bit decimal)");
    sub->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto* simulate = app.add_subcommand("simulate", "Dump one contaminated sample as CSV");
  add_common(simulate, true);
  auto* rates = app.add_subcommand("rates", "Run a Monte Carlo experiment");
  add_common(rates, true);
  rates->add_flag("--timing", flags.timing, "Record wall-clock time per cell");
  rates->add_option("--svg", flags.svg, "Also write a log-log chart");
  auto* matching = app.add_subcommand("matching", "Certify the matching constructions");
  add_common(matching, false);
  auto* hardness = app.add_subcommand("hardness", "Build, verify and export a hard instance");
  add_common(hardness, false);
  hardness->add_option("--in", flags.in, "Verify a previously exported instance");
  auto* fano = app.add_subcommand("fano", "Tabulate the Fano lower bound");
  add_common(fano, false);
  auto* selftest = app.add_subcommand("selftest", "Run the built-in example checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (!seed_text.empty()) {
      if (seed_text.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("--seed expects an unsigned decimal integer");
      }
      flags.seed = std::stoull(seed_text);
      flags.have_seed = true;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(flags);
    if (*rates) return cmd_rates(flags);
    if (*matching) return cmd_matching(flags);
    if (*hardness) return cmd_hardness(flags);
    if (*fano) return cmd_fano(flags);
    if (*selftest) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
