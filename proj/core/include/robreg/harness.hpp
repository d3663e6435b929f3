#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "robreg/contamination.hpp"
#include "robreg/estimators.hpp"

namespace robreg {

enum class ExperimentKind {
  kRate1d,
  kRateHd,
  kLadRate,
  kGammaEffect,
  kL2TruncDemo,
  kMatchingCheck,
  kHardnessCheck,
  kFanoCurve,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kRate1d;
  std::vector<long long> n_grid;
  int p = 1;
  std::vector<double> eps_grid;
  double sigma = 1.0;
  std::string adversary = "flip_sign";
  std::vector<std::string> estimators;
  TruncationPolicy t_policy = TruncationPolicy::thm1();
  int reps = 1;
  std::uint64_t base_seed = 0;

  std::vector<double> beta;        // empty means e_1
  std::vector<double> gamma_grid;  // gamma_effect designs
  std::vector<double> t_grid;      // l2_trunc_demo thresholds
  int m = 4;                       // hardness_check
  double delta = 0.02;             // hardness_check
};

void validate(const ExperimentConfig& config);

// Flat key=value text; '#' starts a comment; lists are comma-separated.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Adversary from its config spelling, e.g. "flip_sign", "point_mass:0",
// "oblivious_noise:0:3" (Q = N(0, 3^2)).
AdversarySpec parse_adversary(const std::string& text);
TruncationPolicy parse_policy(const std::string& text);

struct ResultRow {
  std::string kind;
  long long n = 0;
  int p = 0;
  double eps = 0.0;
  std::string estimator;
  double t_used = 0.0;
  int rep_count = 0;
  double mean_err = 0.0;
  double median_err = 0.0;
  double se = 0.0;
  double wall_ms = 0.0;
  std::string error;  // non-empty for failed cells; not serialized

  bool operator==(const ResultRow& other) const;
};

std::vector<ResultRow> run_experiment(const ExperimentConfig& config, int threads = 1);

// Runs fn(0..count-1) on a pool of workers pulling task indices.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

inline constexpr const char* kCsvHeader =
    "kind,n,p,eps,estimator,t_used,rep_count,mean_err,median_err,se,wall_ms";

// wall_ms is written as 0 unless include_timing is set.
std::string format_csv(const std::vector<ResultRow>& rows, bool include_timing = false);
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path,
              bool include_timing = false);
std::vector<ResultRow> parse_csv(std::istream& in);

std::string format_svg_loglog(const std::vector<ResultRow>& rows);
void emit_svg_loglog(const std::vector<ResultRow>& rows, const std::string& path);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Randomized certification battery for the matching constructions.
std::vector<CheckResult> matching_certifications(std::uint64_t seed, int families = 50);

}  // namespace robreg
