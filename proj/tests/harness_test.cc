#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "robreg/errors.hpp"
#include "robreg/harness.hpp"

namespace robreg {
namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ResultRow row(long long n, const std::string& est, double median) {
  ResultRow r;
  r.kind = "rate_1d";
  r.n = n;
  r.p = 1;
  r.eps = 0.1;
  r.estimator = est;
  r.t_used = 0.75;
  r.rep_count = 20;
  r.mean_err = 1.5 * median;
  r.median_err = median;
  r.se = 0.01;
  return r;
}

std::vector<ResultRow> three_rows() {
  return {row(1000, "trunc", 0.25), row(10000, "trunc", 0.125), row(100000, "trunc", 0.0625)};
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST(Csv, HeaderAndSingleRow) {
  const std::string csv = format_csv({row(1000, "lad", 0.5)});
  std::istringstream in(csv);
  std::string header, line, extra;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header, kCsvHeader);
  EXPECT_EQ(line, "rate_1d,1000,1,0.1,lad,0.75,20,0.75,0.5,0.01,0");
  EXPECT_FALSE(std::getline(in, extra));
}

TEST(Csv, Roundtrip) {
  std::vector<ResultRow> rows = three_rows();
  rows[1].eps = 0.123456789;
  rows[2].median_err = std::numeric_limits<double>::quiet_NaN();
  rows[2].mean_err = std::numeric_limits<double>::quiet_NaN();
  rows[0].wall_ms = 12.5;
  std::istringstream in(format_csv(rows, true));
  EXPECT_EQ(parse_csv(in), rows);
}

TEST(Csv, RejectsBadInput) {
  std::istringstream bad_header("kind,n\nrate_1d,1\n");
  EXPECT_THROW(parse_csv(bad_header), std::exception);
  EXPECT_THROW(emit_csv({}, "/tmp/never.csv"), PreconditionError);
  EXPECT_THROW(emit_csv(three_rows(), "/nonexistent-dir/out.csv"), IoError);
}

TEST(Svg, MatchesFrozenGolden) {
  const std::string svg = format_svg_loglog(three_rows());
  EXPECT_EQ(svg, read_file(std::string(ROBREG_GOLDEN_DIR) + "/loglog_3row.svg"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find(">trunc<"), std::string::npos);
}

TEST(Svg, WritesFile) {
  const auto path = std::filesystem::temp_directory_path() / "robreg_harness_test.svg";
  emit_svg_loglog(three_rows(), path.string());
  EXPECT_EQ(read_file(path.string()), format_svg_loglog(three_rows()));
  std::filesystem::remove(path);
}

TEST(Config, ParsesKeysListsAndComments) {
  const ExperimentConfig c = parse(
      "# comment\n"
      "kind = rate_hd\n"
      "n_grid=1000, 10000\n"
      "p=3\n"
      "eps=0,0.1  # trailing\n"
      "adversary=oblivious_noise:0:3\n"
      "estimators=lad,depth\n"
      "t_policy=thm2\n"
      "reps=7\n"
      "seed=18446744073709551615\n");
  EXPECT_EQ(c.kind, ExperimentKind::kRateHd);
  EXPECT_EQ(c.n_grid, (std::vector<long long>{1000, 10000}));
  EXPECT_EQ(c.p, 3);
  EXPECT_EQ(c.eps_grid, (std::vector<double>{0.0, 0.1}));
  EXPECT_EQ(c.estimators, (std::vector<std::string>{"lad", "depth"}));
  EXPECT_EQ(c.t_policy.kind, TruncationPolicy::Kind::kThm2);
  EXPECT_EQ(c.reps, 7);
  EXPECT_EQ(c.base_seed, 18446744073709551615ULL);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse("kind=rate_1d\nn_grid=ten\n"), ConfigError);
  EXPECT_THROW(parse("kind=rate_1d\nn_grid=1000\nbogus=1\n"), ConfigError);
  EXPECT_THROW(parse("kind=warp\nn_grid=1000\n"), ConfigError);
  EXPECT_THROW(parse("kind=rate_1d\nn_grid=1000\neps=0.5\n"), ConfigError);
  EXPECT_THROW(parse("kind=rate_1d\nn_grid=1000\nreps=0\n"), ConfigError);
  EXPECT_THROW(parse("kind=rate_1d\nn_grid=1000\nadversary=teleport\n"), ConfigError);
  EXPECT_THROW(parse("kind=rate_1d\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/robreg.cfg"), IoError);
}

TEST(Config, AdversaryAndPolicySpellings) {
  EXPECT_TRUE(std::holds_alternative<adversary::FlipSign>(parse_adversary("flip_sign")));
  const AdversarySpec pm = parse_adversary("point_mass:2.5");
  ASSERT_TRUE(std::holds_alternative<adversary::PointMass>(pm));
  EXPECT_EQ(std::get<adversary::PointMass>(pm).y0, 2.5);
  EXPECT_TRUE(std::holds_alternative<adversary::ObliviousResponse>(
      parse_adversary("oblivious_response:1:2")));
  EXPECT_EQ(parse_policy("fixed:1.5").value, 1.5);
  EXPECT_EQ(parse_policy("thm5").value, 2.0);
  EXPECT_EQ(parse_policy("thm5:1").value, 1.0);
  EXPECT_THROW(parse_policy("thm9"), ConfigError);
}

TEST(RunExperiment, DeterministicAcrossThreadCounts) {
  const ExperimentConfig c = parse(
      "kind=rate_1d\nn_grid=300,600\neps=0,0.1\nestimators=trunc,lad\nreps=5\nseed=7\n");
  const std::string a = format_csv(run_experiment(c, 1));
  EXPECT_EQ(a, format_csv(run_experiment(c, 4)));
  EXPECT_EQ(a, format_csv(run_experiment(c, 1)));
}

TEST(RunExperiment, RowsDependOnlyOnTheirCell) {
  const ExperimentConfig small = parse(
      "kind=rate_1d\nn_grid=300,600\neps=0,0.1\nestimators=trunc,lad\nreps=4\nseed=11\n");
  ExperimentConfig grown = small;
  grown.n_grid.push_back(900);
  auto a = run_experiment(small, 3);
  auto b = run_experiment(grown, 2);
  for (auto* rows : {&a, &b}) {
    for (ResultRow& r : *rows) r.wall_ms = 0.0;
  }
  ASSERT_EQ(b.size(), a.size() + 4);
  // Appended cells take new stream ids; the existing cells keep theirs.
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]) << "row " << i;
}

TEST(RunExperiment, UnsupportedEstimatorBecomesErrorRow) {
  const ExperimentConfig c = parse(
      "kind=rate_hd\nn_grid=200\np=2\neps=0\nestimators=trunc,lad\nreps=2\nseed=3\n");
  const auto rows = run_experiment(c, 1);
  ASSERT_EQ(rows.size(), 2u);
  const auto trunc = std::find_if(rows.begin(), rows.end(),
                                  [](const ResultRow& r) { return r.estimator == "trunc"; });
  ASSERT_NE(trunc, rows.end());
  EXPECT_FALSE(trunc->error.empty());
  EXPECT_TRUE(std::isnan(trunc->median_err));
  const auto lad = std::find_if(rows.begin(), rows.end(),
                                [](const ResultRow& r) { return r.estimator == "lad"; });
  EXPECT_TRUE(lad->error.empty());
  EXPECT_GE(lad->median_err, 0.0);
  EXPECT_GE(lad->se, 0.0);
}

TEST(RunExperiment, CleanTruncatedRateSlope) {
  const ExperimentConfig c = parse(
      "kind=rate_1d\nn_grid=1000,10000,100000\neps=0\nestimators=trunc\n"
      "t_policy=fixed:0\nreps=40\nseed=5\n");
  const auto rows = run_experiment(c, 4);
  ASSERT_EQ(rows.size(), 3u);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const ResultRow& r : rows) {
    const double x = std::log(static_cast<double>(r.n)), y = std::log(r.mean_err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
  EXPECT_GE(slope, -0.6);
  EXPECT_LE(slope, -0.4);
}

TEST(RunExperiment, L2TruncationCurveJumpsNearSqrtP) {
  const ExperimentConfig c = parse("kind=l2_trunc_demo\np=50\nn_grid=2000\nreps=2\nseed=9\n");
  const auto rows = run_experiment(c, 2);
  ASSERT_FALSE(rows.empty());
  const double root = std::sqrt(50.0);
  for (const ResultRow& r : rows) {
    EXPECT_EQ(r.estimator, "l2_frac");
    if (r.t_used <= root - 2.5) EXPECT_GT(r.median_err, 0.95) << "t " << r.t_used;
    if (r.t_used >= root + 2.5) EXPECT_LT(r.median_err, 0.05) << "t " << r.t_used;
  }
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 100);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw NumericalError("boom");
                            }),
               NumericalError);
}

TEST(MatchingCertifications, SmallBatteryPasses) {
  for (const CheckResult& r : matching_certifications(1, 5)) {
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  }
}

}  // namespace
}  // namespace robreg
