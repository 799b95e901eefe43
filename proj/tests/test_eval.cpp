#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfc/error.hpp"
#include "dfc/eval.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dfc;

namespace {

// Trace with the given psi values, actions, levels and full-information entropies.
EpisodeTrace synthetic(const std::vector<double>& psi, const std::vector<int>& action,
                       const std::vector<int>& level, const std::vector<double>& entropy) {
  EpisodeTrace tr;
  int aoi = 0;
  for (size_t t = 0; t < psi.size(); ++t) {
    tr.state.push_back({0.0, 0.0, psi[t], 0.0});
    tr.action.push_back(action[t]);
    tr.level.push_back(level[t]);
    tr.ell.push_back(level[t]);
    tr.aoi.push_back(aoi);
    tr.robot_entropy.push_back(0.0);
    tr.full_entropy.push_back(entropy[t]);
    aoi = update_aoi(aoi, level[t] > 0);
  }
  return tr;
}

class SuiteTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ensemble_ = new CodebookEnsemble(test::small_trained_ensemble(env_));
    Rng rng(5);
    robot_ = new RobotPolicy(RobotPolicy::create(MessageShape::of(*ensemble_), rng, 8, 8));
  }
  static void TearDownTestSuite() {
    delete robot_;
    delete ensemble_;
  }
  static EpisodeComponents components() { return {&env_, ensemble_, nullptr, robot_, nullptr}; }

  static inline EnvConfig env_{};
  static inline CodebookEnsemble* ensemble_ = nullptr;
  static inline RobotPolicy* robot_ = nullptr;
};

}  // namespace

TEST(Pareto, Examples) {
  const std::vector<double> a = {-1.23, 28.0}, b = {-2.0, 24.99};
  EXPECT_TRUE(pareto_dominates(a, b));
  EXPECT_FALSE(pareto_dominates(b, a));
  EXPECT_FALSE(pareto_dominates(a, a));
  const std::vector<double> c = {3.0, 5.0}, d = {5.0, 3.0};
  EXPECT_FALSE(pareto_dominates(c, d));
  EXPECT_FALSE(pareto_dominates(d, c));
  const std::vector<double> three = {1.0, 2.0, 3.0};
  EXPECT_THROW(pareto_dominates(a, three), Error);
}

TEST(Pareto, FrontMatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> pts(30);
    for (auto& p : pts) {
      // coarse grid values so ties and duplicates occur
      p = {std::floor(uniform01(rng) * 6), std::floor(uniform01(rng) * 6),
           std::floor(uniform01(rng) * 3)};
    }
    EXPECT_EQ(pareto_front(pts), test::brute_front(pts));
  }
  EXPECT_TRUE(pareto_front({}).empty());
}

TEST(Pareto, DuplicatesStayOnTheFront) {
  const std::vector<std::vector<double>> pts = {{1, 1}, {1, 1}, {0, 0}};
  EXPECT_EQ(pareto_front(pts), (std::vector<size_t>{0, 1}));
}

TEST(Rmsd, Examples) {
  const std::vector<double> s = {1.0, -1.0, 1.0, -1.0};
  EXPECT_DOUBLE_EQ(rmsd(s, 0.0), 1.0);
  const std::vector<double> t = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(rmsd(t, 0.0), std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(rmsd(t, 3.5), 0.5);
  EXPECT_THROW(rmsd(std::vector<double>{}, 0.0), Error);
}

TEST(Bootstrap, ConstantSampleHasZeroWidth) {
  Rng rng(1);
  const std::vector<double> xs(50, 7.0);
  const Interval ci = bootstrap_mean_ci(xs, 200, rng);
  EXPECT_DOUBLE_EQ(ci.lo, 7.0);
  EXPECT_DOUBLE_EQ(ci.hi, 7.0);
}

TEST(Bootstrap, CoversTheSampleMean) {
  Rng rng(2);
  std::vector<double> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(normal01(rng));
  double mean = 0.0;
  for (double x : xs) mean += x / xs.size();
  Rng boot(3);
  const Interval ci = bootstrap_mean_ci(xs, 1000, boot);
  EXPECT_LT(ci.lo, mean);
  EXPECT_GT(ci.hi, mean);
  // standard error of the mean is about 0.07
  EXPECT_NEAR(ci.hi - ci.lo, 2 * 1.96 / std::sqrt(200.0), 0.06);
}

TEST(Spearman, Examples) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> up = {10, 20, 30, 40, 50};
  const std::vector<double> down = {5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman(a, up), 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, down), -1.0, 1e-15);
  const std::vector<double> ties = {1, 1, 2, 2, 3};
  // average ranks 1.5,1.5,3.5,3.5,5 against 1..5
  EXPECT_NEAR(spearman(a, ties), 0.9486832980505138, 1e-12);
  const std::vector<double> with_nan = {1, NAN, 3, 4, 5};
  EXPECT_NEAR(spearman(with_nan, up), 1.0, 1e-15);
  EXPECT_TRUE(std::isnan(spearman(a, std::vector<double>(5, 1.0))));
}

TEST(Maps, EntropyAndBitrateCells) {
  GridAxis psi{StateVar::kPsi, -1.0, 1.0, 2};
  GridAxis x{StateVar::kX, -1.0, 1.0, 1};
  // Negative psi: actions alternate (entropy 1); positive psi: always Right (entropy 0).
  std::vector<double> p;
  std::vector<int> act, lvl;
  for (int i = 0; i < 40; ++i) {
    p.push_back(-0.5);
    act.push_back(i % 2);
    lvl.push_back(6);
    p.push_back(0.5);
    act.push_back(1);
    lvl.push_back(0);
  }
  const std::vector<EpisodeTrace> trs = {synthetic(p, act, lvl, std::vector<double>(80, 0.5))};
  const GridMap e = entropy_map(trs, psi, x, 20);
  EXPECT_NEAR(e.at(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(e.at(1, 0), 0.0, 1e-12);
  EXPECT_EQ(e.count_at(0, 0), 40);
  const GridMap b = bitrate_map(trs, psi, x, 20);
  EXPECT_DOUBLE_EQ(b.at(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(b.at(1, 0), 0.0);
  const GridMap sparse = bitrate_map(trs, psi, x, 41);
  EXPECT_TRUE(std::isnan(sparse.at(0, 0)));
}

TEST(Maps, CsvHasOneRowPerCell) {
  GridAxis a{StateVar::kPsi, -1.0, 1.0, 3};
  GridAxis b{StateVar::kX, -1.0, 1.0, 4};
  const GridMap m = bitrate_map({}, a, b, 1);
  std::ostringstream out;
  write_heatmap(out, m);
  int lines = 0;
  std::istringstream in(out.str());
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 1 + 12);
  EXPECT_NE(out.str().find("nan"), std::string::npos);
}

TEST(AoiDistribution, CountsPerColumn) {
  // levels 6,0,0,3 -> aoi 0,0,1,2 ; entropy 0.05 (bin 0) or 0.95 (bin 9)
  const EpisodeTrace tr =
      synthetic({0, 0, 0, 0}, {0, 0, 0, 0}, {6, 0, 0, 3}, {0.05, 0.05, 0.95, 0.95});
  const AoiDistribution d = aoi_action_distribution({tr}, 10, 6, 4);
  EXPECT_EQ(d.column_count(0, 0), 2);
  EXPECT_DOUBLE_EQ(d.at(0, 0, 6), 0.5);
  EXPECT_DOUBLE_EQ(d.at(0, 0, 0), 0.5);
  EXPECT_EQ(d.column_count(1, 9), 1);
  EXPECT_DOUBLE_EQ(d.at(1, 9, 0), 1.0);
  EXPECT_DOUBLE_EQ(d.at(2, 9, 3), 1.0);
  EXPECT_TRUE(std::isnan(d.at(3, 0, 0)));
  for (int a = 0; a <= 2; ++a) {
    for (int bin : {0, 9}) {
      if (d.column_count(a, bin) == 0) continue;
      double s = 0.0;
      for (int l = 0; l <= 6; ++l) s += d.at(a, bin, l);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(AoiDistribution, TransmitProbabilityByEntropy) {
  std::vector<double> prior;
  std::vector<int> lvl;
  for (int i = 0; i < 40; ++i) {
    prior.push_back(i < 20 ? 0.05 : 0.95);
    lvl.push_back(i < 20 ? 0 : (i % 2 ? 4 : 0));
  }
  const EpisodeTrace tr = synthetic(std::vector<double>(40, 0.0), std::vector<int>(40, 0), lvl, prior);
  const auto p = transmit_prob_by_entropy({tr}, 10, 0, 20);
  EXPECT_DOUBLE_EQ(p[0], 0.0);
  EXPECT_DOUBLE_EQ(p[9], 0.5);
  EXPECT_TRUE(std::isnan(p[5]));
}

TEST_F(SuiteTest, StaticSchemesReportExactMeanLength) {
  SuiteOptions o;
  o.episodes = 3;
  o.bootstrap_resamples = 50;
  const MetricPoint none = evaluate_suite("static", components(), LevelSelector::fixed(0), o);
  const MetricPoint full = evaluate_suite("static", components(), LevelSelector::fixed(6), o);
  EXPECT_EQ(none.mean_ell, 0.0);
  EXPECT_EQ(full.mean_ell, 6.0);
  EXPECT_DOUBLE_EQ(none.level_freq[0], 1.0);
  EXPECT_DOUBLE_EQ(full.level_freq[6], 1.0);
  EXPECT_EQ(full.lengths.size(), 3u);
  EXPECT_LE(full.length_ci_lo, full.mean_length);
  EXPECT_GE(full.length_ci_hi, full.mean_length);
}

TEST_F(SuiteTest, SchemesShareInitialStates) {
  SuiteOptions o;
  o.episodes = 4;
  o.keep_traces = 4;
  o.bootstrap_resamples = 10;
  std::vector<EpisodeTrace> a, b;
  evaluate_suite("s", components(), LevelSelector::fixed(6), o, &a);
  evaluate_suite("s", components(), LevelSelector::fixed(1), o, &b);
  ASSERT_EQ(a.size(), 4u);
  for (size_t i = 0; i < 4; ++i) EXPECT_EQ(a[i].state.front(), b[i].state.front());
}

TEST_F(SuiteTest, ParetoCsvRoundTrip) {
  SuiteOptions o;
  o.episodes = 2;
  o.bootstrap_resamples = 10;
  MetricPoint p = evaluate_suite("static", components(), LevelSelector::fixed(3), o);
  p.level = "3";
  const auto path = std::filesystem::temp_directory_path() / "dfc_test_pareto.csv";
  {
    std::ofstream out(path);
    write_pareto_header(out);
    write_pareto_row(out, p);
  }
  const auto rows = read_pareto(path.string());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].scheme, "static");
  EXPECT_EQ(rows[0].level, "3");
  EXPECT_DOUBLE_EQ(rows[0].ell, 3.0);
  EXPECT_NEAR(rows[0].ep_len, p.mean_length, 1e-6 * p.mean_length);
  EXPECT_TRUE(std::isnan(rows[0].state_mse));
  EXPECT_DOUBLE_EQ(rows[0].null_freq, 0.0);
  std::filesystem::remove(path);
}

TEST(StateVar, NamesRoundTrip) {
  for (StateVar v : {StateVar::kX, StateVar::kXDot, StateVar::kPsi, StateVar::kPsiDot}) {
    EXPECT_EQ(parse_state_var(state_var_name(v)), v);
  }
  EXPECT_THROW(parse_state_var("theta"), Error);
}
