#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dfc/error.hpp"
#include "dfc/remote_loop.hpp"
#include "fixtures.hpp"

using namespace dfc;

namespace {

class LoopTest : public ::testing::Test {
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

  static EpisodeTrace run(const LevelSelector& sel, const EpisodeOptions& opts = {},
                          std::uint64_t seed = 1) {
    Rng env_rng(seed), pol_rng(seed + 100);
    return run_episode(components(), sel, opts, env_rng, pol_rng);
  }

  static inline EnvConfig env_{};
  static inline CodebookEnsemble* ensemble_ = nullptr;
  static inline RobotPolicy* robot_ = nullptr;
};

}  // namespace

TEST(Aoi, Examples) {
  EXPECT_EQ(update_aoi(3, true), 0);
  EXPECT_EQ(update_aoi(3, false), 4);
  int a = 0;
  std::vector<int> seen;
  for (bool tx : {true, false, false}) {
    a = update_aoi(a, tx);
    seen.push_back(a);
  }
  EXPECT_EQ(seen, (std::vector<int>{0, 1, 2}));
  EXPECT_THROW(update_aoi(-1, false), Error);
}

TEST_F(LoopTest, FixedFinestLevelSendsSixBytesEveryStep) {
  const EpisodeTrace tr = run(LevelSelector::fixed(6));
  ASSERT_GT(tr.length(), 0u);
  for (size_t t = 0; t < tr.length(); ++t) {
    EXPECT_EQ(tr.level[t], 6);
    EXPECT_EQ(tr.ell[t], 6.0);
    EXPECT_EQ(tr.aoi[t], 0);
  }
}

TEST_F(LoopTest, NullSelectorSendsNothingAndAgeGrows) {
  const EpisodeTrace tr = run(LevelSelector::fixed(0));
  ASSERT_GT(tr.length(), 0u);
  for (size_t t = 0; t < tr.length(); ++t) {
    EXPECT_EQ(tr.ell[t], 0.0);
    EXPECT_TRUE(tr.message[t].is_null());
    EXPECT_EQ(tr.aoi[t], static_cast<int>(t));
  }
}

TEST_F(LoopTest, CyclicPatternIsFollowed) {
  const EpisodeTrace tr = run(LevelSelector::cycle({0, 2, 0, 4}));
  for (size_t t = 0; t < tr.length(); ++t) {
    const int expect[] = {0, 2, 0, 4};
    EXPECT_EQ(tr.level[t], expect[t % 4]);
    EXPECT_EQ(tr.ell[t], static_cast<double>(expect[t % 4]));
  }
}

TEST_F(LoopTest, SameSeedsGiveIdenticalTraces) {
  const EpisodeTrace a = run(LevelSelector::cycle({6, 3, 0}));
  const EpisodeTrace b = run(LevelSelector::cycle({6, 3, 0}));
  ASSERT_EQ(a.length(), b.length());
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.action, b.action);
  EXPECT_EQ(a.env_reward, b.env_reward);
  const EpisodeTrace c = run(LevelSelector::cycle({6, 3, 0}), {}, 2);
  EXPECT_NE(a.state.front(), c.state.front());
}

TEST_F(LoopTest, LevelCRewardIsEnvRewardMinusCost) {
  EpisodeOptions opts;
  opts.reward_level = CommLevel::kC;
  opts.beta = 0.1;
  const EpisodeTrace tr = run(LevelSelector::cycle({6, 0, 3}), opts);
  const double obs = std::accumulate(tr.observer_reward.begin(), tr.observer_reward.end(), 0.0);
  const double env = std::accumulate(tr.env_reward.begin(), tr.env_reward.end(), 0.0);
  const double bytes = std::accumulate(tr.ell.begin(), tr.ell.end(), 0.0);
  EXPECT_NEAR(obs, env - 0.1 * bytes, 1e-9);
}

TEST_F(LoopTest, EpisodeEndsAtFailureOrHorizon) {
  const EpisodeTrace tr = run(LevelSelector::fixed(0));
  ASSERT_LE(tr.length(), static_cast<size_t>(env_.horizon));
  if (tr.terminated) {
    EXPECT_LT(tr.length(), static_cast<size_t>(env_.horizon));
  } else {
    EXPECT_EQ(tr.length(), static_cast<size_t>(env_.horizon));
  }
  for (double r : tr.env_reward) {
    EXPECT_LE(r, 0.0);
    EXPECT_GE(r, -2.0 - 1e-9);
  }
}

TEST_F(LoopTest, CounterfactualVoiIsZeroOnNullSteps) {
  EpisodeOptions opts;
  opts.counterfactual = true;
  const EpisodeTrace tr = run(LevelSelector::cycle({0, 6}), opts);
  for (size_t t = 0; t < tr.length(); ++t) {
    EXPECT_TRUE(std::isfinite(tr.prior_entropy[t]));
    EXPECT_TRUE(std::isfinite(tr.full_entropy[t]));
    if (tr.level[t] == 0) {
      EXPECT_EQ(tr.voi[t], 0.0);
      EXPECT_DOUBLE_EQ(tr.prior_entropy[t], tr.robot_entropy[t]);
    } else {
      EXPECT_DOUBLE_EQ(tr.full_entropy[t], tr.robot_entropy[t]);
    }
  }
}

TEST_F(LoopTest, LevelBWithoutRegressorIsRejected) {
  EpisodeOptions opts;
  opts.reward_level = CommLevel::kB;
  EXPECT_THROW(run(LevelSelector::fixed(6), opts), Error);
}

TEST_F(LoopTest, SelectorBeyondFinestLevelIsRejected) {
  EXPECT_THROW(run(LevelSelector::fixed(7)), Error);
  EXPECT_THROW(run(LevelSelector::cycle({})), Error);
}

TEST_F(LoopTest, TraceCsvRoundTrip) {
  EpisodeOptions opts;
  opts.counterfactual = true;
  const EpisodeTrace a = run(LevelSelector::cycle({6, 0}), opts, 3);
  const EpisodeTrace b = run(LevelSelector::fixed(2), opts, 4);
  const auto path = std::filesystem::temp_directory_path() / "dfc_test_traces.csv";
  {
    std::ofstream out(path);
    write_trace_header(out);
    write_trace_rows(out, 0, a);
    write_trace_rows(out, 1, b);
  }
  const auto back = read_traces(path.string());
  ASSERT_EQ(back.size(), 2u);
  const EpisodeTrace* orig[] = {&a, &b};
  for (size_t e = 0; e < 2; ++e) {
    const EpisodeTrace& o = *orig[e];
    ASSERT_EQ(back[e].length(), o.length());
    for (size_t t = 0; t < o.length(); ++t) {
      EXPECT_NEAR(back[e].state[t].psi, o.state[t].psi, 1e-8);
      EXPECT_EQ(back[e].level[t], o.level[t]);
      EXPECT_EQ(back[e].action[t], o.action[t]);
      EXPECT_EQ(back[e].aoi[t], o.aoi[t]);
      EXPECT_NEAR(back[e].prior_entropy[t], o.prior_entropy[t], 1e-8);
      EXPECT_NEAR(back[e].full_entropy[t], o.full_entropy[t], 1e-8);
    }
  }
  std::filesystem::remove(path);
}

TEST(TraceFile, MissingAndMalformedAreRejected) {
  EXPECT_THROW(read_traces("/nonexistent/traces.csv"), Error);
  const auto path = std::filesystem::temp_directory_path() / "dfc_test_bad_traces.csv";
  {
    std::ofstream out(path);
    out << "episode,t,x,x_dot,psi,psi_dot,level,ell,action,reward,aoi,entropy,value,"
           "prior_entropy,voi,full_entropy\n0,0,1,2\n";
  }
  EXPECT_THROW(read_traces(path.string()), Error);
  std::filesystem::remove(path);
}
