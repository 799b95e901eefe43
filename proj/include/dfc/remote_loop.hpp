#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "dfc/agents.hpp"

namespace dfc {

// Steps since the last transmission.
int update_aoi(int aoi, bool transmitted);

// Chooses the message level each step: either a fixed cyclic pattern (the
// static baselines use a single-entry pattern) or a learned observer.
struct LevelSelector {
  std::vector<int> pattern;
  const ObserverPolicy* observer = nullptr;
  bool greedy = false;

  static LevelSelector fixed(int level) { return {{level}, nullptr, false}; }
  static LevelSelector cycle(std::vector<int> levels) { return {std::move(levels), nullptr, false}; }
  static LevelSelector learned(const ObserverPolicy& obs, bool greedy = false) {
    return {{}, &obs, greedy};
  }
};

struct EpisodeComponents {
  const EnvConfig* env = nullptr;
  const CodebookEnsemble* ensemble = nullptr;
  const PixelProjection* projection = nullptr;
  const RobotPolicy* robot = nullptr;
  const SemanticRegressor* regressor = nullptr;  // optional
};

struct EpisodeOptions {
  CommLevel reward_level = CommLevel::kC;
  double beta = 0.0;
  bool robot_greedy = true;
  // Also evaluate the robot on the null token each step (prior entropy, VoI).
  bool counterfactual = false;
  // Subtracted from level C rewards recorded on the observer tape; see
  // TrainConfig::failure_reward.
  double failure_reward = 0.0;
  // Multiplies the rewards recorded on the observer tape.
  double reward_scale = 1.0;
};

// Per-step record of one episode. Index t is the decision step; `state` is the
// true state the observation at t was taken from.
struct EpisodeTrace {
  std::vector<SystemState> state;
  std::vector<FeatureVector> features;
  std::vector<int> level;
  std::vector<Message> message;
  std::vector<double> ell;
  std::vector<int> action;
  std::vector<std::array<double, 2>> action_probs;
  std::vector<double> env_reward;
  std::vector<double> observer_reward;
  std::vector<int> aoi;
  std::vector<double> robot_value;
  std::vector<double> observer_value;  // NaN for fixed selectors
  std::vector<double> robot_entropy;   // bits, after consuming the message
  std::vector<double> prior_entropy;   // bits, had the null token been sent
  std::vector<double> full_entropy;    // bits, had the finest message been sent
  std::vector<double> voi;
  std::vector<double> psnr;
  std::vector<double> state_mse;  // NaN without a regressor
  bool terminated = false;        // left the live region (not the horizon)

  size_t length() const { return level.size(); }
};

// Observer-side A2C record produced while running a learned selector.
struct ObserverTape {
  std::vector<StepCache> caches;
  std::vector<Eigen::VectorXd> logits;
  std::vector<int> actions;
  std::vector<double> values;
  std::vector<double> rewards;
  double bootstrap_value = 0.0;
};

// Checks that every component agrees on F, K, V and its input width.
void validate_components(const EpisodeComponents& c, const LevelSelector& sel);

EpisodeTrace run_episode(const EpisodeComponents& components,
                         const LevelSelector& selector,
                         const EpisodeOptions& options, Rng& env_rng,
                         Rng& policy_rng, ObserverTape* tape = nullptr);

// episode,t,x,x_dot,psi,psi_dot,level,ell,action,reward,aoi,entropy,value,
// prior_entropy,voi,full_entropy
void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, int episode, const EpisodeTrace& trace);

// Reads the columns above back; fields not serialized stay empty.
std::vector<EpisodeTrace> read_traces(const std::string& path);

}  // namespace dfc
