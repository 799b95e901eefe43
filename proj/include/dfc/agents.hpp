#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dfc/codec.hpp"
#include "dfc/env.hpp"
#include "dfc/neural.hpp"

namespace dfc {

enum class CommLevel { kA, kB, kC };

char level_name(CommLevel level);
CommLevel parse_level(const std::string& s);

// Shape of the messages a receiver-side network consumes.
struct MessageShape {
  int num_features = 8;
  int dim = 1;
  int max_level = 6;

  int feature_dim() const { return num_features * dim; }
  static MessageShape of(const CodebookEnsemble& e) {
    return {e.num_features, e.dim, e.max_level()};
  }
  bool operator==(const MessageShape&) const = default;
  bool compatible(const MessageShape& o) const {
    return feature_dim() == o.feature_dim() && max_level == o.max_level;
  }
};

// Input layout v1: dequantized features (zeros for the null message), a
// (V+1)-way one-hot of the level, and a no-transmission flag.
inline constexpr std::uint32_t kReceiverLayoutVersion = 1;
int receiver_input_dim(const MessageShape& shape);
std::vector<double> receiver_input(const Message& msg,
                                   const CodebookEnsemble& ensemble);

// Input layout v1: raw features, previous robot action one-hot (2), previous
// own action one-hot (V+1), AoI / 10 clamped to [0, 1]. All feedback slots are
// zero before the first decision.
inline constexpr std::uint32_t kObserverLayoutVersion = 1;
int observer_input_dim(const MessageShape& shape);
std::vector<double> observer_input(std::span<const double> features,
                                   std::optional<Action> prev_robot_action,
                                   std::optional<int> prev_level, int aoi,
                                   const MessageShape& shape,
                                   bool use_aoi = true);

struct RobotPolicy {
  NetworkSpec spec;
  ParameterSet params;
  MessageShape shape;
  AdamState adam;

  static RobotPolicy create(const MessageShape& shape, Rng& rng,
                            int recurrent_hidden = 64, int mlp_hidden = 128);
};

struct ObserverPolicy {
  NetworkSpec spec;
  ParameterSet params;
  MessageShape shape;
  AdamState adam;
  bool use_aoi = true;

  int num_actions() const { return shape.max_level + 1; }
  static ObserverPolicy create(const MessageShape& shape, Rng& rng,
                               int recurrent_hidden = 64, int mlp_hidden = 128);
};

// Receiver-side estimator of the normalized physical state.
struct SemanticRegressor {
  NetworkSpec spec;
  ParameterSet params;
  MessageShape shape;
  AdamState adam;

  static SemanticRegressor create(const MessageShape& shape, Rng& rng,
                                  int recurrent_hidden = 64,
                                  int mlp_hidden = 128);
  std::array<double, 4> predict(const Message& msg,
                                const CodebookEnsemble& ensemble,
                                RecurrentState& state) const;
};

void save_robot(const RobotPolicy& p, const std::string& path);
RobotPolicy load_robot(const std::string& path);
void save_observer(const ObserverPolicy& p, const std::string& path);
ObserverPolicy load_observer(const std::string& path);
void save_regressor(const SemanticRegressor& p, const std::string& path);
SemanticRegressor load_regressor(const std::string& path);

struct RobotStep {
  Action action = Action::kLeft;
  RecurrentState state;
  Eigen::VectorXd probs;
  Eigen::VectorXd logits;
  double value = 0.0;
};

// Consumes one message (or the null token, level 0) and advances the
// recurrent state exactly once.
RobotStep robot_act(const RobotPolicy& policy, const Message& msg,
                    const CodebookEnsemble& ensemble,
                    const RecurrentState& state, Rng& rng, bool greedy,
                    StepCache* cache = nullptr);

// Per-level inputs to the observer reward; only the fields of the selected
// level are required.
struct RewardContext {
  double message_bytes = 0.0;
  double beta = 0.0;
  const Observation* observation = nullptr;      // A
  const Observation* reconstruction = nullptr;   // A
  std::optional<std::array<double, 4>> observer_estimate;  // B
  std::optional<std::array<double, 4>> robot_estimate;     // B
  std::optional<double> env_reward;                        // C
};

// A: PSNR(o, o_hat) - beta*l;  B: -MSE(s_obs, s_rob) - beta*l;
// C: r - beta*l.
double observer_reward(CommLevel level, const RewardContext& ctx);

struct TrainConfig {
  double gamma = 0.95;
  double robot_lr = 1e-3;
  double observer_lr = 1e-3;
  double regressor_lr = 1e-3;
  int batch_size = 256;  // minimum environment steps per update
  int robot_episodes = 20000;
  int observer_episodes = 5000;
  int regressor_episodes = 1000;
  double beta = 0.0;
  CommLevel level = CommLevel::kC;
  double entropy_coef = 0.01;
  double value_coef = 1.0;
  double grad_clip = 5.0;
  int bptt_window = 32;
  std::uint64_t seed = 1;
  int recurrent_hidden = 64;
  int mlp_hidden = 128;
  // Bits per feature of the robot's training messages; 0 means V.
  int robot_train_level = 0;
  // Probability that a training-time robot message is replaced by the null
  // token.
  double robot_null_prob = 0.0;
  // Probability that a regressor training message is drawn at a uniformly
  // random level in {null, 1..V} instead of V.
  double regressor_level_mix = 0.5;
  bool observer_aoi_input = true;
  // Reward the failed (absorbing) state keeps paying under the control
  // objective. Learners subtract it from every control reward so that failure
  // bootstraps to zero; the logged rewards are unchanged.
  double failure_reward = -2.0;
  // Every robot_eval_interval episodes the greedy robot plays
  // robot_eval_episodes validation episodes (with robot_null_prob drops); the
  // parameters with the longest
  // mean episode so far are returned. 0 disables validation.
  int robot_eval_interval = 1000;
  int robot_eval_episodes = 20;
  // A2C learning rates decay linearly to this fraction of their initial
  // value over the episode budget.
  double lr_final_fraction = 0.1;
  // Rewards are multiplied by these scales before learning (the robot's after
  // the failure shift, the observer's by level) so that returns and critic
  // errors stay O(1). The optimum for a given beta is unchanged.
  double reward_scale_robot = 0.05;
  double reward_scale_a = 0.003;
  double reward_scale_b = 2.0;
  double reward_scale_c = 0.05;

  double reward_scale(CommLevel l) const {
    return l == CommLevel::kA ? reward_scale_a : l == CommLevel::kB ? reward_scale_b : reward_scale_c;
  }

  void validate() const;
};

// One row of the training log.
struct TrainLogRow {
  int episode = 0;
  int length = 0;
  double episode_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double transmit_freq = 0.0;
  double mean_ell = 0.0;
};

using TrainLogger = std::function<void(const TrainLogRow&)>;

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const TrainLogRow& row);

// On-policy A2C with TD(0) advantages on messages at a fixed level.
RobotPolicy train_robot_a2c(const EnvConfig& env, const CodebookEnsemble& ensemble,
                            const PixelProjection* projection,
                            const TrainConfig& cfg,
                            const TrainLogger& log = nullptr,
                            std::optional<RobotPolicy> init = std::nullopt);

// Supervised regression of the normalized state along robot trajectories.
SemanticRegressor train_regressor(const EnvConfig& env,
                                  const CodebookEnsemble& ensemble,
                                  const PixelProjection* projection,
                                  const RobotPolicy& robot,
                                  const TrainConfig& cfg,
                                  const TrainLogger& log = nullptr);

// A2C over {null, 1..V} with the frozen robot acting greedily.
ObserverPolicy train_observer_a2c(const EnvConfig& env,
                                  const CodebookEnsemble& ensemble,
                                  const PixelProjection* projection,
                                  const RobotPolicy& robot,
                                  const SemanticRegressor* regressor,
                                  const TrainConfig& cfg,
                                  const TrainLogger& log = nullptr);

// Critic-based value of information: value after consuming `msg` minus value
// after consuming the null token, both from `prior`.
double estimate_voi(const RobotPolicy& robot, const CodebookEnsemble& ensemble,
                    const Message& msg, const RecurrentState& prior);

}  // namespace dfc
