#include "dfc/agents.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "dfc/error.hpp"
#include "dfc/remote_loop.hpp"

namespace dfc {
namespace {

NetworkSpec make_spec(int input_dim, int outputs, bool value_head, int rh, int mh) {
  NetworkSpec s;
  s.input_dim = input_dim;
  s.recurrent_hidden = rh;
  s.mlp_hidden = mh;
  s.policy_outputs = outputs;
  s.has_value_head = value_head;
  s.validate();
  return s;
}

Checkpoint to_checkpoint(NetworkRole role, std::uint32_t layout, const NetworkSpec& spec,
                         const ParameterSet& params, const AdamState& adam) {
  Checkpoint c;
  c.role = role;
  c.layout_version = layout;
  c.spec = spec;
  c.params = params;
  c.adam = adam;
  return c;
}

Checkpoint load_role(const std::string& path, NetworkRole role, std::uint32_t layout) {
  Checkpoint c = load_checkpoint(path);
  if (c.role != role) fail(ErrorCode::kFormat, "checkpoint has the wrong role: " + path);
  if (c.layout_version != layout) {
    fail(ErrorCode::kFormat, "unsupported input layout version in " + path);
  }
  return c;
}

// Checkpoints record only the input width; F*K is the vector feature width, so
// V follows from it. Compatibility checks compare feature_dim() and V only.
MessageShape shape_from_receiver_dim(int input_dim) {
  MessageShape s;
  s.max_level = input_dim - kVectorFeatureDim - 2;
  require(s.max_level >= 1, "receiver checkpoint input width too small");
  return s;
}

MessageShape shape_from_observer_dim(int input_dim) {
  MessageShape s;
  s.max_level = input_dim - kVectorFeatureDim - 4;
  require(s.max_level >= 1, "observer checkpoint input width too small");
  return s;
}

// One on-policy episode as seen by an actor-critic learner.
struct A2CEpisode {
  std::vector<StepCache> caches;
  std::vector<Eigen::VectorXd> logits;
  std::vector<int> actions;
  std::vector<double> values;
  std::vector<double> rewards;
  double bootstrap_value = 0.0;
};

struct A2CStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

A2CStats a2c_update(ParameterSet& params, const NetworkSpec& spec, AdamState& adam,
                    const std::vector<A2CEpisode>& batch, const TrainConfig& cfg,
                    double lr) {
  size_t total = 0;
  for (const A2CEpisode& ep : batch) total += ep.actions.size();
  A2CStats stats;
  if (total == 0) return stats;
  const double scale = 1.0 / static_cast<double>(total);

  ParameterSet grad(params.size(), 0.0);
  for (const A2CEpisode& ep : batch) {
    const size_t n = ep.actions.size();
    std::vector<OutputGrad> og(n);
    for (size_t t = 0; t < n; ++t) {
      const double next_v = t + 1 < n ? ep.values[t + 1] : ep.bootstrap_value;
      const double advantage = ep.rewards[t] + cfg.gamma * next_v - ep.values[t];
      const Eigen::VectorXd p = softmax(ep.logits[t]);
      const Eigen::ArrayXd log_p = p.array().max(1e-300).log();
      const double h = -(p.array() * log_p).sum();

      Eigen::VectorXd g = advantage * p;
      g[ep.actions[t]] -= advantage;
      g += cfg.entropy_coef * (p.array() * (log_p + h)).matrix();
      og[t].logits = scale * g;
      og[t].value = -2.0 * cfg.value_coef * advantage * scale;

      stats.policy_loss += -advantage * log_p[ep.actions[t]];
      stats.value_loss += advantage * advantage;
      stats.entropy += h;
    }
    backward_tape(params, spec, ep.caches, og, cfg.bptt_window, grad);
  }
  stats.policy_loss *= scale;
  stats.value_loss *= scale;
  stats.entropy *= scale;
  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss)) {
    fail(ErrorCode::kInternal, "A2C loss became non-finite");
  }
  const double norm = clip_grad_norm(grad, cfg.grad_clip);
  if (!std::isfinite(norm)) fail(ErrorCode::kInternal, "A2C gradient became non-finite");
  adam_step(params, grad, adam, lr);
  return stats;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double decay(const TrainConfig& cfg, int episode, int budget) {
  const double progress = budget > 0 ? static_cast<double>(episode) / budget : 0.0;
  return 1.0 - (1.0 - cfg.lr_final_fraction) * std::min(progress, 1.0);
}

// Robot training episode on messages at a fixed level.
A2CEpisode robot_rollout(const RobotPolicy& policy, const EnvConfig& env,
                         const CodebookEnsemble& ensemble,
                         const PixelProjection* projection, int train_level,
                         double null_prob, double failure_reward, double reward_scale,
                         Rng& env_rng,
                         Rng& policy_rng, bool greedy = false) {
  A2CEpisode ep;
  const Codebook& book = ensemble.at(train_level);
  auto message_for = [&](const Observation& obs) {
    const bool drop = null_prob > 0.0 && uniform01(policy_rng) < null_prob;
    return drop ? Message{} : encode(extract_features(obs, projection), book);
  };
  RecurrentState state = RecurrentState::zeros(policy.spec);
  SystemState s = reset(env_rng, env);
  SystemState prev = s;
  for (int t = 0;; ++t) {
    const Observation obs = observe(prev, s, env, env_rng);
    StepCache& cache = ep.caches.emplace_back();
    RobotStep rs = robot_act(policy, message_for(obs), ensemble, state, policy_rng,
                             greedy, &cache);
    const StepResult sr = step(s, rs.action, env, t);
    ep.logits.push_back(std::move(rs.logits));
    ep.actions.push_back(static_cast<int>(rs.action));
    ep.values.push_back(rs.value);
    ep.rewards.push_back(reward_scale * (sr.reward - failure_reward));
    prev = s;
    s = sr.state;
    state = std::move(rs.state);
    if (sr.done) {
      if (is_live(s, env)) {
        const Observation next = observe(prev, s, env, env_rng);
        const auto in = receiver_input(message_for(next), ensemble);
        ep.bootstrap_value = forward(policy.params, policy.spec, in, state).value;
      }
      break;
    }
  }
  return ep;
}

}  // namespace

char level_name(CommLevel level) {
  switch (level) {
    case CommLevel::kA: return 'A';
    case CommLevel::kB: return 'B';
    case CommLevel::kC: return 'C';
  }
  return '?';
}

CommLevel parse_level(const std::string& s) {
  if (s == "A" || s == "a") return CommLevel::kA;
  if (s == "B" || s == "b") return CommLevel::kB;
  if (s == "C" || s == "c") return CommLevel::kC;
  fail(ErrorCode::kInvalidArgument, "level must be one of A, B, C (got '" + s + "')");
}

int receiver_input_dim(const MessageShape& shape) {
  return shape.feature_dim() + shape.max_level + 2;
}

std::vector<double> receiver_input(const Message& msg, const CodebookEnsemble& ensemble) {
  const MessageShape shape = MessageShape::of(ensemble);
  std::vector<double> in(receiver_input_dim(shape), 0.0);
  require(msg.level >= 0 && msg.level <= shape.max_level, "receiver_input: level out of range");
  if (!msg.is_null()) {
    const FeatureVector f = ensemble.standardize(decode(msg, ensemble));
    std::copy(f.begin(), f.end(), in.begin());
  }
  in[shape.feature_dim() + msg.level] = 1.0;
  in.back() = msg.is_null() ? 1.0 : 0.0;
  return in;
}

int observer_input_dim(const MessageShape& shape) {
  return shape.feature_dim() + 2 + shape.max_level + 1 + 1;
}

std::vector<double> observer_input(std::span<const double> features,
                                   std::optional<Action> prev_robot_action,
                                   std::optional<int> prev_level, int aoi,
                                   const MessageShape& shape, bool use_aoi) {
  require(features.size() == static_cast<size_t>(shape.feature_dim()),
          "observer_input: feature dimension mismatch");
  std::vector<double> in(observer_input_dim(shape), 0.0);
  std::copy(features.begin(), features.end(), in.begin());
  size_t off = features.size();
  if (prev_robot_action) in[off + static_cast<int>(*prev_robot_action)] = 1.0;
  off += 2;
  if (prev_level) {
    require(*prev_level >= 0 && *prev_level <= shape.max_level,
            "observer_input: previous level out of range");
    in[off + *prev_level] = 1.0;
  }
  off += shape.max_level + 1;
  in[off] = use_aoi ? std::clamp(aoi / 10.0, 0.0, 1.0) : 0.0;
  return in;
}

RobotPolicy RobotPolicy::create(const MessageShape& shape, Rng& rng, int rh, int mh) {
  RobotPolicy p;
  p.shape = shape;
  p.spec = make_spec(receiver_input_dim(shape), 2, true, rh, mh);
  p.params = init_parameters(p.spec, rng);
  p.adam = AdamState::zeros(p.params.size());
  return p;
}

ObserverPolicy ObserverPolicy::create(const MessageShape& shape, Rng& rng, int rh, int mh) {
  ObserverPolicy p;
  p.shape = shape;
  p.spec = make_spec(observer_input_dim(shape), shape.max_level + 1, true, rh, mh);
  p.params = init_parameters(p.spec, rng);
  p.adam = AdamState::zeros(p.params.size());
  return p;
}

SemanticRegressor SemanticRegressor::create(const MessageShape& shape, Rng& rng, int rh,
                                            int mh) {
  SemanticRegressor p;
  p.shape = shape;
  p.spec = make_spec(receiver_input_dim(shape), 4, false, rh, mh);
  p.params = init_parameters(p.spec, rng);
  p.adam = AdamState::zeros(p.params.size());
  return p;
}

std::array<double, 4> SemanticRegressor::predict(const Message& msg,
                                                 const CodebookEnsemble& ensemble,
                                                 RecurrentState& state) const {
  const ForwardResult r = forward(params, spec, receiver_input(msg, ensemble), state);
  state = r.state;
  return {r.logits[0], r.logits[1], r.logits[2], r.logits[3]};
}

void save_robot(const RobotPolicy& p, const std::string& path) {
  save_checkpoint(to_checkpoint(NetworkRole::kRobot, kReceiverLayoutVersion, p.spec, p.params,
                                p.adam),
                  path);
}

RobotPolicy load_robot(const std::string& path) {
  Checkpoint c = load_role(path, NetworkRole::kRobot, kReceiverLayoutVersion);
  RobotPolicy p;
  p.spec = c.spec;
  p.params = std::move(c.params);
  p.adam = std::move(c.adam);
  p.shape = shape_from_receiver_dim(c.spec.input_dim);
  return p;
}

void save_observer(const ObserverPolicy& p, const std::string& path) {
  save_checkpoint(to_checkpoint(NetworkRole::kObserver, kObserverLayoutVersion, p.spec,
                                p.params, p.adam),
                  path);
}

ObserverPolicy load_observer(const std::string& path) {
  Checkpoint c = load_role(path, NetworkRole::kObserver, kObserverLayoutVersion);
  ObserverPolicy p;
  p.spec = c.spec;
  p.params = std::move(c.params);
  p.adam = std::move(c.adam);
  p.shape = shape_from_observer_dim(c.spec.input_dim);
  return p;
}

void save_regressor(const SemanticRegressor& p, const std::string& path) {
  save_checkpoint(to_checkpoint(NetworkRole::kRegressor, kReceiverLayoutVersion, p.spec,
                                p.params, p.adam),
                  path);
}

SemanticRegressor load_regressor(const std::string& path) {
  Checkpoint c = load_role(path, NetworkRole::kRegressor, kReceiverLayoutVersion);
  SemanticRegressor p;
  p.spec = c.spec;
  p.params = std::move(c.params);
  p.adam = std::move(c.adam);
  p.shape = shape_from_receiver_dim(c.spec.input_dim);
  return p;
}

RobotStep robot_act(const RobotPolicy& policy, const Message& msg,
                    const CodebookEnsemble& ensemble, const RecurrentState& state,
                    Rng& rng, bool greedy, StepCache* cache) {
  const ForwardResult r =
      forward(policy.params, policy.spec, receiver_input(msg, ensemble), state, cache);
  RobotStep out;
  out.action = static_cast<Action>(sample_categorical(r.logits, rng, greedy));
  out.probs = softmax(r.logits);
  out.logits = r.logits;
  out.value = r.value;
  out.state = r.state;
  return out;
}

double observer_reward(CommLevel level, const RewardContext& ctx) {
  require(ctx.message_bytes >= 0.0, "observer_reward: negative message length");
  const double cost = ctx.beta * ctx.message_bytes;
  switch (level) {
    case CommLevel::kA:
      require(ctx.observation != nullptr && ctx.reconstruction != nullptr,
              "observer_reward: level A needs the observation and its reconstruction");
      return distortion_psnr(*ctx.observation, *ctx.reconstruction) - cost;
    case CommLevel::kB:
      require(ctx.observer_estimate.has_value() && ctx.robot_estimate.has_value(),
              "observer_reward: level B needs both state estimates");
      return -distortion_mse(*ctx.observer_estimate, *ctx.robot_estimate) - cost;
    case CommLevel::kC:
      require(ctx.env_reward.has_value(), "observer_reward: level C needs the env reward");
      return *ctx.env_reward - cost;
  }
  fail(ErrorCode::kInvalidArgument, "observer_reward: unknown level");
}

void TrainConfig::validate() const {
  require(std::isfinite(failure_reward), "failure_reward must be finite");
  require(reward_scale_robot > 0.0, "reward_scale_robot must be > 0");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  require(beta >= 0.0, "beta must be non-negative");
  require(robot_lr >= 0.0 && observer_lr >= 0.0 && regressor_lr >= 0.0,
          "learning rates must be non-negative");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(robot_episodes >= 0 && observer_episodes >= 0 && regressor_episodes >= 0,
          "episode budgets must be non-negative");
  require(entropy_coef >= 0.0 && value_coef >= 0.0, "loss coefficients must be non-negative");
  require(grad_clip >= 0.0, "grad_clip must be non-negative");
  require(bptt_window >= 1, "bptt_window must be >= 1");
  require(recurrent_hidden >= 1 && mlp_hidden >= 1, "hidden sizes must be >= 1");
  require(robot_train_level >= 0, "robot_train_level must be >= 0");
  require(robot_null_prob >= 0.0 && robot_null_prob <= 1.0,
          "robot_null_prob must lie in [0, 1]");
  require(regressor_level_mix >= 0.0 && regressor_level_mix <= 1.0,
          "regressor_level_mix must lie in [0, 1]");
  require(reward_scale_a > 0.0 && reward_scale_b > 0.0 && reward_scale_c > 0.0,
          "reward scales must be positive");
  require(lr_final_fraction >= 0.0 && lr_final_fraction <= 1.0,
          "lr_final_fraction must lie in [0, 1]");
  require(robot_eval_interval >= 0 && robot_eval_episodes >= 1,
          "robot_eval_interval must be >= 0 and robot_eval_episodes >= 1");
}

void write_train_log_header(std::ostream& out) {
  out << "episode,length,return,policy_loss,value_loss,entropy,tx_freq,mean_ell\n";
}

void write_train_log_row(std::ostream& out, const TrainLogRow& r) {
  out << r.episode << ',' << r.length << ',' << fmt(r.episode_return) << ','
      << fmt(r.policy_loss) << ',' << fmt(r.value_loss) << ',' << fmt(r.entropy) << ','
      << fmt(r.transmit_freq) << ',' << fmt(r.mean_ell) << '\n';
}

RobotPolicy train_robot_a2c(const EnvConfig& env, const CodebookEnsemble& ensemble,
                            const PixelProjection* projection, const TrainConfig& cfg,
                            const TrainLogger& log, std::optional<RobotPolicy> init) {
  env.validate();
  cfg.validate();
  ensemble.validate();
  const MessageShape shape = MessageShape::of(ensemble);
  const int train_level = cfg.robot_train_level == 0 ? shape.max_level : cfg.robot_train_level;
  require(train_level <= shape.max_level, "robot_train_level exceeds V");

  RobotPolicy policy;
  if (init) {
    policy = std::move(*init);
    require(policy.shape.compatible(shape), "initial robot does not match the ensemble");
  } else {
    Rng init_rng = substream(cfg.seed, "robot.init");
    policy = RobotPolicy::create(shape, init_rng, cfg.recurrent_hidden, cfg.mlp_hidden);
  }
  if (policy.adam.m.size() != policy.params.size()) {
    policy.adam = AdamState::zeros(policy.params.size());
  }
  const double bytes = message_length_bytes(train_level, shape.num_features);

  auto validation_length = [&] {
    double total = 0.0;
    for (int i = 0; i < cfg.robot_eval_episodes; ++i) {
      Rng env_rng = substream(cfg.seed, "robot.validate.env", i);
      Rng policy_rng = substream(cfg.seed, "robot.validate.policy", i);
      total += static_cast<double>(robot_rollout(policy, env, ensemble, projection, train_level,
                                                 cfg.robot_null_prob, cfg.failure_reward, cfg.reward_scale_robot,
                                                 env_rng, policy_rng,
                                                 /*greedy=*/true)
                                       .actions.size());
    }
    return total / cfg.robot_eval_episodes;
  };
  std::optional<ParameterSet> best_params;
  double best_length = -1.0;
  int next_eval = cfg.robot_eval_interval;

  int episode = 0;
  while (episode < cfg.robot_episodes) {
    std::vector<A2CEpisode> batch;
    size_t steps = 0;
    while (steps < static_cast<size_t>(cfg.batch_size) && episode < cfg.robot_episodes) {
      Rng env_rng = substream(cfg.seed, "robot.env", episode);
      Rng policy_rng = substream(cfg.seed, "robot.policy", episode);
      batch.push_back(robot_rollout(policy, env, ensemble, projection, train_level,
                                    cfg.robot_null_prob, cfg.failure_reward, cfg.reward_scale_robot,
                                    env_rng, policy_rng));
      steps += batch.back().actions.size();
      ++episode;
    }
    const A2CStats st = a2c_update(policy.params, policy.spec, policy.adam, batch, cfg,
                                   cfg.robot_lr * decay(cfg, episode, cfg.robot_episodes));
    if (log) {
      int first = episode - static_cast<int>(batch.size());
      for (const A2CEpisode& ep : batch) {
        TrainLogRow row;
        row.episode = first++;
        row.length = static_cast<int>(ep.actions.size());
        for (double r : ep.rewards) {
          row.episode_return += r / cfg.reward_scale_robot + cfg.failure_reward;
        }
        row.policy_loss = st.policy_loss;
        row.value_loss = st.value_loss;
        row.entropy = st.entropy;
        row.transmit_freq = 1.0 - cfg.robot_null_prob;
        row.mean_ell = bytes * (1.0 - cfg.robot_null_prob);
        log(row);
      }
    }
    if (cfg.robot_eval_interval > 0 &&
        (episode >= next_eval || episode == cfg.robot_episodes)) {
      while (next_eval <= episode) next_eval += cfg.robot_eval_interval;
      const double len = validation_length();
      if (len >= best_length) {
        best_length = len;
        best_params = policy.params;
      }
    }
  }
  if (best_params) policy.params = std::move(*best_params);
  return policy;
}

SemanticRegressor train_regressor(const EnvConfig& env, const CodebookEnsemble& ensemble,
                                  const PixelProjection* projection,
                                  const RobotPolicy& robot, const TrainConfig& cfg,
                                  const TrainLogger& log) {
  env.validate();
  cfg.validate();
  const MessageShape shape = MessageShape::of(ensemble);
  require(robot.shape.compatible(shape), "regressor: robot does not match the ensemble");
  Rng init_rng = substream(cfg.seed, "regressor.init");
  SemanticRegressor reg =
      SemanticRegressor::create(shape, init_rng, cfg.recurrent_hidden, cfg.mlp_hidden);
  const Codebook& full = ensemble.at(shape.max_level);

  struct Sequence {
    std::vector<StepCache> caches;
    std::vector<Eigen::VectorXd> outputs;
    std::vector<std::array<double, 4>> targets;
  };

  int episode = 0;
  while (episode < cfg.regressor_episodes) {
    std::vector<Sequence> batch;
    size_t steps = 0;
    while (steps < static_cast<size_t>(cfg.batch_size) && episode < cfg.regressor_episodes) {
      Rng env_rng = substream(cfg.seed, "regressor.env", episode);
      Rng policy_rng = substream(cfg.seed, "regressor.policy", episode);
      Sequence seq;
      RecurrentState rs = RecurrentState::zeros(robot.spec);
      RecurrentState gs = RecurrentState::zeros(reg.spec);
      SystemState s = reset(env_rng, env);
      SystemState prev = s;
      for (int t = 0;; ++t) {
        const Observation obs = observe(prev, s, env, env_rng);
        const FeatureVector f = extract_features(obs, projection);
        const Message robot_msg = encode(f, full);
        int level = shape.max_level;
        if (cfg.regressor_level_mix > 0.0 && uniform01(policy_rng) < cfg.regressor_level_mix) {
          level = std::min(static_cast<int>(uniform01(policy_rng) * (shape.max_level + 1)),
                           shape.max_level);
        }
        const Message reg_msg = level == 0 ? Message{} : encode(f, ensemble.at(level));
        StepCache& cache = seq.caches.emplace_back();
        ForwardResult fr = forward(reg.params, reg.spec, receiver_input(reg_msg, ensemble), gs,
                                   &cache);
        gs = std::move(fr.state);
        seq.outputs.push_back(std::move(fr.logits));
        seq.targets.push_back(normalize(s, env));
        RobotStep step_out = robot_act(robot, robot_msg, ensemble, rs, policy_rng, true);
        const StepResult sr = step(s, step_out.action, env, t);
        rs = std::move(step_out.state);
        prev = s;
        s = sr.state;
        if (sr.done) break;
      }
      steps += seq.caches.size();
      batch.push_back(std::move(seq));
      ++episode;
    }
    const double scale = 1.0 / static_cast<double>(steps);
    ParameterSet grad(reg.params.size(), 0.0);
    double mse = 0.0;
    for (const Sequence& seq : batch) {
      std::vector<OutputGrad> og(seq.caches.size());
      for (size_t t = 0; t < og.size(); ++t) {
        Eigen::VectorXd diff(4);
        for (int i = 0; i < 4; ++i) diff[i] = seq.outputs[t][i] - seq.targets[t][i];
        mse += diff.squaredNorm() / 4.0;
        og[t].logits = (2.0 / 4.0) * scale * diff;
      }
      backward_tape(reg.params, reg.spec, seq.caches, og, cfg.bptt_window, grad);
    }
    mse *= scale;
    if (!std::isfinite(mse)) fail(ErrorCode::kInternal, "regressor loss became non-finite");
    clip_grad_norm(grad, cfg.grad_clip);
    adam_step(reg.params, grad, reg.adam, cfg.regressor_lr);
    if (log) {
      int first = episode - static_cast<int>(batch.size());
      for (const Sequence& seq : batch) {
        TrainLogRow row;
        row.episode = first++;
        row.length = static_cast<int>(seq.caches.size());
        row.value_loss = mse;
        log(row);
      }
    }
  }
  return reg;
}

ObserverPolicy train_observer_a2c(const EnvConfig& env, const CodebookEnsemble& ensemble,
                                  const PixelProjection* projection,
                                  const RobotPolicy& robot,
                                  const SemanticRegressor* regressor,
                                  const TrainConfig& cfg, const TrainLogger& log) {
  env.validate();
  cfg.validate();
  if (cfg.level == CommLevel::kB && regressor == nullptr) {
    fail(ErrorCode::kInvalidArgument, "level B observer training requires a regressor");
  }
  const MessageShape shape = MessageShape::of(ensemble);
  Rng init_rng = substream(cfg.seed, "observer.init");
  ObserverPolicy obs =
      ObserverPolicy::create(shape, init_rng, cfg.recurrent_hidden, cfg.mlp_hidden);
  obs.use_aoi = cfg.observer_aoi_input;

  EpisodeComponents comp;
  comp.env = &env;
  comp.ensemble = &ensemble;
  comp.projection = projection;
  comp.robot = &robot;
  comp.regressor = cfg.level == CommLevel::kB ? regressor : nullptr;
  EpisodeOptions opts;
  opts.reward_level = cfg.level;
  opts.beta = cfg.beta;
  opts.robot_greedy = true;
  opts.failure_reward = cfg.failure_reward;
  opts.reward_scale = cfg.reward_scale(cfg.level);

  int episode = 0;
  while (episode < cfg.observer_episodes) {
    std::vector<A2CEpisode> batch;
    std::vector<TrainLogRow> rows;
    size_t steps = 0;
    while (steps < static_cast<size_t>(cfg.batch_size) && episode < cfg.observer_episodes) {
      Rng env_rng = substream(cfg.seed, "observer.env", episode);
      Rng policy_rng = substream(cfg.seed, "observer.policy", episode);
      ObserverTape tape;
      const EpisodeTrace trace =
          run_episode(comp, LevelSelector::learned(obs), opts, env_rng, policy_rng, &tape);
      A2CEpisode ep;
      ep.caches = std::move(tape.caches);
      ep.logits = std::move(tape.logits);
      ep.actions = std::move(tape.actions);
      ep.values = std::move(tape.values);
      ep.rewards = std::move(tape.rewards);
      ep.bootstrap_value = tape.bootstrap_value;
      steps += ep.actions.size();
      batch.push_back(std::move(ep));

      TrainLogRow row;
      row.episode = episode;
      row.length = static_cast<int>(trace.length());
      int tx = 0;
      for (size_t t = 0; t < trace.length(); ++t) {
        row.episode_return += trace.observer_reward[t];
        row.mean_ell += trace.ell[t];
        tx += trace.level[t] > 0;
      }
      row.transmit_freq = static_cast<double>(tx) / std::max<size_t>(trace.length(), 1);
      row.mean_ell /= static_cast<double>(std::max<size_t>(trace.length(), 1));
      rows.push_back(row);
      ++episode;
    }
    const A2CStats st = a2c_update(obs.params, obs.spec, obs.adam, batch, cfg,
                                   cfg.observer_lr * decay(cfg, episode, cfg.observer_episodes));
    if (log) {
      for (TrainLogRow& row : rows) {
        row.policy_loss = st.policy_loss;
        row.value_loss = st.value_loss;
        row.entropy = st.entropy;
        log(row);
      }
    }
  }
  return obs;
}

double estimate_voi(const RobotPolicy& robot, const CodebookEnsemble& ensemble,
                    const Message& msg, const RecurrentState& prior) {
  if (msg.is_null()) return 0.0;
  const double with =
      forward(robot.params, robot.spec, receiver_input(msg, ensemble), prior).value;
  const double without =
      forward(robot.params, robot.spec, receiver_input(Message{}, ensemble), prior).value;
  return with - without;
}

}  // namespace dfc
