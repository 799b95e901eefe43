#include "dfc/remote_loop.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dfc/error.hpp"

namespace dfc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Observation blank_observation(const EnvConfig& env) {
  Observation o;
  o.mode = env.obs_mode;
  if (env.obs_mode == ObsMode::kPixel) {
    o.height = env.frame_height;
    o.width = env.frame_width;
    o.current.assign(static_cast<size_t>(env.frame_height) * env.frame_width, 0.0);
  } else {
    o.current.assign(4, 0.0);
  }
  o.previous = o.current;
  return o;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

int update_aoi(int aoi, bool transmitted) {
  require(aoi >= 0, "update_aoi: negative age");
  return transmitted ? 0 : aoi + 1;
}

void validate_components(const EpisodeComponents& c, const LevelSelector& sel) {
  require(c.env != nullptr && c.ensemble != nullptr && c.robot != nullptr,
          "episode: environment, ensemble and robot are required");
  c.env->validate();
  c.ensemble->validate();
  const MessageShape shape = MessageShape::of(*c.ensemble);
  require(c.robot->spec.input_dim == receiver_input_dim(shape) &&
              c.robot->spec.policy_outputs == 2 && c.robot->spec.has_value_head,
          "episode: robot input width does not match the ensemble");
  if (c.regressor != nullptr) {
    require(c.regressor->spec.input_dim == receiver_input_dim(shape) &&
                c.regressor->spec.policy_outputs == 4,
            "episode: regressor input width does not match the ensemble");
  }
  if (c.env->obs_mode == ObsMode::kPixel) {
    require(c.projection != nullptr, "episode: pixel mode needs a projection");
  }
  require(shape.feature_dim() == kVectorFeatureDim,
          "episode: the feature map produces 8 values; F*K must equal 8");
  if (sel.observer != nullptr) {
    require(sel.observer->spec.input_dim == observer_input_dim(shape) &&
                sel.observer->spec.policy_outputs == shape.max_level + 1,
            "episode: observer input width does not match the ensemble");
  } else {
    require(!sel.pattern.empty(), "episode: fixed selector needs at least one level");
    for (int v : sel.pattern) {
      require(v >= 0 && v <= shape.max_level, "episode: fixed level out of range");
    }
  }
}

EpisodeTrace run_episode(const EpisodeComponents& c, const LevelSelector& sel,
                         const EpisodeOptions& opts, Rng& env_rng, Rng& policy_rng,
                         ObserverTape* tape) {
  validate_components(c, sel);
  if (opts.reward_level == CommLevel::kB) {
    require(c.regressor != nullptr, "episode: level B rewards need a regressor");
  }
  require(tape == nullptr || sel.observer != nullptr, "episode: tape needs a learned observer");
  const EnvConfig& env = *c.env;
  const CodebookEnsemble& ens = *c.ensemble;
  const MessageShape shape = MessageShape::of(ens);

  RecurrentState robot_state = RecurrentState::zeros(c.robot->spec);
  RecurrentState obs_state =
      sel.observer ? RecurrentState::zeros(sel.observer->spec) : RecurrentState{};
  RecurrentState reg_state =
      c.regressor ? RecurrentState::zeros(c.regressor->spec) : RecurrentState{};

  SystemState s = reset(env_rng, env);
  SystemState prev = s;  // first observation repeats the initial state
  int aoi = 0;
  std::optional<Action> prev_action;
  std::optional<int> prev_level;
  Observation recon = blank_observation(env);

  auto observer_forward = [&](const FeatureVector& f, StepCache* cache) {
    const auto in = observer_input(ens.standardize(f), prev_action, prev_level, aoi, shape,
                                   sel.observer->use_aoi);
    return forward(sel.observer->params, sel.observer->spec, in, obs_state, cache);
  };

  EpisodeTrace tr;
  for (int t = 0;; ++t) {
    const Observation obs = observe(prev, s, env, env_rng);
    FeatureVector f = extract_features(obs, c.projection);

    int level = 0;
    double obs_value = kNaN;
    if (sel.observer != nullptr) {
      StepCache* cache = tape ? &tape->caches.emplace_back() : nullptr;
      ForwardResult fr = observer_forward(f, cache);
      level = sample_categorical(fr.logits, policy_rng, sel.greedy);
      obs_value = fr.value;
      obs_state = std::move(fr.state);
      if (tape) {
        tape->logits.push_back(std::move(fr.logits));
        tape->actions.push_back(level);
        tape->values.push_back(obs_value);
      }
    } else {
      level = sel.pattern[static_cast<size_t>(t) % sel.pattern.size()];
    }
    Message msg = level > 0 ? encode(f, ens.at(level)) : Message{};
    const double ell = message_length_bytes(msg, shape.num_features);

    double prior_entropy = kNaN;
    double full_entropy = kNaN;
    double voi = kNaN;
    double null_value = kNaN;
    if (opts.counterfactual) {
      const ForwardResult nr = forward(c.robot->params, c.robot->spec,
                                       receiver_input(Message{}, ens), robot_state);
      prior_entropy = entropy_bits(softmax(nr.logits));
      null_value = nr.value;
      const ForwardResult fr = forward(c.robot->params, c.robot->spec,
                                       receiver_input(encode(f, ens.at(shape.max_level)), ens),
                                       robot_state);
      full_entropy = entropy_bits(softmax(fr.logits));
    }
    RobotStep rs = robot_act(*c.robot, msg, ens, robot_state, policy_rng, opts.robot_greedy);
    if (opts.counterfactual) voi = msg.is_null() ? 0.0 : rs.value - null_value;

    double state_mse = kNaN;
    std::optional<std::array<double, 4>> robot_est, observer_est;
    if (c.regressor != nullptr) {
      robot_est = c.regressor->predict(msg, ens, reg_state);
      observer_est = std::array<double, 4>{f[0], f[1], f[2], f[3]};
      state_mse = distortion_mse(*observer_est, *robot_est);
    }
    if (!msg.is_null()) recon = reconstruct_observation(decode(msg, ens), env);
    const double psnr = distortion_psnr(obs, recon);

    const StepResult sr = step(s, rs.action, env, t);

    RewardContext ctx;
    ctx.message_bytes = ell;
    ctx.beta = opts.beta;
    ctx.observation = &obs;
    ctx.reconstruction = &recon;
    ctx.observer_estimate = observer_est;
    ctx.robot_estimate = robot_est;
    ctx.env_reward = sr.reward;
    const double obs_reward = observer_reward(opts.reward_level, ctx);

    tr.state.push_back(s);
    tr.features.push_back(std::move(f));
    tr.level.push_back(level);
    tr.message.push_back(std::move(msg));
    tr.ell.push_back(ell);
    tr.action.push_back(static_cast<int>(rs.action));
    tr.action_probs.push_back({rs.probs[0], rs.probs[1]});
    tr.env_reward.push_back(sr.reward);
    tr.observer_reward.push_back(obs_reward);
    tr.aoi.push_back(aoi);
    tr.robot_value.push_back(rs.value);
    tr.observer_value.push_back(obs_value);
    tr.robot_entropy.push_back(entropy_bits(rs.probs));
    tr.prior_entropy.push_back(prior_entropy);
    tr.full_entropy.push_back(full_entropy);
    tr.voi.push_back(voi);
    tr.psnr.push_back(psnr);
    tr.state_mse.push_back(state_mse);
    if (tape) {
      const double shifted = opts.reward_level == CommLevel::kC ? obs_reward - opts.failure_reward
                                                                : obs_reward;
      tape->rewards.push_back(opts.reward_scale * shifted);
    }

    aoi = update_aoi(aoi, level > 0);
    prev_action = rs.action;
    prev_level = level;
    robot_state = std::move(rs.state);
    prev = s;
    s = sr.state;

    if (sr.done) {
      tr.terminated = !is_live(s, env);
      if (tape) {
        // Only the control objective ends at failure; the distortion objectives
        // see the end of an episode as a truncation.
        const bool terminal = tr.terminated && opts.reward_level == CommLevel::kC;
        if (!terminal) {
          const Observation next = observe(prev, s, env, env_rng);
          tape->bootstrap_value = observer_forward(extract_features(next, c.projection), nullptr).value;
        }
      }
      break;
    }
  }
  return tr;
}

void write_trace_header(std::ostream& out) {
  out << "episode,t,x,x_dot,psi,psi_dot,level,ell,action,reward,aoi,entropy,value,"
         "prior_entropy,voi,full_entropy\n";
}

void write_trace_rows(std::ostream& out, int episode, const EpisodeTrace& tr) {
  for (size_t t = 0; t < tr.length(); ++t) {
    const SystemState& s = tr.state[t];
    out << episode << ',' << t << ',' << fmt(s.x) << ',' << fmt(s.x_dot) << ','
        << fmt(s.psi) << ',' << fmt(s.psi_dot) << ',' << tr.level[t] << ','
        << fmt(tr.ell[t]) << ',' << tr.action[t] << ',' << fmt(tr.env_reward[t]) << ','
        << tr.aoi[t] << ',' << fmt(tr.robot_entropy[t]) << ',' << fmt(tr.robot_value[t])
        << ',' << fmt(tr.prior_entropy[t]) << ',' << fmt(tr.voi[t]) << ',' << fmt(tr.full_entropy[t]) << '\n';
  }
}

std::vector<EpisodeTrace> read_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "missing trace file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("episode,t,x,", 0) != 0) {
    fail(ErrorCode::kFormat, "trace file has no header: " + path);
  }
  std::vector<EpisodeTrace> out;
  long current = -1;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (v.size() != 16) {
      fail(ErrorCode::kFormat, path + ":" + std::to_string(line_no) + ": expected 16 columns");
    }
    const long ep = static_cast<long>(v[0]);
    if (ep != current) {
      out.emplace_back();
      current = ep;
    }
    EpisodeTrace& tr = out.back();
    tr.state.push_back({v[2], v[3], v[4], v[5]});
    tr.level.push_back(static_cast<int>(v[6]));
    tr.ell.push_back(v[7]);
    tr.action.push_back(static_cast<int>(v[8]));
    tr.env_reward.push_back(v[9]);
    tr.aoi.push_back(static_cast<int>(v[10]));
    tr.robot_entropy.push_back(v[11]);
    tr.robot_value.push_back(v[12]);
    tr.prior_entropy.push_back(v[13]);
    tr.voi.push_back(v[14]);
    tr.full_entropy.push_back(v[15]);
  }
  return out;
}

}  // namespace dfc
