#include "dfc/env.hpp"

#include <cmath>
#include <string>

#include "dfc/error.hpp"

namespace dfc {

void EnvConfig::validate() const {
  require(x_max > 0.0, "x_max must be positive");
  require(psi_max > 0.0 && psi_max < std::numbers::pi / 2.0,
          "psi_max must lie in (0, pi/2)");
  require(time_step > 0.0, "time_step must be positive");
  require(horizon >= 1, "horizon must be >= 1");
  require(init_range >= 0.0, "init_range must be non-negative");
  require(obs_noise_sigma >= 0.0, "obs_noise_sigma must be non-negative");
  require(frame_height >= 4 && frame_width >= 4,
          "frame dimensions must be >= 4");
  require(cart_mass > 0.0 && pole_mass > 0.0 && pole_half_length > 0.0,
          "masses and pole length must be positive");
}

std::array<double, 4> normalize(const SystemState& s, const EnvConfig& cfg) {
  return {s.x / cfg.x_max, s.x_dot / kVelocityScale, s.psi / cfg.psi_max,
          s.psi_dot / kAngularVelocityScale};
}

SystemState denormalize(const std::array<double, 4>& n, const EnvConfig& cfg) {
  return {n[0] * cfg.x_max, n[1] * kVelocityScale, n[2] * cfg.psi_max,
          n[3] * kAngularVelocityScale};
}

bool is_live(const SystemState& s, const EnvConfig& cfg) {
  return std::abs(s.x) <= cfg.x_max && std::abs(s.psi) <= cfg.psi_max;
}

SystemState reset(Rng& rng, const EnvConfig& cfg) {
  std::array<double, 4> a{};
  for (double& v : a) v = cfg.init_range * (2.0 * uniform01(rng) - 1.0);
  return SystemState::from_array(a);
}

StepResult step(const SystemState& state, Action action, const EnvConfig& cfg,
                int steps_taken) {
  require(std::isfinite(state.x) && std::isfinite(state.x_dot) &&
              std::isfinite(state.psi) && std::isfinite(state.psi_dot),
          "step: state is not finite");
  require(is_live(state, cfg), "step: state is not live");

  const double force =
      action == Action::kRight ? cfg.force_magnitude : -cfg.force_magnitude;
  const double total_mass = cfg.cart_mass + cfg.pole_mass;
  const double polemass_length = cfg.pole_mass * cfg.pole_half_length;
  const double cos_psi = std::cos(state.psi);
  const double sin_psi = std::sin(state.psi);

  const double temp =
      (force + polemass_length * state.psi_dot * state.psi_dot * sin_psi) /
      total_mass;
  const double psi_acc =
      (cfg.gravity * sin_psi - cos_psi * temp) /
      (cfg.pole_half_length *
       (4.0 / 3.0 - cfg.pole_mass * cos_psi * cos_psi / total_mass));
  const double x_acc = temp - polemass_length * psi_acc * cos_psi / total_mass;

  StepResult out;
  out.state.x = state.x + cfg.time_step * state.x_dot;
  out.state.x_dot = state.x_dot + cfg.time_step * x_acc;
  out.state.psi = state.psi + cfg.time_step * state.psi_dot;
  out.state.psi_dot = state.psi_dot + cfg.time_step * psi_acc;
  out.reward = reward(out.state, cfg);
  out.done = !is_live(out.state, cfg) || steps_taken + 1 >= cfg.horizon;
  return out;
}

double reward(const SystemState& s, const EnvConfig& cfg) {
  return -std::abs(s.x) / cfg.x_max - std::abs(s.psi) / cfg.psi_max;
}

double observation_range(ObsMode mode) {
  return mode == ObsMode::kVector ? 2.0 : 1.0;
}

std::vector<double> render(const SystemState& s, const EnvConfig& cfg) {
  const int h = cfg.frame_height;
  const int w = cfg.frame_width;
  std::vector<double> frame(static_cast<size_t>(h) * w, 0.0);
  auto set = [&](int row, int col) {
    if (row >= 0 && row < h && col >= 0 && col < w) {
      frame[static_cast<size_t>(row) * w + col] = 1.0;
    }
  };

  // The track spans [-x_max, x_max] across the full width. The pole is drawn
  // at half the frame height so that small angles remain visible.
  const double px_per_m = w / (2.0 * cfg.x_max);
  const double cart_center = (s.x + cfg.x_max) * px_per_m;
  const int cart_top = (3 * h) / 4;
  const int cart_rows = std::max(2, h / 16);
  const double cart_half_width = std::max(2.0, w / 32.0);
  for (int r = cart_top; r < cart_top + cart_rows; ++r) {
    for (int c = static_cast<int>(std::floor(cart_center - cart_half_width));
         c < static_cast<int>(std::ceil(cart_center + cart_half_width)); ++c) {
      set(r, c);
    }
  }

  const double pole_px = 0.5 * h;
  const int samples = static_cast<int>(4 * pole_px);
  for (int i = 0; i <= samples; ++i) {
    const double along = pole_px * i / samples;
    const double col = cart_center + along * std::sin(s.psi);
    const double row = cart_top - along * std::cos(s.psi);
    set(static_cast<int>(std::floor(row)), static_cast<int>(std::floor(col)));
  }
  return frame;
}

Observation observe(const SystemState& prev, const SystemState& curr,
                    const EnvConfig& cfg, Rng& rng) {
  Observation obs;
  obs.mode = cfg.obs_mode;
  if (cfg.obs_mode == ObsMode::kPixel) {
    obs.height = cfg.frame_height;
    obs.width = cfg.frame_width;
    obs.current = render(curr, cfg);
    obs.previous = render(prev, cfg);
    return obs;
  }
  auto noisy = [&](const SystemState& s) {
    const auto n = normalize(s, cfg);
    std::vector<double> out(n.begin(), n.end());
    if (cfg.obs_noise_sigma > 0.0) {
      for (double& v : out) v += cfg.obs_noise_sigma * normal01(rng);
    }
    return out;
  };
  // Previous first so that the draw order is fixed.
  obs.previous = noisy(prev);
  obs.current = noisy(curr);
  return obs;
}

}  // namespace dfc
