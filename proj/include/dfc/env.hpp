#pragma once

#include <array>
#include <numbers>
#include <vector>

#include "dfc/rng.hpp"

namespace dfc {

struct SystemState {
  double x = 0.0;
  double x_dot = 0.0;
  double psi = 0.0;
  double psi_dot = 0.0;

  std::array<double, 4> as_array() const { return {x, x_dot, psi, psi_dot}; }
  static SystemState from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }
  bool operator==(const SystemState&) const = default;
};

enum class Action : int { kLeft = 0, kRight = 1 };

enum class ObsMode { kVector, kPixel };

struct EnvConfig {
  double x_max = 4.8;
  double psi_max = 2.0 * std::numbers::pi / 15.0;
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force_magnitude = 10.0;
  double time_step = 0.02;
  int horizon = 500;
  double init_range = 0.05;
  ObsMode obs_mode = ObsMode::kVector;
  double obs_noise_sigma = 0.01;
  int frame_height = 40;
  int frame_width = 80;

  // Throws on violated invariants.
  void validate() const;
};

// Scales mapping physical quantities onto roughly [-1, 1].
inline constexpr double kVelocityScale = 2.0;
inline constexpr double kAngularVelocityScale = 3.0;

std::array<double, 4> normalize(const SystemState& s, const EnvConfig& cfg);
SystemState denormalize(const std::array<double, 4>& n, const EnvConfig& cfg);

bool is_live(const SystemState& s, const EnvConfig& cfg);

SystemState reset(Rng& rng, const EnvConfig& cfg);

struct StepResult {
  SystemState state;
  double reward = 0.0;
  bool done = false;
};

// One explicit-Euler step of the cart-pole equations of motion.
// `steps_taken` is the number of steps already elapsed in the episode; the
// step that reaches the horizon reports done.
StepResult step(const SystemState& state, Action action, const EnvConfig& cfg,
                int steps_taken = 0);

// -|x|/x_max - |psi|/psi_max
double reward(const SystemState& s, const EnvConfig& cfg);

// Two snapshots: normalized noisy state vectors (vector mode) or binary
// frames stored row-major as 0/1 (pixel mode).
struct Observation {
  ObsMode mode = ObsMode::kVector;
  int height = 0;  // pixel mode only
  int width = 0;
  std::vector<double> current;
  std::vector<double> previous;
};

// Peak-to-peak range of one observation entry, used as the PSNR peak.
double observation_range(ObsMode mode);

Observation observe(const SystemState& prev, const SystemState& curr,
                    const EnvConfig& cfg, Rng& rng);

// Binary rendering of the cart and pole, row 0 at the top.
std::vector<double> render(const SystemState& s, const EnvConfig& cfg);

}  // namespace dfc
