#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dfc/rng.hpp"

namespace dfc {

// Single-layer LSTM (+ReLU) -> dense ReLU layer -> linear output head, with an
// optional scalar value head on the same hidden layer.
struct NetworkSpec {
  int input_dim = 1;
  int recurrent_hidden = 64;
  int mlp_hidden = 128;
  int policy_outputs = 2;
  bool has_value_head = true;

  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

struct LayoutEntry {
  std::string name;
  size_t offset = 0;
  int rows = 0;
  int cols = 0;
  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

// Offsets of each weight block inside the flat parameter array. Matrices are
// column-major (Eigen default).
struct ParameterLayout {
  std::vector<LayoutEntry> entries;
  size_t total = 0;

  static ParameterLayout for_spec(const NetworkSpec& spec);
  const LayoutEntry& find(const std::string& name) const;
};

using ParameterSet = std::vector<double>;

struct RecurrentState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static RecurrentState zeros(const NetworkSpec& spec);
  bool operator==(const RecurrentState& o) const { return h == o.h && c == o.c; }
};

ParameterSet init_parameters(const NetworkSpec& spec, Rng& rng);

// Activations of one forward step, kept for backpropagation.
struct StepCache {
  Eigen::VectorXd input;
  Eigen::VectorXd h_prev, c_prev;
  Eigen::VectorXd gate_i, gate_f, gate_g, gate_o;
  Eigen::VectorXd cell, cell_tanh, hidden;
  Eigen::VectorXd mlp;
};

struct ForwardResult {
  Eigen::VectorXd logits;
  double value = 0.0;
  RecurrentState state;
};

ForwardResult forward(std::span<const double> params, const NetworkSpec& spec,
                      std::span<const double> input,
                      const RecurrentState& state, StepCache* cache = nullptr);

// Loss gradients with respect to the outputs at one step.
struct OutputGrad {
  Eigen::VectorXd logits;  // empty means zero
  double value = 0.0;
};

// Backpropagation through time over a recorded tape. The sequence is split
// into consecutive windows of `window` steps; gradients do not cross window
// boundaries. Accumulates into `grad` (must be sized to the layout).
void backward_tape(std::span<const double> params, const NetworkSpec& spec,
                   const std::vector<StepCache>& tape,
                   const std::vector<OutputGrad>& output_grads, int window,
                   std::span<double> grad);

struct TrajectoryStep {
  std::vector<double> input;
  OutputGrad grad;
};

// Runs the forward pass from `initial` and returns d(sum of per-step
// losses)/d(params), truncated to `window` steps (0 means no truncation).
ParameterSet backward_bptt(std::span<const double> params,
                           const NetworkSpec& spec,
                           const std::vector<TrajectoryStep>& trajectory,
                           const RecurrentState& initial, int window = 32);

using GradientFn = std::function<ParameterSet(
    std::span<const double>, const NetworkSpec&,
    const std::vector<TrajectoryStep>&, const RecurrentState&)>;

struct GradCheckOptions {
  int samples = 200;
  double epsilon = 1e-5;
};

// Max relative error between `gradient_fn` (full BPTT by default) and central
// finite differences of sum_t <grad_t, outputs_t> over a random parameter
// subsample.
double grad_check(std::span<const double> params, const NetworkSpec& spec,
                  const std::vector<TrajectoryStep>& trajectory,
                  const RecurrentState& initial, Rng& rng,
                  const GradCheckOptions& opts = {},
                  GradientFn gradient_fn = nullptr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  static AdamState zeros(size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, double lr, const AdamConfig& cfg = {});

// Scales `grad` in place so that its L2 norm is at most `max_norm`; returns
// the norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
double entropy_bits(const Eigen::VectorXd& probs);
double entropy_nats(const Eigen::VectorXd& probs);

// Sample from softmax(logits); greedy returns argmax, lowest index on ties.
int sample_categorical(const Eigen::VectorXd& logits, Rng& rng, bool greedy = false);

enum class NetworkRole : std::uint32_t {
  kGeneric = 0,
  kRobot = 1,
  kObserver = 2,
  kRegressor = 3,
};

struct Checkpoint {
  NetworkRole role = NetworkRole::kGeneric;
  std::uint32_t layout_version = 1;
  NetworkSpec spec;
  ParameterSet params;
  AdamState adam;
};

// "DFCN" u32 version u32 role u32 layout_version
// u32 input_dim u32 recurrent_hidden u32 mlp_hidden u32 policy_outputs
// u32 has_value_head u64 n f64[n] params i64 adam_t f64[n] m f64[n] v
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dfc
