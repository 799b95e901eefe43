#include "dfc/neural.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dfc/binio.hpp"
#include "dfc/error.hpp"

namespace dfc {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

using ConstMat = Eigen::Map<const Eigen::MatrixXd>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using Mat = Eigen::Map<Eigen::MatrixXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

// Typed views of the weight blocks over a flat buffer.
template <typename Scalar>
struct Views {
  using M = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>,
                                          const Eigen::MatrixXd, Eigen::MatrixXd>>;
  using V = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>,
                                          const Eigen::VectorXd, Eigen::VectorXd>>;
  M w_x, w_h;
  V b;
  M w_mlp;
  V b_mlp;
  M w_out;
  V b_out;
  M w_val;
  V b_val;

  Views(Scalar* base, const NetworkSpec& s)
      : Views(base, s, ParameterLayout::for_spec(s)) {}

  Views(Scalar* base, const NetworkSpec& s, const ParameterLayout& l)
      : w_x(base + l.entries[0].offset, 4 * s.recurrent_hidden, s.input_dim),
        w_h(base + l.entries[1].offset, 4 * s.recurrent_hidden, s.recurrent_hidden),
        b(base + l.entries[2].offset, 4 * s.recurrent_hidden),
        w_mlp(base + l.entries[3].offset, s.mlp_hidden, s.recurrent_hidden),
        b_mlp(base + l.entries[4].offset, s.mlp_hidden),
        w_out(base + l.entries[5].offset, s.policy_outputs, s.mlp_hidden),
        b_out(base + l.entries[6].offset, s.policy_outputs),
        w_val(base + (s.has_value_head ? l.entries[7].offset : 0), s.has_value_head ? 1 : 0,
              s.mlp_hidden),
        b_val(base + (s.has_value_head ? l.entries[8].offset : 0), s.has_value_head ? 1 : 0) {}
};

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

double functional(std::span<const double> params, const NetworkSpec& spec,
                  const std::vector<TrajectoryStep>& traj,
                  const RecurrentState& initial) {
  RecurrentState s = initial;
  double total = 0.0;
  for (const TrajectoryStep& step : traj) {
    ForwardResult r = forward(params, spec, step.input, s);
    if (step.grad.logits.size() > 0) total += step.grad.logits.dot(r.logits);
    total += step.grad.value * r.value;
    s = std::move(r.state);
  }
  return total;
}

}  // namespace

void NetworkSpec::validate() const {
  require(input_dim >= 1 && recurrent_hidden >= 1 && mlp_hidden >= 1 &&
              policy_outputs >= 1,
          "network spec: all dimensions must be >= 1");
}

ParameterLayout ParameterLayout::for_spec(const NetworkSpec& s) {
  s.validate();
  ParameterLayout l;
  auto add = [&l](std::string name, int rows, int cols) {
    LayoutEntry e{std::move(name), l.total, rows, cols};
    l.total += e.size();
    l.entries.push_back(std::move(e));
  };
  const int g = 4 * s.recurrent_hidden;
  add("lstm.w_x", g, s.input_dim);
  add("lstm.w_h", g, s.recurrent_hidden);
  add("lstm.b", g, 1);
  add("mlp.w", s.mlp_hidden, s.recurrent_hidden);
  add("mlp.b", s.mlp_hidden, 1);
  add("out.w", s.policy_outputs, s.mlp_hidden);
  add("out.b", s.policy_outputs, 1);
  if (s.has_value_head) {
    add("value.w", 1, s.mlp_hidden);
    add("value.b", 1, 1);
  }
  return l;
}

const LayoutEntry& ParameterLayout::find(const std::string& name) const {
  for (const LayoutEntry& e : entries) {
    if (e.name == name) return e;
  }
  fail(ErrorCode::kInvalidArgument, "no parameter block named " + name);
}

RecurrentState RecurrentState::zeros(const NetworkSpec& spec) {
  return {Eigen::VectorXd::Zero(spec.recurrent_hidden),
          Eigen::VectorXd::Zero(spec.recurrent_hidden)};
}

ParameterSet init_parameters(const NetworkSpec& spec, Rng& rng) {
  const ParameterLayout layout = ParameterLayout::for_spec(spec);
  ParameterSet p(layout.total, 0.0);
  auto uniform_block = [&](const LayoutEntry& e, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (size_t i = 0; i < e.size(); ++i) {
      p[e.offset + i] = bound * (2.0 * uniform01(rng) - 1.0);
    }
  };
  const int h = spec.recurrent_hidden;
  uniform_block(layout.find("lstm.w_x"), spec.input_dim);
  {
    // Orthogonal recurrent matrix per gate.
    Views<double> v(p.data(), spec, layout);
    for (int gate = 0; gate < 4; ++gate) {
      Eigen::MatrixXd a(h, h);
      for (int j = 0; j < h; ++j) {
        for (int i = 0; i < h; ++i) a(i, j) = normal01(rng);
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(h, h);
      // Fix column signs so Q is unique given A.
      const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
      for (int j = 0; j < h; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
      }
      v.w_h.block(gate * h, 0, h, h) = q;
    }
  }
  uniform_block(layout.find("lstm.b"), h);
  {
    const LayoutEntry& b = layout.find("lstm.b");
    for (int i = 0; i < h; ++i) p[b.offset + h + i] = 1.0;  // forget gate
  }
  uniform_block(layout.find("mlp.w"), h);
  uniform_block(layout.find("mlp.b"), h);
  uniform_block(layout.find("out.w"), spec.mlp_hidden);
  uniform_block(layout.find("out.b"), spec.mlp_hidden);
  if (spec.has_value_head) {
    uniform_block(layout.find("value.w"), spec.mlp_hidden);
    uniform_block(layout.find("value.b"), spec.mlp_hidden);
  }
  return p;
}

ForwardResult forward(std::span<const double> params, const NetworkSpec& spec,
                      std::span<const double> input,
                      const RecurrentState& state, StepCache* cache) {
  require(input.size() == static_cast<size_t>(spec.input_dim),
          "forward: input has " + std::to_string(input.size()) + " values, expected " +
              std::to_string(spec.input_dim));
  require(state.h.size() == spec.recurrent_hidden && state.c.size() == spec.recurrent_hidden,
          "forward: recurrent state shape mismatch");
  const ParameterLayout layout = ParameterLayout::for_spec(spec);
  require(params.size() == layout.total, "forward: parameter count mismatch");
  Views<const double> w(params.data(), spec, layout);
  const int h = spec.recurrent_hidden;

  ConstVec x(input.data(), spec.input_dim);
  Eigen::VectorXd z = w.b;
  z.noalias() += w.w_x * x;
  z.noalias() += w.w_h * state.h;
  Eigen::VectorXd gi = sigmoid(z.segment(0, h));
  Eigen::VectorXd gf = sigmoid(z.segment(h, h));
  Eigen::VectorXd gg = z.segment(2 * h, h).array().tanh().matrix();
  Eigen::VectorXd go = sigmoid(z.segment(3 * h, h));
  Eigen::VectorXd cell = gf.cwiseProduct(state.c) + gi.cwiseProduct(gg);
  Eigen::VectorXd cell_tanh = cell.array().tanh().matrix();
  Eigen::VectorXd hidden = go.cwiseProduct(cell_tanh);
  const Eigen::VectorXd relu_h = hidden.cwiseMax(0.0);

  Eigen::VectorXd mlp = w.b_mlp;
  mlp.noalias() += w.w_mlp * relu_h;
  mlp = mlp.cwiseMax(0.0);

  ForwardResult out;
  out.logits = w.b_out;
  out.logits.noalias() += w.w_out * mlp;
  if (spec.has_value_head) out.value = w.b_val[0] + w.w_val.row(0).dot(mlp);
  out.state.h = hidden;
  out.state.c = cell;

  if (cache != nullptr) {
    cache->input = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->gate_i = std::move(gi);
    cache->gate_f = std::move(gf);
    cache->gate_g = std::move(gg);
    cache->gate_o = std::move(go);
    cache->cell = std::move(cell);
    cache->cell_tanh = std::move(cell_tanh);
    cache->hidden = std::move(hidden);
    cache->mlp = std::move(mlp);
  }
  return out;
}

void backward_tape(std::span<const double> params, const NetworkSpec& spec,
                   const std::vector<StepCache>& tape,
                   const std::vector<OutputGrad>& output_grads, int window,
                   std::span<double> grad) {
  require(tape.size() == output_grads.size(), "backward: tape/grad length mismatch");
  const ParameterLayout layout = ParameterLayout::for_spec(spec);
  require(params.size() == layout.total && grad.size() == layout.total,
          "backward: parameter count mismatch");
  const int n = static_cast<int>(tape.size());
  if (window <= 0) window = std::max(n, 1);
  Views<const double> w(params.data(), spec, layout);
  Views<double> dw(grad.data(), spec, layout);
  const int h = spec.recurrent_hidden;

  Eigen::VectorXd dh_next(h), dc_next(h), dz(4 * h), dmlp(spec.mlp_hidden);
  for (int chunk_end = n; chunk_end > 0; chunk_end -= window) {
    const int chunk_begin = std::max(0, chunk_end - window);
    dh_next.setZero();
    dc_next.setZero();
    for (int t = chunk_end - 1; t >= chunk_begin; --t) {
      const StepCache& c = tape[t];
      const OutputGrad& og = output_grads[t];

      dmlp.setZero();
      if (og.logits.size() > 0) {
        require(og.logits.size() == spec.policy_outputs, "backward: logits grad size");
        dmlp.noalias() += w.w_out.transpose() * og.logits;
        dw.w_out.noalias() += og.logits * c.mlp.transpose();
        dw.b_out += og.logits;
      }
      if (spec.has_value_head && og.value != 0.0) {
        dmlp += og.value * w.w_val.row(0).transpose();
        dw.w_val.row(0) += og.value * c.mlp.transpose();
        dw.b_val[0] += og.value;
      }
      dmlp = (c.mlp.array() > 0.0).select(dmlp, 0.0);
      const Eigen::VectorXd relu_h = c.hidden.cwiseMax(0.0);
      dw.w_mlp.noalias() += dmlp * relu_h.transpose();
      dw.b_mlp += dmlp;
      Eigen::VectorXd dh = w.w_mlp.transpose() * dmlp;
      dh = (c.hidden.array() > 0.0).select(dh, 0.0);
      dh += dh_next;

      const Eigen::ArrayXd d_o = dh.array() * c.cell_tanh.array();
      const Eigen::ArrayXd dc = dh.array() * c.gate_o.array() *
                                    (1.0 - c.cell_tanh.array().square()) +
                                dc_next.array();
      const Eigen::ArrayXd gi = c.gate_i.array(), gf = c.gate_f.array(),
                           gg = c.gate_g.array(), go = c.gate_o.array();
      dz.segment(0, h) = (dc * gg * gi * (1.0 - gi)).matrix();
      dz.segment(h, h) = (dc * c.c_prev.array() * gf * (1.0 - gf)).matrix();
      dz.segment(2 * h, h) = (dc * gi * (1.0 - gg.square())).matrix();
      dz.segment(3 * h, h) = (d_o * go * (1.0 - go)).matrix();

      dw.w_x.noalias() += dz * c.input.transpose();
      dw.w_h.noalias() += dz * c.h_prev.transpose();
      dw.b += dz;
      dh_next.noalias() = w.w_h.transpose() * dz;
      dc_next = (dc * gf).matrix();
    }
  }
}

ParameterSet backward_bptt(std::span<const double> params, const NetworkSpec& spec,
                           const std::vector<TrajectoryStep>& trajectory,
                           const RecurrentState& initial, int window) {
  require(!trajectory.empty(), "backward_bptt: empty trajectory");
  require(window >= 0, "backward_bptt: window must be >= 1 (0 for full)");
  std::vector<StepCache> tape(trajectory.size());
  std::vector<OutputGrad> grads;
  grads.reserve(trajectory.size());
  RecurrentState s = initial;
  for (size_t t = 0; t < trajectory.size(); ++t) {
    s = forward(params, spec, trajectory[t].input, s, &tape[t]).state;
    grads.push_back(trajectory[t].grad);
  }
  ParameterSet g(params.size(), 0.0);
  backward_tape(params, spec, tape, grads, window, g);
  return g;
}

double grad_check(std::span<const double> params, const NetworkSpec& spec,
                  const std::vector<TrajectoryStep>& trajectory,
                  const RecurrentState& initial, Rng& rng,
                  const GradCheckOptions& opts, GradientFn gradient_fn) {
  require(opts.samples >= 1, "grad_check: parameter subsample must be non-empty");
  require(!trajectory.empty(), "grad_check: empty trajectory");
  require(trajectory.size() <= 8, "grad_check: trajectory longer than 8 steps");
  require(opts.epsilon > 0.0, "grad_check: epsilon must be positive");
  const ParameterSet analytic =
      gradient_fn ? gradient_fn(params, spec, trajectory, initial)
                  : backward_bptt(params, spec, trajectory, initial, 0);
  require(analytic.size() == params.size(), "grad_check: gradient size mismatch");

  std::vector<size_t> order(params.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const size_t k = std::min(order.size(), static_cast<size_t>(opts.samples));
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(uniform01(rng) * (order.size() - i));
    std::swap(order[i], order[std::min(j, order.size() - 1)]);
  }

  ParameterSet probe(params.begin(), params.end());
  double worst = 0.0;
  for (size_t s = 0; s < k; ++s) {
    const size_t idx = order[s];
    const double orig = probe[idx];
    probe[idx] = orig + opts.epsilon;
    const double up = functional(probe, spec, trajectory, initial);
    probe[idx] = orig - opts.epsilon;
    const double down = functional(probe, spec, trajectory, initial);
    probe[idx] = orig;
    const double numeric = (up - down) / (2.0 * opts.epsilon);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, double lr, const AdamConfig& cfg) {
  require(grad.size() == params.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          "adam_step: shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

double entropy_nats(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  }
  return h;
}

double entropy_bits(const Eigen::VectorXd& probs) {
  return entropy_nats(probs) / std::log(2.0);
}

int sample_categorical(const Eigen::VectorXd& logits, Rng& rng, bool greedy) {
  require(logits.size() > 0 && logits.allFinite(), "sample_categorical: logits must be finite");
  if (greedy) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    return static_cast<int>(best);
  }
  const Eigen::VectorXd p = softmax(logits);
  double u = uniform01(rng);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    u -= p[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  // Rounding left u marginally positive; fall back to the last non-zero mass.
  for (Eigen::Index i = p.size() - 1; i >= 0; --i) {
    if (p[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const ParameterLayout layout = ParameterLayout::for_spec(ckpt.spec);
  require(ckpt.params.size() == layout.total, "save_checkpoint: parameter count mismatch");
  binio::Writer w(path);
  w.bytes("DFCN", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.role));
  w.u32(ckpt.layout_version);
  w.u32(static_cast<std::uint32_t>(ckpt.spec.input_dim));
  w.u32(static_cast<std::uint32_t>(ckpt.spec.recurrent_hidden));
  w.u32(static_cast<std::uint32_t>(ckpt.spec.mlp_hidden));
  w.u32(static_cast<std::uint32_t>(ckpt.spec.policy_outputs));
  w.u32(ckpt.spec.has_value_head ? 1u : 0u);
  w.u64(ckpt.params.size());
  w.f64s(ckpt.params);
  const AdamState adam = ckpt.adam.m.size() == ckpt.params.size()
                             ? ckpt.adam
                             : AdamState::zeros(ckpt.params.size());
  w.u64(static_cast<std::uint64_t>(adam.t));
  w.f64s(adam.m);
  w.f64s(adam.v);
  w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  binio::Reader r(path);
  r.magic("DFCN");
  if (r.u32() != kCheckpointVersion) fail(ErrorCode::kFormat, "unsupported checkpoint version");
  Checkpoint c;
  c.role = static_cast<NetworkRole>(r.u32());
  c.layout_version = r.u32();
  c.spec.input_dim = static_cast<int>(r.u32());
  c.spec.recurrent_hidden = static_cast<int>(r.u32());
  c.spec.mlp_hidden = static_cast<int>(r.u32());
  c.spec.policy_outputs = static_cast<int>(r.u32());
  c.spec.has_value_head = r.u32() != 0;
  const std::uint64_t n = r.u64();
  if (n != ParameterLayout::for_spec(c.spec).total) {
    fail(ErrorCode::kFormat, "checkpoint parameter count does not match spec: " + path);
  }
  c.params = r.f64s(n);
  c.adam.t = static_cast<std::int64_t>(r.u64());
  c.adam.m = r.f64s(n);
  c.adam.v = r.f64s(n);
  return c;
}

}  // namespace dfc
