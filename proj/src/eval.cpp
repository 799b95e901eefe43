#include "dfc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dfc/error.hpp"

namespace dfc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double mean_finite(const std::vector<double>& xs) {
  double s = 0.0;
  size_t n = 0;
  for (double x : xs) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : kNaN;
}

double state_component(const SystemState& s, StateVar v) {
  switch (v) {
    case StateVar::kX: return s.x;
    case StateVar::kXDot: return s.x_dot;
    case StateVar::kPsi: return s.psi;
    case StateVar::kPsiDot: return s.psi_dot;
  }
  return 0.0;
}

int bin_of(double v, double lo, double hi, int bins) {
  if (!(v >= lo) || !(v <= hi)) return -1;
  int b = static_cast<int>((v - lo) / (hi - lo) * bins);
  return std::min(b, bins - 1);
}

void check_axis(const GridAxis& a) {
  require(a.bins >= 1 && a.hi > a.lo, "grid axis needs bins >= 1 and hi > lo");
}

double binary_entropy(double p) {
  double h = 0.0;
  for (double q : {p, 1.0 - p}) {
    if (q > 0.0) h -= q * std::log2(q);
  }
  return h;
}

// Accumulates (sum, n) per cell, then turns cells below min_count into NaN.
template <typename F>
GridMap grid_reduce(const std::vector<EpisodeTrace>& traces, const GridAxis& x,
                    const GridAxis& y, int min_count, F value_of) {
  check_axis(x);
  check_axis(y);
  require(min_count >= 1, "min_count must be >= 1");
  GridMap m{x, y, {}, {}};
  const size_t cells = static_cast<size_t>(x.bins) * y.bins;
  std::vector<double> sum(cells, 0.0);
  m.count.assign(cells, 0);
  for (const auto& tr : traces) {
    for (size_t t = 0; t < tr.length(); ++t) {
      const int ix = bin_of(state_component(tr.state[t], x.var), x.lo, x.hi, x.bins);
      const int iy = bin_of(state_component(tr.state[t], y.var), y.lo, y.hi, y.bins);
      if (ix < 0 || iy < 0) continue;
      const size_t c = static_cast<size_t>(ix) * y.bins + iy;
      sum[c] += value_of(tr, t);
      ++m.count[c];
    }
  }
  m.value.assign(cells, kNaN);
  for (size_t c = 0; c < cells; ++c) {
    if (m.count[c] >= min_count) m.value[c] = sum[c] / m.count[c];
  }
  return m;
}

double decision_entropy(const EpisodeTrace& tr, size_t t) {
  if (t < tr.full_entropy.size() && std::isfinite(tr.full_entropy[t])) return tr.full_entropy[t];
  return tr.robot_entropy[t];
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

MetricPoint evaluate_suite(const std::string& scheme, const EpisodeComponents& c,
                           const LevelSelector& sel, const SuiteOptions& opts,
                           std::vector<EpisodeTrace>* traces) {
  require(opts.episodes >= 1, "evaluate_suite: episodes must be >= 1");
  validate_components(c, sel);
  const int V = c.ensemble->max_level();
  MetricPoint p;
  p.scheme = scheme;
  p.beta = opts.episode.beta;
  p.level_freq.assign(V + 1, 0.0);

  std::vector<double> ell, len, psnr, mse, rpsi, rx;
  size_t total_steps = 0;
  for (int i = 0; i < opts.episodes; ++i) {
    Rng env_rng = substream(opts.seed, "eval.env", i);
    Rng pol_rng = substream(opts.seed, "eval.policy", i);
    EpisodeTrace tr = run_episode(c, sel, opts.episode, env_rng, pol_rng);
    const size_t n = tr.length();
    total_steps += n;
    len.push_back(static_cast<double>(n));
    p.lengths.push_back(static_cast<int>(n));
    ell.push_back(std::accumulate(tr.ell.begin(), tr.ell.end(), 0.0));
    psnr.push_back(mean_finite(tr.psnr));
    mse.push_back(mean_finite(tr.state_mse));
    std::vector<double> psi(n), x(n);
    for (size_t t = 0; t < n; ++t) {
      psi[t] = tr.state[t].psi;
      x[t] = tr.state[t].x;
      p.level_freq[tr.level[t]] += 1.0;
    }
    rpsi.push_back(rmsd(psi, 0.0));
    rx.push_back(rmsd(x, 0.0));
    if (traces && i < opts.keep_traces) traces->push_back(std::move(tr));
  }
  // Bytes are averaged per step over the whole suite.
  p.mean_ell = std::accumulate(ell.begin(), ell.end(), 0.0) / static_cast<double>(total_steps);
  for (double& f : p.level_freq) f /= static_cast<double>(total_steps);
  p.mean_length = mean_finite(len);
  p.psnr = mean_finite(psnr);
  p.state_mse = mean_finite(mse);
  p.rmsd_psi = mean_finite(rpsi);
  p.rmsd_x = mean_finite(rx);
  Rng boot = substream(opts.seed, "eval.bootstrap", 0);
  const Interval ci = bootstrap_mean_ci(len, opts.bootstrap_resamples, boot);
  p.length_ci_lo = ci.lo;
  p.length_ci_hi = ci.hi;
  return p;
}

Interval bootstrap_mean_ci(std::span<const double> xs, int resamples, Rng& rng,
                           double confidence) {
  require(!xs.empty(), "bootstrap: empty sample");
  require(resamples >= 1, "bootstrap: resamples must be >= 1");
  require(confidence > 0.0 && confidence < 1.0, "bootstrap: confidence in (0, 1)");
  std::vector<double> means(resamples);
  const size_t n = xs.size();
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
      size_t j = static_cast<size_t>(uniform01(rng) * static_cast<double>(n));
      s += xs[std::min(j, n - 1)];
    }
    means[r] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double a = 0.5 * (1.0 - confidence);
  auto q = [&](double p) {
    const double pos = p * (resamples - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - lo) * (means[hi] - means[lo]);
  };
  return {q(a), q(1.0 - a)};
}

bool pareto_dominates(std::span<const double> eta, std::span<const double> eta_prime) {
  require(eta.size() == eta_prime.size(), "pareto_dominates: arity mismatch");
  bool strict = false;
  for (size_t i = 0; i < eta.size(); ++i) {
    if (eta[i] < eta_prime[i]) return false;
    if (eta[i] > eta_prime[i]) strict = true;
  }
  return strict;
}

std::vector<size_t> pareto_front(const std::vector<std::vector<double>>& points) {
  if (points.empty()) return {};
  const size_t d = points[0].size();
  for (const auto& p : points) require(p.size() == d, "pareto_front: arity mismatch");
  // Sweep in lexicographically descending order: a point can only be
  // dominated by one that sorts before it.
  std::vector<size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return points[a] > points[b]; });
  std::vector<size_t> front;
  std::vector<char> keep(points.size(), 0);
  for (size_t i : order) {
    bool dominated = false;
    for (size_t j : front) {
      if (pareto_dominates(points[j], points[i])) {
        dominated = true;
        break;
      }
    }
    if (!dominated) {
      front.push_back(i);
      keep[i] = 1;
    }
  }
  std::vector<size_t> out;
  for (size_t i = 0; i < points.size(); ++i)
    if (keep[i]) out.push_back(i);
  return out;
}

double rmsd(std::span<const double> series, double target) {
  require(!series.empty(), "rmsd: empty series");
  double s = 0.0;
  for (double x : series) s += (x - target) * (x - target);
  return std::sqrt(s / static_cast<double>(series.size()));
}

StateVar parse_state_var(const std::string& s) {
  if (s == "x") return StateVar::kX;
  if (s == "x_dot") return StateVar::kXDot;
  if (s == "psi") return StateVar::kPsi;
  if (s == "psi_dot") return StateVar::kPsiDot;
  fail(ErrorCode::kInvalidArgument, "unknown state variable: " + s);
}

const char* state_var_name(StateVar v) {
  switch (v) {
    case StateVar::kX: return "x";
    case StateVar::kXDot: return "x_dot";
    case StateVar::kPsi: return "psi";
    case StateVar::kPsiDot: return "psi_dot";
  }
  return "?";
}

GridAxis default_axis(StateVar v, int bins) {
  switch (v) {
    case StateVar::kX: return {v, -2.4, 2.4, bins};
    case StateVar::kXDot: return {v, -1.97, 1.97, bins};
    case StateVar::kPsi: return {v, -0.2, 0.2, bins};
    case StateVar::kPsiDot: return {v, -1.67, 1.67, bins};
  }
  return {v, -1.0, 1.0, bins};
}

GridMap entropy_map(const std::vector<EpisodeTrace>& traces, const GridAxis& x,
                    const GridAxis& y, int min_count) {
  GridMap m = grid_reduce(traces, x, y, min_count,
                          [](const EpisodeTrace& tr, size_t t) { return double(tr.action[t]); });
  // The cell mean of the action index is the frequency of Right.
  for (double& v : m.value)
    if (!std::isnan(v)) v = binary_entropy(v);
  return m;
}

GridMap bitrate_map(const std::vector<EpisodeTrace>& traces, const GridAxis& x,
                    const GridAxis& y, int min_count) {
  return grid_reduce(traces, x, y, min_count,
                     [](const EpisodeTrace& tr, size_t t) { return tr.ell[t]; });
}

AoiDistribution aoi_action_distribution(const std::vector<EpisodeTrace>& traces,
                                        int entropy_bins, int max_level, int max_aoi) {
  require(entropy_bins >= 1 && max_level >= 0 && max_aoi >= 0,
          "aoi_action_distribution: bad dimensions");
  AoiDistribution d;
  d.max_aoi = max_aoi;
  d.entropy_bins = entropy_bins;
  d.max_level = max_level;
  const size_t cols = static_cast<size_t>(max_aoi + 1) * entropy_bins;
  d.count.assign(cols, 0);
  d.prob.assign(cols * (max_level + 1), 0.0);
  for (const auto& tr : traces) {
    for (size_t t = 0; t < tr.length(); ++t) {
      const int aoi = tr.aoi[t];
      if (aoi > max_aoi) continue;
      const int b = bin_of(decision_entropy(tr, t), 0.0, 1.0, entropy_bins);
      require(tr.level[t] >= 0 && tr.level[t] <= max_level,
              "aoi_action_distribution: level out of range");
      if (b < 0) continue;
      const size_t col = static_cast<size_t>(aoi) * entropy_bins + b;
      ++d.count[col];
      d.prob[col * (max_level + 1) + tr.level[t]] += 1.0;
    }
  }
  for (size_t col = 0; col < cols; ++col) {
    for (int l = 0; l <= max_level; ++l) {
      double& p = d.prob[col * (max_level + 1) + l];
      p = d.count[col] ? p / d.count[col] : kNaN;
    }
  }
  return d;
}

std::vector<double> transmit_prob_by_entropy(const std::vector<EpisodeTrace>& traces,
                                             int entropy_bins, int min_aoi, int min_count) {
  require(entropy_bins >= 1, "transmit_prob_by_entropy: entropy_bins must be >= 1");
  std::vector<double> tx(entropy_bins, 0.0), n(entropy_bins, 0.0);
  for (const auto& tr : traces) {
    for (size_t t = 0; t < tr.length(); ++t) {
      if (tr.aoi[t] < min_aoi) continue;
      const int b = bin_of(decision_entropy(tr, t), 0.0, 1.0, entropy_bins);
      if (b < 0) continue;
      n[b] += 1.0;
      if (tr.level[t] > 0) tx[b] += 1.0;
    }
  }
  std::vector<double> out(entropy_bins, kNaN);
  for (int b = 0; b < entropy_bins; ++b)
    if (n[b] >= min_count) out[b] = tx[b] / n[b];
  return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "spearman: length mismatch");
  std::vector<double> x, y;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    x.push_back(a[i]);
    y.push_back(b[i]);
  }
  if (x.size() < 2) return kNaN;
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return sxy / std::sqrt(sxx * syy);
}

void write_pareto_header(std::ostream& out) {
  out << "scheme,beta,level,ell,ep_len,psnr,state_mse,rmsd_psi,rmsd_x,ep_len_lo,ep_len_hi,"
         "null_freq\n";
}

void write_pareto_row(std::ostream& out, const MetricPoint& p) {
  out << p.scheme << ',' << fmt(p.beta) << ',' << p.level << ',' << fmt(p.mean_ell) << ','
      << fmt(p.mean_length) << ',' << fmt(p.psnr) << ',' << fmt(p.state_mse) << ','
      << fmt(p.rmsd_psi) << ',' << fmt(p.rmsd_x) << ',' << fmt(p.length_ci_lo) << ','
      << fmt(p.length_ci_hi) << ',' << fmt(p.level_freq.empty() ? kNaN : p.level_freq[0])
      << '\n';
}

void write_lenhist(std::ostream& out, const std::vector<MetricPoint>& points, int bin_width,
                   int horizon) {
  require(bin_width >= 1 && horizon >= 1, "lenhist: bad bin width");
  out << "scheme,beta,level,bin_lo,bin_hi,count\n";
  const int nb = (horizon + bin_width - 1) / bin_width;
  for (const auto& p : points) {
    std::vector<int> c(nb, 0);
    for (int l : p.lengths) c[std::clamp((l - 1) / bin_width, 0, nb - 1)]++;
    for (int b = 0; b < nb; ++b) {
      out << p.scheme << ',' << fmt(p.beta) << ',' << p.level << ',' << b * bin_width + 1 << ','
          << std::min((b + 1) * bin_width, horizon) << ',' << c[b] << '\n';
    }
  }
}

void write_levelhist(std::ostream& out, const std::vector<MetricPoint>& points) {
  out << "scheme,beta,level,ell,freq\n";
  for (const auto& p : points) {
    for (size_t v = 0; v < p.level_freq.size(); ++v) {
      out << p.scheme << ',' << fmt(p.beta) << ',' << p.level << ',' << v << ','
          << fmt(p.level_freq[v]) << '\n';
    }
  }
}

void write_heatmap(std::ostream& out, const GridMap& m) {
  out << "x_bin,y_bin,value,count\n";
  for (int ix = 0; ix < m.x.bins; ++ix)
    for (int iy = 0; iy < m.y.bins; ++iy)
      out << ix << ',' << iy << ',' << fmt(m.at(ix, iy)) << ',' << m.count_at(ix, iy) << '\n';
}

void write_aoi_dist(std::ostream& out, const AoiDistribution& d) {
  out << "aoi,entropy_bin,ell,prob\n";
  for (int a = 0; a <= d.max_aoi; ++a)
    for (int b = 0; b < d.entropy_bins; ++b)
      for (int l = 0; l <= d.max_level; ++l)
        out << a << ',' << b << ',' << l << ',' << fmt(d.at(a, b, l)) << '\n';
}

std::vector<ParetoRow> read_pareto(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "missing file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("scheme,beta,level,ell,ep_len", 0) != 0)
    fail(ErrorCode::kFormat, "not a pareto table: " + path);
  std::vector<ParetoRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 12) fail(ErrorCode::kFormat, "pareto row has wrong arity: " + line);
    auto num = [&](int i) { return std::strtod(f[i].c_str(), nullptr); };
    rows.push_back({f[0], num(1), f[2], num(3), num(4), num(5), num(6), num(7), num(8), num(9),
                    num(10), num(11)});
  }
  return rows;
}

}  // namespace dfc
