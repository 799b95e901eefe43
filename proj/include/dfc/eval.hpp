#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dfc/remote_loop.hpp"

namespace dfc {

struct MetricPoint {
  std::string scheme;
  double beta = 0.0;
  std::string level;  // "1".."V" for static schemes, "A"/"B"/"C" for dynamic ones
  double mean_ell = 0.0;
  double mean_length = 0.0;
  double length_ci_lo = 0.0;  // bootstrap 95%
  double length_ci_hi = 0.0;
  double psnr = 0.0;
  double state_mse = 0.0;  // NaN without a regressor
  double rmsd_psi = 0.0;
  double rmsd_x = 0.0;
  std::vector<double> level_freq;  // over {null, 1..V}
  std::vector<int> lengths;
};

struct SuiteOptions {
  int episodes = 1000;
  std::uint64_t seed = 1;
  EpisodeOptions episode;
  // Number of leading episodes whose traces are kept.
  int keep_traces = 0;
  int bootstrap_resamples = 1000;
};

// Episode i uses substreams ("eval.env", i) and ("eval.policy", i) so every
// scheme faces the same initial states and observation noise.
MetricPoint evaluate_suite(const std::string& scheme, const EpisodeComponents& components,
                           const LevelSelector& selector, const SuiteOptions& opts,
                           std::vector<EpisodeTrace>* traces = nullptr);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap of the mean.
Interval bootstrap_mean_ci(std::span<const double> xs, int resamples, Rng& rng,
                           double confidence = 0.95);

// All coordinates larger-is-better.
bool pareto_dominates(std::span<const double> eta, std::span<const double> eta_prime);
// Indices of the non-dominated points, in input order.
std::vector<size_t> pareto_front(const std::vector<std::vector<double>>& points);

double rmsd(std::span<const double> series, double target);

enum class StateVar { kX, kXDot, kPsi, kPsiDot };
StateVar parse_state_var(const std::string& s);
const char* state_var_name(StateVar v);

struct GridAxis {
  StateVar var = StateVar::kPsi;
  double lo = -1.0;
  double hi = 1.0;
  int bins = 20;
};

struct GridMap {
  GridAxis x;
  GridAxis y;
  std::vector<double> value;  // NaN where absent; index ix * y.bins + iy
  std::vector<int> count;

  double at(int ix, int iy) const { return value[static_cast<size_t>(ix) * y.bins + iy]; }
  int count_at(int ix, int iy) const { return count[static_cast<size_t>(ix) * y.bins + iy]; }
};

GridAxis default_axis(StateVar v, int bins = 20);

// Binary entropy (bits) of the empirical robot-action frequency per cell.
GridMap entropy_map(const std::vector<EpisodeTrace>& traces, const GridAxis& x,
                    const GridAxis& y, int min_count = 20);
// Mean message length (bytes) per cell.
GridMap bitrate_map(const std::vector<EpisodeTrace>& traces, const GridAxis& x,
                    const GridAxis& y, int min_count = 20);

// prob[aoi][entropy_bin][ell] for aoi in 0..max_aoi and ell in 0..V. Entropy
// is the robot's action entropy had it received the finest message, a measure
// of how hard the current state is for the robot (falls back to the
// post-message entropy when a trace carries no counterfactual). Absent columns
// hold NaN.
struct AoiDistribution {
  int max_aoi = 4;
  int entropy_bins = 10;
  int max_level = 6;
  std::vector<double> prob;
  std::vector<int> count;  // per (aoi, entropy_bin)

  double at(int aoi, int bin, int ell) const {
    return prob[(static_cast<size_t>(aoi) * entropy_bins + bin) * (max_level + 1) + ell];
  }
  int column_count(int aoi, int bin) const {
    return count[static_cast<size_t>(aoi) * entropy_bins + bin];
  }
};

AoiDistribution aoi_action_distribution(const std::vector<EpisodeTrace>& traces,
                                        int entropy_bins, int max_level, int max_aoi = 4);

// Transmit probability per entropy bin over steps with AoI >= min_aoi; NaN
// for bins with fewer than min_count steps.
std::vector<double> transmit_prob_by_entropy(const std::vector<EpisodeTrace>& traces,
                                             int entropy_bins, int min_aoi,
                                             int min_count = 20);

// Average ranks for ties; NaN entries are skipped pairwise.
double spearman(std::span<const double> a, std::span<const double> b);

// CSV exports.
void write_pareto_header(std::ostream& out);
void write_pareto_row(std::ostream& out, const MetricPoint& p);
void write_lenhist(std::ostream& out, const std::vector<MetricPoint>& points, int bin_width,
                   int horizon);
void write_levelhist(std::ostream& out, const std::vector<MetricPoint>& points);
void write_heatmap(std::ostream& out, const GridMap& map);
void write_aoi_dist(std::ostream& out, const AoiDistribution& d);

struct ParetoRow {
  std::string scheme;
  double beta = 0.0;
  std::string level;
  double ell = 0.0;
  double ep_len = 0.0;
  double psnr = 0.0;
  double state_mse = 0.0;
  double rmsd_psi = 0.0;
  double rmsd_x = 0.0;
  double ep_len_lo = 0.0;
  double ep_len_hi = 0.0;
  double null_freq = 0.0;
};
std::vector<ParetoRow> read_pareto(const std::string& path);

}  // namespace dfc
