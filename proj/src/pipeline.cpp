#include "dfc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "dfc/error.hpp"
#include "dfc/eval.hpp"

namespace dfc {
namespace fs = std::filesystem;
namespace {

std::string path_in(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) fail(ErrorCode::kNotFound, "missing artifact: " + path);
}

void prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) fail(ErrorCode::kInvalidArgument, "cannot create output directory " + cfg.out_dir);
  std::ofstream out(path_in(cfg, artifact::kEffectiveConfig));
  write_config(out, cfg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kInternal, "cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) fail(ErrorCode::kInternal, "write failed: " + path);
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

struct Loaded {
  CodebookEnsemble ensemble;
  std::unique_ptr<PixelProjection> projection;
};

Loaded load_codec(const RunConfig& cfg) {
  Loaded l;
  const std::string books = path_in(cfg, artifact::kCodebooks);
  require_file(books);
  l.ensemble = load_ensemble(books);
  if (l.ensemble.num_features != cfg.codec.num_features || l.ensemble.dim != cfg.codec.dim ||
      l.ensemble.max_level() != cfg.codec.max_level) {
    fail(ErrorCode::kInvalidArgument, books + " does not match codec.num_features/dim/max_level");
  }
  if (cfg.env.obs_mode == ObsMode::kPixel) {
    const std::string proj = path_in(cfg, artifact::kProjection);
    require_file(proj);
    l.projection = std::make_unique<PixelProjection>(load_projection(proj));
  }
  return l;
}

RobotPolicy load_main_robot(const RunConfig& cfg) {
  const std::string p = path_in(cfg, artifact::kRobot);
  require_file(p);
  return load_robot(p);
}

// Progress on stderr every `every` episodes.
TrainLogger progress_logger(std::ofstream& log, const std::string& tag, int every) {
  struct Acc {
    double len = 0.0, ret = 0.0;
    int n = 0;
  };
  auto acc = std::make_shared<Acc>();
  return [&log, tag, every, acc](const TrainLogRow& row) {
    write_train_log_row(log, row);
    acc->len += row.length;
    acc->ret += row.episode_return;
    if (++acc->n == every) {
      std::fprintf(stderr, "%s: episode %d mean length %.1f mean return %.3f\n", tag.c_str(),
                   row.episode + 1, acc->len / every, acc->ret / every);
      *acc = Acc{};
    }
  };
}

EpisodeComponents components(const RunConfig& cfg, const Loaded& codec, const RobotPolicy& robot,
                             const SemanticRegressor* regressor) {
  EpisodeComponents c;
  c.env = &cfg.env;
  c.ensemble = &codec.ensemble;
  c.projection = codec.projection.get();
  c.robot = &robot;
  c.regressor = regressor;
  return c;
}

}  // namespace

std::string beta_tag(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", beta);
  return buf;
}

std::string observer_checkpoint_name(CommLevel level, double beta) {
  return std::string("observer_") + level_name(level) + "_" + beta_tag(beta) + ".ckpt";
}

std::string robot_checkpoint_name(int v, int max_level) {
  if (v == 0 || v == max_level) return artifact::kRobot;
  return "robot_v" + std::to_string(v) + ".ckpt";
}

void run_collect_dataset(const RunConfig& cfg) {
  cfg.validate();
  prepare_out(cfg);
  Rng env_rng = substream(cfg.seed, "dataset.env");
  Rng act_rng = substream(cfg.seed, "dataset.policy");
  std::vector<DatasetRecord> data;
  data.reserve(cfg.codec.dataset_size);
  while (static_cast<int>(data.size()) < cfg.codec.dataset_size) {
    SystemState s = reset(env_rng, cfg.env);
    SystemState prev = s;
    for (int t = 0; static_cast<int>(data.size()) < cfg.codec.dataset_size; ++t) {
      const Observation obs = observe(prev, s, cfg.env, env_rng);
      DatasetRecord r;
      r.prev_true = prev;
      r.curr_true = s;
      if (cfg.env.obs_mode == ObsMode::kVector) {
        std::copy_n(obs.previous.begin(), 4, r.prev_obs.begin());
        std::copy_n(obs.current.begin(), 4, r.curr_obs.begin());
      } else {
        r.prev_obs = normalize(prev, cfg.env);
        r.curr_obs = normalize(s, cfg.env);
      }
      data.push_back(r);
      const Action a = uniform01(act_rng) < 0.5 ? Action::kLeft : Action::kRight;
      const StepResult sr = step(s, a, cfg.env, t);
      prev = s;
      s = sr.state;
      if (sr.done) break;
    }
  }
  save_dataset(data, path_in(cfg, artifact::kDataset));
  std::fprintf(stderr, "collect-dataset: %zu samples\n", data.size());
}

void run_train_codec(const RunConfig& cfg) {
  cfg.validate();
  prepare_out(cfg);
  const std::string dpath = path_in(cfg, artifact::kDataset);
  require_file(dpath);
  const std::vector<DatasetRecord> data = load_dataset(dpath);
  require(data.size() >= 2, "dataset too small");
  const size_t n_hold = std::max<size_t>(1, static_cast<size_t>(data.size() * cfg.codec.holdout_fraction));
  const std::vector<DatasetRecord> train(data.begin(), data.end() - n_hold);
  const std::vector<DatasetRecord> hold(data.end() - n_hold, data.end());

  std::unique_ptr<PixelProjection> proj;
  if (cfg.env.obs_mode == ObsMode::kPixel) {
    proj = std::make_unique<PixelProjection>(
        train_pixel_projection(train, cfg.env, cfg.codec.pixel_pool, cfg.codec.ridge));
    save_projection(*proj, path_in(cfg, artifact::kProjection));
  }
  const auto ftrain = dataset_features(train, cfg.env, proj.get());
  const auto fhold = dataset_features(hold, cfg.env, proj.get());
  Rng rng = substream(cfg.seed, "codec.init");
  LloydOptions lo;
  lo.max_iterations = cfg.codec.lloyd_iterations;
  const CodebookEnsemble ens =
      train_ensemble(ftrain, cfg.codec.num_features, cfg.codec.dim, cfg.codec.max_level, rng, lo);
  save_ensemble(ens, path_in(cfg, artifact::kCodebooks));

  const std::string rpath = path_in(cfg, artifact::kCodecReport);
  std::ofstream rep = open_out(rpath);
  rep << "level,feature,train_mse,holdout_mse,holdout_perplexity\n";
  for (int v = 1; v <= ens.max_level(); ++v) {
    const auto mtr = quantization_mse(ftrain, ens.at(v));
    const auto mho = quantization_mse(fhold, ens.at(v));
    const auto px = usage_perplexity(fhold, ens.at(v));
    for (int f = 0; f < ens.num_features; ++f) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.9g\n", v, f, mtr[f], mho[f], px[f]);
      rep << buf;
    }
  }
  finish(rep, rpath);
  std::fprintf(stderr, "train-codec: %d levels on %zu samples\n", ens.max_level(), train.size());
}

void run_train_robot(const RunConfig& cfg) {
  cfg.validate();
  prepare_out(cfg);
  const Loaded codec = load_codec(cfg);
  const TrainConfig tc = train_config(cfg);
  const std::string name = robot_checkpoint_name(tc.robot_train_level, cfg.codec.max_level);
  const std::string stem = name.substr(0, name.find('.'));
  const std::string lpath = path_in(cfg, stem + "_log.csv");
  std::ofstream log = open_out(lpath);
  write_train_log_header(log);
  const RobotPolicy robot = train_robot_a2c(cfg.env, codec.ensemble, codec.projection.get(), tc,
                                            progress_logger(log, "train-robot", 500));
  finish(log, lpath);
  save_robot(robot, path_in(cfg, name));
}

void run_train_regressor(const RunConfig& cfg) {
  cfg.validate();
  prepare_out(cfg);
  const Loaded codec = load_codec(cfg);
  const RobotPolicy robot = load_main_robot(cfg);
  const std::string lpath = path_in(cfg, "regressor_log.csv");
  std::ofstream log = open_out(lpath);
  write_train_log_header(log);
  const SemanticRegressor reg = train_regressor(cfg.env, codec.ensemble, codec.projection.get(),
                                                robot, train_config(cfg),
                                                progress_logger(log, "train-regressor", 200));
  finish(log, lpath);
  save_regressor(reg, path_in(cfg, artifact::kRegressor));
}

void run_train_observer(const RunConfig& cfg, const ObserverSelection& sel) {
  cfg.validate();
  prepare_out(cfg);
  const Loaded codec = load_codec(cfg);
  const RobotPolicy robot = load_main_robot(cfg);
  std::vector<CommLevel> levels = cfg.observer_levels;
  if (sel.level) levels = {*sel.level};
  std::unique_ptr<SemanticRegressor> reg;
  if (std::find(levels.begin(), levels.end(), CommLevel::kB) != levels.end()) {
    const std::string rp = path_in(cfg, artifact::kRegressor);
    require_file(rp);
    reg = std::make_unique<SemanticRegressor>(load_regressor(rp));
  }
  for (CommLevel level : levels) {
    std::vector<double> betas = cfg.beta_grid(level);
    if (sel.beta) betas = {*sel.beta};
    for (double beta : betas) {
      TrainConfig tc = train_config(cfg);
      tc.level = level;
      tc.beta = beta;
      const std::string name = observer_checkpoint_name(level, beta);
      const std::string stem = name.substr(0, name.size() - 5);
      const std::string lpath = path_in(cfg, stem + "_log.csv");
      std::ofstream log = open_out(lpath);
      write_train_log_header(log);
      const ObserverPolicy obs =
          train_observer_a2c(cfg.env, codec.ensemble, codec.projection.get(), robot, reg.get(),
                             tc, progress_logger(log, "train-observer " + stem, 200));
      finish(log, lpath);
      save_observer(obs, path_in(cfg, name));
    }
  }
}

void run_evaluate(const RunConfig& cfg) {
  cfg.validate();
  const Loaded codec = load_codec(cfg);
  const RobotPolicy robot = load_main_robot(cfg);
  const int V = cfg.codec.max_level;

  // Check every prerequisite before spending time on rollouts.
  std::unique_ptr<SemanticRegressor> reg;
  const std::string rp = path_in(cfg, artifact::kRegressor);
  const bool need_reg = std::find(cfg.observer_levels.begin(), cfg.observer_levels.end(),
                                  CommLevel::kB) != cfg.observer_levels.end();
  if (need_reg) require_file(rp);
  if (fs::exists(rp)) reg = std::make_unique<SemanticRegressor>(load_regressor(rp));
  struct Dynamic {
    CommLevel level;
    double beta;
    ObserverPolicy policy;
  };
  std::vector<Dynamic> dynamic;
  for (CommLevel level : cfg.observer_levels) {
    for (double beta : cfg.beta_grid(level)) {
      const std::string p = path_in(cfg, observer_checkpoint_name(level, beta));
      require_file(p);
      dynamic.push_back({level, beta, load_observer(p)});
    }
  }
  prepare_out(cfg);
  const fs::path trace_dir = fs::path(cfg.out_dir) / artifact::kTraceDir;
  fs::create_directories(trace_dir);

  SuiteOptions so;
  so.episodes = cfg.eval.episodes;
  so.seed = cfg.seed;
  so.keep_traces = cfg.eval.trace_episodes;
  so.bootstrap_resamples = cfg.eval.bootstrap_resamples;
  so.episode.robot_greedy = true;
  so.episode.counterfactual = true;

  std::vector<MetricPoint> points;
  auto save_traces = [&](const std::string& name, const std::vector<EpisodeTrace>& traces) {
    const std::string p = (trace_dir / (name + ".csv")).string();
    std::ofstream out = open_out(p);
    write_trace_header(out);
    for (size_t i = 0; i < traces.size(); ++i) write_trace_rows(out, static_cast<int>(i), traces[i]);
    finish(out, p);
  };
  auto report = [](const MetricPoint& p) {
    std::fprintf(stderr, "evaluate: %s %s beta=%g ell=%.3f len=%.1f [%.1f, %.1f]\n",
                 p.scheme.c_str(), p.level.c_str(), p.beta, p.mean_ell, p.mean_length,
                 p.length_ci_lo, p.length_ci_hi);
  };

  if (cfg.eval.static_sweep) {
    const EpisodeComponents comp = components(cfg, codec, robot, reg.get());
    for (int v = 1; v <= V; ++v) {
      std::vector<EpisodeTrace> traces;
      so.episode.reward_level = CommLevel::kC;
      so.episode.beta = 0.0;
      MetricPoint p = evaluate_suite("noretrain", comp, LevelSelector::fixed(v), so, &traces);
      p.level = std::to_string(v);
      report(p);
      points.push_back(p);
      save_traces("noretrain_" + p.level, traces);
    }
    // Robots retrained at a fixed v, where available.
    bool any = false;
    for (int v = 1; v < V; ++v) {
      const std::string path = path_in(cfg, robot_checkpoint_name(v, V));
      if (!fs::exists(path)) continue;
      any = true;
      const RobotPolicy rv = load_robot(path);
      MetricPoint p = evaluate_suite("static", components(cfg, codec, rv, reg.get()),
                                     LevelSelector::fixed(v), so);
      p.level = std::to_string(v);
      report(p);
      points.push_back(p);
    }
    if (any) {
      MetricPoint p = points[V - 1];
      p.scheme = "static";
      points.push_back(p);
    }
  }

  for (const Dynamic& d : dynamic) {
    const EpisodeComponents comp = components(cfg, codec, robot, reg.get());
    so.episode.reward_level = d.level;
    so.episode.beta = d.beta;
    std::vector<EpisodeTrace> traces;
    MetricPoint p = evaluate_suite("dynamic", comp, LevelSelector::learned(d.policy, false), so,
                                   &traces);
    p.level = std::string(1, level_name(d.level));
    report(p);
    points.push_back(p);
    save_traces(std::string("dynamic_") + p.level + "_" + beta_tag(d.beta), traces);
  }

  const std::string pp = path_in(cfg, artifact::kPareto);
  std::ofstream pareto = open_out(pp);
  write_pareto_header(pareto);
  for (const auto& p : points) write_pareto_row(pareto, p);
  finish(pareto, pp);
  const std::string lp = path_in(cfg, artifact::kLenhist);
  std::ofstream lh = open_out(lp);
  write_lenhist(lh, points, cfg.eval.lenhist_bin, cfg.env.horizon);
  finish(lh, lp);
  const std::string vp = path_in(cfg, artifact::kLevelhist);
  std::ofstream vh = open_out(vp);
  write_levelhist(vh, points);
  finish(vh, vp);
}

void run_analyze(const RunConfig& cfg) {
  cfg.validate();
  const fs::path trace_dir = fs::path(cfg.out_dir) / artifact::kTraceDir;
  std::vector<fs::path> files;
  if (fs::is_directory(trace_dir)) {
    for (const auto& e : fs::directory_iterator(trace_dir))
      if (e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, std::vector<EpisodeTrace>>> sets;
  for (const auto& f : files) {
    auto traces = read_traces(f.string());
    if (!traces.empty()) sets.emplace_back(f.stem().string(), std::move(traces));
  }
  if (sets.empty()) {
    fail(ErrorCode::kNotFound, "no traces found in " + trace_dir.string() + "; run evaluate first");
  }
  prepare_out(cfg);
  const int bins = cfg.eval.heatmap_bins;
  const GridAxis psi = default_axis(StateVar::kPsi, bins);
  const GridAxis xdot = default_axis(StateVar::kXDot, bins);
  const GridAxis psidot = default_axis(StateVar::kPsiDot, bins);

  const std::string ep = path_in(cfg, artifact::kExplain);
  std::ofstream explain = open_out(ep);
  explain << "trace,min_aoi,spearman,bins_present\n";
  for (const auto& [name, traces] : sets) {
    auto write = [&](const std::string& kind, const GridMap& m) {
      const std::string p = path_in(cfg, "heatmap_" + kind + "_" + name + ".csv");
      std::ofstream out = open_out(p);
      write_heatmap(out, m);
      finish(out, p);
    };
    write("entropy_psi_xdot", entropy_map(traces, psi, xdot, cfg.eval.min_count));
    write("entropy_psi_psidot", entropy_map(traces, psi, psidot, cfg.eval.min_count));
    write("bitrate_psi_xdot", bitrate_map(traces, psi, xdot, cfg.eval.min_count));
    write("bitrate_psi_psidot", bitrate_map(traces, psi, psidot, cfg.eval.min_count));

    const std::string ap = path_in(cfg, "aoi_dist_" + name + ".csv");
    std::ofstream aoi = open_out(ap);
    write_aoi_dist(aoi, aoi_action_distribution(traces, cfg.eval.entropy_bins,
                                                cfg.codec.max_level));
    finish(aoi, ap);

    const auto tx = transmit_prob_by_entropy(traces, cfg.eval.entropy_bins, 2, cfg.eval.min_count);
    std::vector<double> idx(tx.size());
    int present = 0;
    for (size_t b = 0; b < tx.size(); ++b) {
      idx[b] = static_cast<double>(b);
      present += !std::isnan(tx[b]);
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", spearman(idx, tx));
    explain << name << ",2," << (std::isnan(spearman(idx, tx)) ? "nan" : buf) << ',' << present
            << '\n';
  }
  finish(explain, ep);
}

void run_subcommand(const std::string& name, const RunConfig& cfg, const ObserverSelection& sel) {
  if (name == "collect-dataset") return run_collect_dataset(cfg);
  if (name == "train-codec") return run_train_codec(cfg);
  if (name == "train-robot") return run_train_robot(cfg);
  if (name == "train-regressor") return run_train_regressor(cfg);
  if (name == "train-observer") return run_train_observer(cfg, sel);
  if (name == "evaluate") return run_evaluate(cfg);
  if (name == "analyze") return run_analyze(cfg);
  fail(ErrorCode::kInvalidArgument, "unknown subcommand: " + name);
}

}  // namespace dfc
