#include "dfc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "dfc/error.hpp"

namespace dfc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) fail(ErrorCode::kInvalidArgument, key + ": not a number: '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) fail(ErrorCode::kInvalidArgument, key + ": not an integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::kInvalidArgument, key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename M>
Field real(const char* key, M member) {
  return {key, [=](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [=](RunConfig& c, const std::string& v) { member(c) = to_double(key, v); }};
}

template <typename M>
Field integer(const char* key, M member) {
  return {key, [=](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [=](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(member(c))>;
            const long long x = to_int(key, v);
            if constexpr (std::is_unsigned_v<T>) {
              if (x < 0) fail(ErrorCode::kInvalidArgument, std::string(key) + ": must be >= 0");
            }
            member(c) = static_cast<T>(x);
          }};
}

template <typename M>
Field boolean(const char* key, M member) {
  return {key, [=](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [=](RunConfig& c, const std::string& v) { member(c) = to_bool(key, v); }};
}

Field grid(const char* key, std::vector<double> RunConfig::*member) {
  return {key,
          [=](const RunConfig& c) {
            std::string s;
            for (double b : c.*member) s += (s.empty() ? "" : ", ") + fmt(b);
            return s;
          },
          [=](RunConfig& c, const std::string& v) {
            std::vector<double> g;
            for (const auto& item : split_list(v)) g.push_back(to_double(key, item));
            c.*member = std::move(g);
          }};
}

#define DFC_REF(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      real("env.x_max", DFC_REF(c.env.x_max)),
      real("env.psi_max", DFC_REF(c.env.psi_max)),
      real("env.gravity", DFC_REF(c.env.gravity)),
      real("env.cart_mass", DFC_REF(c.env.cart_mass)),
      real("env.pole_mass", DFC_REF(c.env.pole_mass)),
      real("env.pole_half_length", DFC_REF(c.env.pole_half_length)),
      real("env.force_magnitude", DFC_REF(c.env.force_magnitude)),
      real("env.time_step", DFC_REF(c.env.time_step)),
      integer("env.horizon", DFC_REF(c.env.horizon)),
      real("env.init_range", DFC_REF(c.env.init_range)),
      {"env.obs_mode",
       [](const RunConfig& c) { return std::string(c.env.obs_mode == ObsMode::kPixel ? "pixel" : "vector"); },
       [](RunConfig& c, const std::string& v) {
         if (v == "vector") c.env.obs_mode = ObsMode::kVector;
         else if (v == "pixel") c.env.obs_mode = ObsMode::kPixel;
         else fail(ErrorCode::kInvalidArgument, "env.obs_mode: expected vector or pixel, got '" + v + "'");
       }},
      real("env.obs_noise_sigma", DFC_REF(c.env.obs_noise_sigma)),
      integer("env.frame_height", DFC_REF(c.env.frame_height)),
      integer("env.frame_width", DFC_REF(c.env.frame_width)),

      integer("codec.num_features", DFC_REF(c.codec.num_features)),
      integer("codec.dim", DFC_REF(c.codec.dim)),
      integer("codec.max_level", DFC_REF(c.codec.max_level)),
      integer("codec.dataset_size", DFC_REF(c.codec.dataset_size)),
      integer("codec.lloyd_iterations", DFC_REF(c.codec.lloyd_iterations)),
      integer("codec.pixel_pool", DFC_REF(c.codec.pixel_pool)),
      real("codec.ridge", DFC_REF(c.codec.ridge)),
      real("codec.holdout_fraction", DFC_REF(c.codec.holdout_fraction)),

      real("train.gamma", DFC_REF(c.train.gamma)),
      real("train.robot_lr", DFC_REF(c.train.robot_lr)),
      real("train.observer_lr", DFC_REF(c.train.observer_lr)),
      real("train.regressor_lr", DFC_REF(c.train.regressor_lr)),
      integer("train.batch_size", DFC_REF(c.train.batch_size)),
      integer("train.robot_episodes", DFC_REF(c.train.robot_episodes)),
      integer("train.observer_episodes", DFC_REF(c.train.observer_episodes)),
      integer("train.regressor_episodes", DFC_REF(c.train.regressor_episodes)),
      real("train.beta", DFC_REF(c.train.beta)),
      {"train.level", [](const RunConfig& c) { return std::string(1, level_name(c.train.level)); },
       [](RunConfig& c, const std::string& v) { c.train.level = parse_level(v); }},
      real("train.entropy_coef", DFC_REF(c.train.entropy_coef)),
      real("train.value_coef", DFC_REF(c.train.value_coef)),
      real("train.grad_clip", DFC_REF(c.train.grad_clip)),
      integer("train.bptt_window", DFC_REF(c.train.bptt_window)),
      integer("train.recurrent_hidden", DFC_REF(c.train.recurrent_hidden)),
      integer("train.mlp_hidden", DFC_REF(c.train.mlp_hidden)),
      integer("train.robot_train_level", DFC_REF(c.train.robot_train_level)),
      real("train.robot_null_prob", DFC_REF(c.train.robot_null_prob)),
      real("train.regressor_level_mix", DFC_REF(c.train.regressor_level_mix)),
      boolean("train.observer_aoi_input", DFC_REF(c.train.observer_aoi_input)),
      real("train.failure_reward", DFC_REF(c.train.failure_reward)),
      integer("train.robot_eval_interval", DFC_REF(c.train.robot_eval_interval)),
      integer("train.robot_eval_episodes", DFC_REF(c.train.robot_eval_episodes)),
      real("train.lr_final_fraction", DFC_REF(c.train.lr_final_fraction)),
      real("train.reward_scale_robot", DFC_REF(c.train.reward_scale_robot)),
      real("train.reward_scale_a", DFC_REF(c.train.reward_scale_a)),
      real("train.reward_scale_b", DFC_REF(c.train.reward_scale_b)),
      real("train.reward_scale_c", DFC_REF(c.train.reward_scale_c)),
      grid("train.beta_grid_a", &RunConfig::beta_grid_a),
      grid("train.beta_grid_b", &RunConfig::beta_grid_b),
      grid("train.beta_grid_c", &RunConfig::beta_grid_c),
      {"train.observer_levels",
       [](const RunConfig& c) {
         std::string s;
         for (CommLevel l : c.observer_levels) s += (s.empty() ? "" : ", ") + std::string(1, level_name(l));
         return s;
       },
       [](RunConfig& c, const std::string& v) {
         c.observer_levels.clear();
         for (const auto& item : split_list(v)) c.observer_levels.push_back(parse_level(item));
       }},

      integer("eval.episodes", DFC_REF(c.eval.episodes)),
      integer("eval.trace_episodes", DFC_REF(c.eval.trace_episodes)),
      integer("eval.bootstrap_resamples", DFC_REF(c.eval.bootstrap_resamples)),
      integer("eval.heatmap_bins", DFC_REF(c.eval.heatmap_bins)),
      integer("eval.min_count", DFC_REF(c.eval.min_count)),
      integer("eval.entropy_bins", DFC_REF(c.eval.entropy_bins)),
      integer("eval.lenhist_bin", DFC_REF(c.eval.lenhist_bin)),
      boolean("eval.static_sweep", DFC_REF(c.eval.static_sweep)),

      integer("run.seed", DFC_REF(c.seed)),
      {"run.out", [](const RunConfig& c) { return c.out_dir; },
       [](RunConfig& c, const std::string& v) {
         if (v.empty()) fail(ErrorCode::kInvalidArgument, "run.out: empty path");
         c.out_dir = v;
       }},
  };
  return f;
}

#undef DFC_REF

const Field& find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return f;
  fail(ErrorCode::kInvalidArgument, "unknown config key: " + key);
}

void check(bool cond, const std::string& key, const std::string& what) {
  if (!cond) fail(ErrorCode::kInvalidArgument, key + ": " + what);
}

void check_grid(const std::vector<double>& g, const std::string& key) {
  check(!g.empty(), key, "needs at least one value");
  for (size_t i = 0; i < g.size(); ++i) {
    check(g[i] >= 0.0, key, "values must be non-negative");
    check(i == 0 || g[i] > g[i - 1], key, "values must be strictly increasing");
  }
}

}  // namespace

const std::vector<double>& RunConfig::beta_grid(CommLevel level) const {
  switch (level) {
    case CommLevel::kA: return beta_grid_a;
    case CommLevel::kB: return beta_grid_b;
    case CommLevel::kC: return beta_grid_c;
  }
  return beta_grid_c;
}

void RunConfig::validate() const {
  try {
    env.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("env.") + e.what());
  }
  try {
    train.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("train.") + e.what());
  }
  check(codec.num_features >= 1, "codec.num_features", "must be >= 1");
  check(codec.dim >= 1, "codec.dim", "must be >= 1");
  check(codec.num_features * codec.dim == 8, "codec.num_features",
        "num_features * dim must equal the 8 extracted features");
  check(codec.max_level >= 1 && codec.max_level <= 16, "codec.max_level", "must lie in [1, 16]");
  check(codec.dataset_size >= 2, "codec.dataset_size", "must be >= 2");
  check(codec.lloyd_iterations >= 1, "codec.lloyd_iterations", "must be >= 1");
  check(codec.pixel_pool >= 1, "codec.pixel_pool", "must be >= 1");
  check(codec.ridge >= 0.0, "codec.ridge", "must be non-negative");
  check(codec.holdout_fraction > 0.0 && codec.holdout_fraction < 1.0, "codec.holdout_fraction",
        "must lie in (0, 1)");
  check(train.robot_train_level <= codec.max_level, "train.robot_train_level",
        "must not exceed codec.max_level");
  check_grid(beta_grid_a, "train.beta_grid_a");
  check_grid(beta_grid_b, "train.beta_grid_b");
  check_grid(beta_grid_c, "train.beta_grid_c");
  check(eval.episodes >= 1, "eval.episodes", "must be >= 1");
  check(eval.trace_episodes >= 0, "eval.trace_episodes", "must be >= 0");
  check(eval.bootstrap_resamples >= 1, "eval.bootstrap_resamples", "must be >= 1");
  check(eval.heatmap_bins >= 1, "eval.heatmap_bins", "must be >= 1");
  check(eval.min_count >= 1, "eval.min_count", "must be >= 1");
  check(eval.entropy_bins >= 1, "eval.entropy_bins", "must be >= 1");
  check(eval.lenhist_bin >= 1, "eval.lenhist_bin", "must be >= 1");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::stringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::kInvalidArgument, where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kInvalidArgument, where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (section.empty()) fail(ErrorCode::kInvalidArgument, where + key + " appears before any [section]");
    try {
      set_config_value(cfg, section + "." + key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kNotFound, "cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_field(key).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  return find_field(key).get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  std::string section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << f.get(cfg) << '\n';
  }
}

}  // namespace dfc
