#include "dfc/codec.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dfc/binio.hpp"
#include "dfc/error.hpp"

namespace dfc {
namespace {

constexpr std::uint32_t kCodebookVersion = 1;
constexpr std::uint32_t kProjectionVersion = 1;
constexpr std::uint32_t kDatasetVersion = 1;

// Index of the D^2-weighted draw used by k-means++.
size_t weighted_pick(const std::vector<double>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total <= 0.0) return 0;
  double target = uniform01(rng) * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return i;
  }
  return weights.size() - 1;
}

// Scalar k-means over sorted values: clusters are contiguous ranges, so the
// assignment step is a binary search per boundary.
std::vector<double> lloyd_1d(std::vector<double> values, int k, Rng& rng,
                             int max_iterations) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + values[i];

  std::vector<double> centers;
  centers.reserve(k);
  centers.push_back(values[static_cast<size_t>(uniform01(rng) * n) % n]);
  std::vector<double> d2(n);
  for (size_t i = 0; i < n; ++i) {
    const double d = values[i] - centers[0];
    d2[i] = d * d;
  }
  while (static_cast<int>(centers.size()) < k) {
    const double c = values[weighted_pick(d2, rng)];
    centers.push_back(c);
    for (size_t i = 0; i < n; ++i) {
      const double d = values[i] - c;
      d2[i] = std::min(d2[i], d * d);
    }
  }
  std::sort(centers.begin(), centers.end());

  std::vector<size_t> ends(k);
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Ties at a midpoint go to the lower cluster.
    for (int j = 0; j + 1 < k; ++j) {
      const double mid = 0.5 * (centers[j] + centers[j + 1]);
      ends[j] = static_cast<size_t>(
          std::upper_bound(values.begin(), values.end(), mid) - values.begin());
    }
    ends[k - 1] = n;

    std::vector<double> next(k);
    bool reseeded = false;
    size_t begin = 0;
    for (int j = 0; j < k; ++j) {
      const size_t end = std::max(ends[j], begin);
      if (end > begin) {
        next[j] = (prefix[end] - prefix[begin]) / static_cast<double>(end - begin);
      } else {
        next[j] = std::numeric_limits<double>::quiet_NaN();
        reseeded = true;
      }
      begin = end;
    }
    if (reseeded) {
      // Empty clusters take the point with the largest current error.
      for (int j = 0; j < k; ++j) {
        if (!std::isnan(next[j])) continue;
        size_t worst = 0;
        double worst_err = -1.0;
        for (size_t i = 0; i < n; ++i) {
          double best = std::numeric_limits<double>::infinity();
          for (int c = 0; c < k; ++c) {
            if (std::isnan(next[c])) continue;
            best = std::min(best, std::abs(values[i] - next[c]));
          }
          if (best > worst_err) {
            worst_err = best;
            worst = i;
          }
        }
        next[j] = values[worst];
      }
      std::sort(next.begin(), next.end());
    }
    const bool converged = !reseeded && next == centers;
    centers = std::move(next);
    if (converged) break;
  }
  return centers;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// General K-dimensional k-means with brute-force assignment.
std::vector<double> lloyd_kd(const std::vector<double>& points, int dim, int k,
                             Rng& rng, int max_iterations) {
  const size_t n = points.size() / dim;
  auto point = [&](size_t i) {
    return std::span<const double>(points.data() + i * dim, dim);
  };
  std::vector<double> centers;
  centers.reserve(static_cast<size_t>(k) * dim);
  const size_t first = static_cast<size_t>(uniform01(rng) * n) % n;
  centers.insert(centers.end(), point(first).begin(), point(first).end());
  std::vector<double> d2(n);
  for (size_t i = 0; i < n; ++i) d2[i] = sq_dist(point(i), point(first));
  for (int c = 1; c < k; ++c) {
    const size_t pick = weighted_pick(d2, rng);
    centers.insert(centers.end(), point(pick).begin(), point(pick).end());
    for (size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(point(i), point(pick)));
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    std::vector<double> best_d(n);
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(point(i), {centers.data() + static_cast<size_t>(c) * dim,
                                            static_cast<size_t>(dim)});
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      best_d[i] = bd;
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    std::vector<double> sums(static_cast<size_t>(k) * dim, 0.0);
    std::vector<size_t> counts(k, 0);
    for (size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (int d = 0; d < dim; ++d) sums[assign[i] * dim + d] += points[i * dim + d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        const size_t worst = static_cast<size_t>(
            std::max_element(best_d.begin(), best_d.end()) - best_d.begin());
        best_d[worst] = 0.0;
        std::copy_n(points.begin() + worst * dim, dim, centers.begin() + c * dim);
        changed = true;
        continue;
      }
      for (int d = 0; d < dim; ++d) {
        centers[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
      }
    }
    if (!changed) break;
  }
  return centers;
}

int nearest(std::span<const double> x, const Codebook& book, int feature) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int c = 0; c < book.size(); ++c) {
    const double d = sq_dist(x, book.codeword(feature, c));
    if (d < bd) {  // strict: ties keep the lowest index
      bd = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

int PixelProjection::inputs() const {
  return 2 * (frame_height / pool) * (frame_width / pool);
}

std::vector<double> PixelProjection::pooled(const Observation& obs) const {
  require(obs.mode == ObsMode::kPixel && obs.height == frame_height &&
              obs.width == frame_width,
          "pixel projection: observation shape mismatch");
  const int ph = frame_height / pool;
  const int pw = frame_width / pool;
  std::vector<double> out;
  out.reserve(inputs());
  const double inv = 1.0 / (pool * pool);
  for (const auto* frame : {&obs.current, &obs.previous}) {
    for (int r = 0; r < ph; ++r) {
      for (int c = 0; c < pw; ++c) {
        double s = 0.0;
        for (int dr = 0; dr < pool; ++dr) {
          for (int dc = 0; dc < pool; ++dc) {
            s += (*frame)[static_cast<size_t>(r * pool + dr) * frame_width + c * pool + dc];
          }
        }
        out.push_back(s * inv);
      }
    }
  }
  return out;
}

FeatureVector extract_features(const Observation& obs,
                               const PixelProjection* projection) {
  if (obs.mode == ObsMode::kVector) {
    require(obs.current.size() == 4 && obs.previous.size() == 4,
            "extract_features: vector observation must hold two 4-vectors");
    FeatureVector f(kVectorFeatureDim);
    for (int i = 0; i < 4; ++i) {
      f[i] = obs.current[i];
      f[4 + i] = obs.current[i] - obs.previous[i];
    }
    return f;
  }
  require(projection != nullptr, "extract_features: pixel mode needs a projection");
  const std::vector<double> in = projection->pooled(obs);
  const int n_in = projection->inputs();
  FeatureVector f(projection->outputs);
  for (int o = 0; o < projection->outputs; ++o) {
    const double* w = projection->weights.data() + static_cast<size_t>(o) * (n_in + 1);
    double s = w[n_in];
    for (int i = 0; i < n_in; ++i) s += w[i] * in[i];
    f[o] = s;
  }
  return f;
}

Observation reconstruct_observation(std::span<const double> features,
                                    const EnvConfig& cfg) {
  require(features.size() == kVectorFeatureDim,
          "reconstruct_observation: expected 8 features");
  std::array<double, 4> curr{}, prev{};
  for (int i = 0; i < 4; ++i) {
    curr[i] = features[i];
    prev[i] = features[i] - features[4 + i];
  }
  Observation obs;
  obs.mode = cfg.obs_mode;
  if (cfg.obs_mode == ObsMode::kVector) {
    obs.current.assign(curr.begin(), curr.end());
    obs.previous.assign(prev.begin(), prev.end());
    return obs;
  }
  // Implied states may leave the live region; clamp so the frame stays valid.
  auto clamp_state = [&](std::array<double, 4> n) {
    n[0] = std::clamp(n[0], -1.0, 1.0);
    n[2] = std::clamp(n[2], -1.0, 1.0);
    return denormalize(n, cfg);
  };
  obs.height = cfg.frame_height;
  obs.width = cfg.frame_width;
  obs.current = render(clamp_state(curr), cfg);
  obs.previous = render(clamp_state(prev), cfg);
  return obs;
}

std::span<const double> Codebook::codeword(int feature, int index) const {
  const size_t off = (static_cast<size_t>(feature) * size() + index) * dim;
  return {codewords.data() + off, static_cast<size_t>(dim)};
}

const Codebook& CodebookEnsemble::at(int level) const {
  require(level >= 1 && level <= max_level(),
          "codebook level " + std::to_string(level) + " out of range");
  return books[level - 1];
}

FeatureVector CodebookEnsemble::standardize(std::span<const double> features) const {
  require(features.size() == static_cast<size_t>(num_features * dim),
          "standardize: feature dimension mismatch");
  FeatureVector out(features.begin(), features.end());
  if (books.empty()) return out;
  const Codebook& top = books.back();
  const int n = top.size();
  for (int f = 0; f < num_features; ++f) {
    for (int k = 0; k < dim; ++k) {
      double mean = 0.0, sq = 0.0;
      for (int c = 0; c < n; ++c) mean += top.codeword(f, c)[k];
      mean /= n;
      for (int c = 0; c < n; ++c) sq += std::pow(top.codeword(f, c)[k] - mean, 2);
      const double spread = std::sqrt(sq / n);
      const size_t i = static_cast<size_t>(f) * dim + k;
      out[i] = spread > 1e-12 ? (features[i] - mean) / spread : features[i] - mean;
    }
  }
  return out;
}

void CodebookEnsemble::validate() const {
  require(num_features >= 1 && dim >= 1, "ensemble: F and K must be >= 1");
  for (size_t i = 0; i < books.size(); ++i) {
    const Codebook& b = books[i];
    require(b.level == static_cast<int>(i) + 1, "ensemble: levels must be 1..V");
    require(b.num_features == num_features && b.dim == dim,
            "ensemble: all books must share F and K");
    require(b.codewords.size() == static_cast<size_t>(b.size()) * num_features * dim,
            "ensemble: codeword count mismatch");
    for (double c : b.codewords) require(std::isfinite(c), "ensemble: non-finite codeword");
  }
}

Codebook train_codebook(std::span<const double> dataset, int num_features,
                        int dim, int level, Rng& rng, const LloydOptions& opts) {
  require(num_features >= 1 && dim >= 1, "train_codebook: F and K must be >= 1");
  require(level >= 1 && level <= 16, "train_codebook: level out of range");
  const size_t row = static_cast<size_t>(num_features) * dim;
  require(dataset.size() % row == 0, "train_codebook: ragged dataset");
  const size_t n = dataset.size() / row;
  const int k = 1 << level;
  require(n >= static_cast<size_t>(k),
          "train_codebook: dataset smaller than codebook (" + std::to_string(n) +
              " < " + std::to_string(k) + ")");

  Codebook book;
  book.level = level;
  book.num_features = num_features;
  book.dim = dim;
  book.codewords.reserve(static_cast<size_t>(k) * row);
  for (int f = 0; f < num_features; ++f) {
    std::vector<double> column;
    column.reserve(n * dim);
    for (size_t i = 0; i < n; ++i) {
      for (int d = 0; d < dim; ++d) column.push_back(dataset[i * row + f * dim + d]);
    }
    std::vector<double> centers;
    if (dim == 1) {
      std::vector<double> distinct = column;
      std::sort(distinct.begin(), distinct.end());
      const auto n_distinct = std::unique(distinct.begin(), distinct.end()) - distinct.begin();
      require(n_distinct >= k, "train_codebook: feature " + std::to_string(f) +
                                   " has fewer distinct values than codewords");
      centers = lloyd_1d(std::move(column), k, rng, opts.max_iterations);
    } else {
      centers = lloyd_kd(column, dim, k, rng, opts.max_iterations);
    }
    book.codewords.insert(book.codewords.end(), centers.begin(), centers.end());
  }
  return book;
}

CodebookEnsemble train_ensemble(std::span<const double> dataset,
                                int num_features, int dim, int max_level,
                                Rng& rng, const LloydOptions& opts) {
  require(max_level >= 1, "train_ensemble: V must be >= 1");
  CodebookEnsemble e;
  e.num_features = num_features;
  e.dim = dim;
  for (int v = 1; v <= max_level; ++v) {
    e.books.push_back(train_codebook(dataset, num_features, dim, v, rng, opts));
  }
  return e;
}

Message encode(std::span<const double> features, const Codebook& book) {
  require(features.size() == static_cast<size_t>(book.num_features) * book.dim,
          "encode: feature dimension mismatch");
  Message m;
  m.level = book.level;
  m.indices.resize(book.num_features);
  for (int f = 0; f < book.num_features; ++f) {
    m.indices[f] = nearest(features.subspan(static_cast<size_t>(f) * book.dim, book.dim),
                           book, f);
  }
  return m;
}

FeatureVector decode(const Message& msg, const Codebook& book) {
  require(!msg.is_null(), "decode: null message carries no features");
  require(msg.level == book.level, "decode: level does not match codebook");
  require(msg.indices.size() == static_cast<size_t>(book.num_features),
          "decode: wrong number of indices");
  FeatureVector out;
  out.reserve(static_cast<size_t>(book.num_features) * book.dim);
  for (int f = 0; f < book.num_features; ++f) {
    const int idx = msg.indices[f];
    require(idx >= 0 && idx < book.size(), "decode: index out of bounds");
    const auto cw = book.codeword(f, idx);
    out.insert(out.end(), cw.begin(), cw.end());
  }
  return out;
}

FeatureVector decode(const Message& msg, const CodebookEnsemble& ensemble) {
  require(!msg.is_null(), "decode: null message carries no features");
  return decode(msg, ensemble.at(msg.level));
}

double message_length_bytes(int level, int num_features) {
  return level <= 0 ? 0.0 : static_cast<double>(num_features) * level / 8.0;
}

double message_length_bytes(const Message& msg, int num_features) {
  return message_length_bytes(msg.level, num_features);
}

double perplexity(std::span<const double> usage_counts) {
  double total = 0.0;
  for (double c : usage_counts) {
    require(c >= 0.0 && std::isfinite(c), "perplexity: counts must be non-negative");
    total += c;
  }
  require(total > 0.0, "perplexity: counts sum to zero");
  double h = 0.0;
  for (double c : usage_counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return std::exp2(h);
}

std::vector<double> quantization_mse(std::span<const double> dataset,
                                     const Codebook& book) {
  const size_t row = static_cast<size_t>(book.num_features) * book.dim;
  const size_t n = dataset.size() / row;
  require(n > 0, "quantization_mse: empty dataset");
  std::vector<double> mse(book.num_features, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (int f = 0; f < book.num_features; ++f) {
      const auto x = dataset.subspan(i * row + f * book.dim, book.dim);
      mse[f] += sq_dist(x, book.codeword(f, nearest(x, book, f))) / book.dim;
    }
  }
  for (double& m : mse) m /= static_cast<double>(n);
  return mse;
}

std::vector<double> usage_perplexity(std::span<const double> dataset,
                                     const Codebook& book) {
  const size_t row = static_cast<size_t>(book.num_features) * book.dim;
  const size_t n = dataset.size() / row;
  require(n > 0, "usage_perplexity: empty dataset");
  std::vector<std::vector<double>> counts(book.num_features,
                                          std::vector<double>(book.size(), 0.0));
  for (size_t i = 0; i < n; ++i) {
    const Message m = encode(dataset.subspan(i * row, row), book);
    for (int f = 0; f < book.num_features; ++f) counts[f][m.indices[f]] += 1.0;
  }
  std::vector<double> out;
  for (const auto& c : counts) out.push_back(perplexity(c));
  return out;
}

double distortion_mse(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "distortion_mse: length mismatch");
  require(!a.empty(), "distortion_mse: empty input");
  return sq_dist(a, b) / static_cast<double>(a.size());
}

double distortion_psnr(const Observation& o, const Observation& o_hat) {
  require(o.mode == o_hat.mode && o.height == o_hat.height &&
              o.width == o_hat.width && o.current.size() == o_hat.current.size() &&
              o.previous.size() == o_hat.previous.size(),
          "distortion_psnr: observation shape mismatch");
  const double se = sq_dist(o.current, o_hat.current) + sq_dist(o.previous, o_hat.previous);
  const double mse = std::max(
      se / static_cast<double>(o.current.size() + o.previous.size()), kMseFloor);
  const double peak = observation_range(o.mode);
  return 10.0 * std::log10(peak * peak / mse);
}

void save_ensemble(const CodebookEnsemble& e, const std::string& path) {
  e.validate();
  binio::Writer w(path);
  w.bytes("DFCB", 4);
  w.u32(kCodebookVersion);
  w.u32(static_cast<std::uint32_t>(e.num_features));
  w.u32(static_cast<std::uint32_t>(e.dim));
  w.u32(static_cast<std::uint32_t>(e.max_level()));
  for (const Codebook& b : e.books) w.f64s(b.codewords);
  w.close();
}

CodebookEnsemble load_ensemble(const std::string& path) {
  binio::Reader r(path);
  r.magic("DFCB");
  if (r.u32() != kCodebookVersion) fail(ErrorCode::kFormat, "unsupported codebook version");
  CodebookEnsemble e;
  e.num_features = static_cast<int>(r.u32());
  e.dim = static_cast<int>(r.u32());
  const int v_max = static_cast<int>(r.u32());
  if (e.num_features < 1 || e.dim < 1 || v_max < 1 || v_max > 16) {
    fail(ErrorCode::kFormat, "codebook header out of range: " + path);
  }
  for (int v = 1; v <= v_max; ++v) {
    Codebook b;
    b.level = v;
    b.num_features = e.num_features;
    b.dim = e.dim;
    b.codewords = r.f64s(static_cast<size_t>(1 << v) * e.num_features * e.dim);
    e.books.push_back(std::move(b));
  }
  e.validate();
  return e;
}

void save_projection(const PixelProjection& p, const std::string& path) {
  binio::Writer w(path);
  w.bytes("DFCP", 4);
  w.u32(kProjectionVersion);
  w.u32(static_cast<std::uint32_t>(p.frame_height));
  w.u32(static_cast<std::uint32_t>(p.frame_width));
  w.u32(static_cast<std::uint32_t>(p.pool));
  w.u32(static_cast<std::uint32_t>(p.outputs));
  w.f64s(p.weights);
  w.close();
}

PixelProjection load_projection(const std::string& path) {
  binio::Reader r(path);
  r.magic("DFCP");
  if (r.u32() != kProjectionVersion) fail(ErrorCode::kFormat, "unsupported projection version");
  PixelProjection p;
  p.frame_height = static_cast<int>(r.u32());
  p.frame_width = static_cast<int>(r.u32());
  p.pool = static_cast<int>(r.u32());
  p.outputs = static_cast<int>(r.u32());
  if (p.pool < 1 || p.frame_height < p.pool || p.frame_width < p.pool || p.outputs < 1) {
    fail(ErrorCode::kFormat, "projection header out of range: " + path);
  }
  p.weights = r.f64s(static_cast<size_t>(p.outputs) * (p.inputs() + 1));
  return p;
}

Observation record_observation(const DatasetRecord& rec, const EnvConfig& cfg) {
  Observation obs;
  obs.mode = cfg.obs_mode;
  if (cfg.obs_mode == ObsMode::kPixel) {
    obs.height = cfg.frame_height;
    obs.width = cfg.frame_width;
    obs.current = render(rec.curr_true, cfg);
    obs.previous = render(rec.prev_true, cfg);
  } else {
    obs.current.assign(rec.curr_obs.begin(), rec.curr_obs.end());
    obs.previous.assign(rec.prev_obs.begin(), rec.prev_obs.end());
  }
  return obs;
}

void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  binio::Writer w(path);
  w.bytes("DFCD", 4);
  w.u32(kDatasetVersion);
  w.u64(records.size());
  for (const DatasetRecord& r : records) {
    w.f64s(r.prev_true.as_array());
    w.f64s(r.curr_true.as_array());
    w.f64s(r.prev_obs);
    w.f64s(r.curr_obs);
  }
  w.close();
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  binio::Reader r(path);
  r.magic("DFCD");
  if (r.u32() != kDatasetVersion) fail(ErrorCode::kFormat, "unsupported dataset version");
  const std::uint64_t n = r.u64();
  std::vector<DatasetRecord> out(n);
  auto read4 = [&r]() {
    std::array<double, 4> a{};
    for (double& v : a) v = r.f64();
    return a;
  };
  for (DatasetRecord& rec : out) {
    rec.prev_true = SystemState::from_array(read4());
    rec.curr_true = SystemState::from_array(read4());
    rec.prev_obs = read4();
    rec.curr_obs = read4();
  }
  return out;
}

PixelProjection train_pixel_projection(const std::vector<DatasetRecord>& data,
                                       const EnvConfig& cfg, int pool,
                                       double ridge) {
  require(!data.empty(), "train_pixel_projection: empty dataset");
  PixelProjection p;
  p.frame_height = cfg.frame_height;
  p.frame_width = cfg.frame_width;
  p.pool = pool;
  p.outputs = kVectorFeatureDim;
  const int n_in = p.inputs() + 1;

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_in, n_in);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(n_in, p.outputs);
  EnvConfig pixel_cfg = cfg;
  pixel_cfg.obs_mode = ObsMode::kPixel;
  for (const DatasetRecord& rec : data) {
    const std::vector<double> in = p.pooled(record_observation(rec, pixel_cfg));
    Eigen::VectorXd x(n_in);
    for (int i = 0; i + 1 < n_in; ++i) x[i] = in[i];
    x[n_in - 1] = 1.0;
    const auto c = normalize(rec.curr_true, cfg);
    const auto pv = normalize(rec.prev_true, cfg);
    Eigen::VectorXd y(p.outputs);
    for (int i = 0; i < 4; ++i) {
      y[i] = c[i];
      y[4 + i] = c[i] - pv[i];
    }
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    cross += x * y.transpose();
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += ridge * static_cast<double>(data.size());
  const Eigen::MatrixXd w = gram.ldlt().solve(cross);  // n_in x outputs
  p.weights.resize(static_cast<size_t>(p.outputs) * n_in);
  for (int o = 0; o < p.outputs; ++o) {
    for (int i = 0; i < n_in; ++i) p.weights[static_cast<size_t>(o) * n_in + i] = w(i, o);
  }
  return p;
}

std::vector<double> dataset_features(const std::vector<DatasetRecord>& data,
                                     const EnvConfig& cfg,
                                     const PixelProjection* projection) {
  std::vector<double> out;
  out.reserve(data.size() * kVectorFeatureDim);
  for (const DatasetRecord& rec : data) {
    const FeatureVector f = extract_features(record_observation(rec, cfg), projection);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

}  // namespace dfc
