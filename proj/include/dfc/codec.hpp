#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfc/env.hpp"
#include "dfc/rng.hpp"

namespace dfc {

// F scalar features per observation in vector mode: four current normalized
// coordinates followed by the four differences current - previous.
inline constexpr int kVectorFeatureDim = 8;

using FeatureVector = std::vector<double>;

// Linear read-out from average-pooled frame pairs to the vector-mode feature
// layout. Fitted by ridge regression on a collected dataset.
struct PixelProjection {
  int frame_height = 0;
  int frame_width = 0;
  int pool = 4;
  int outputs = 0;
  // outputs x (inputs + 1), row-major, bias in the last column.
  std::vector<double> weights;

  int inputs() const;
  std::vector<double> pooled(const Observation& obs) const;
};

FeatureVector extract_features(const Observation& obs,
                               const PixelProjection* projection = nullptr);

// Inverse of the vector-mode feature map: rebuilds an observation from
// (possibly quantized) features. Pixel mode re-renders the implied states.
Observation reconstruct_observation(std::span<const double> features,
                                    const EnvConfig& cfg);

// One scalar or K-vector quantizer per feature at `level` bits.
struct Codebook {
  int level = 0;
  int num_features = 0;
  int dim = 1;
  // [feature][codeword][k], 2^level codewords per feature.
  std::vector<double> codewords;

  int size() const { return 1 << level; }
  std::span<const double> codeword(int feature, int index) const;
};

struct CodebookEnsemble {
  int num_features = 8;
  int dim = 1;
  std::vector<Codebook> books;  // books[v - 1] has v bits

  int max_level() const { return static_cast<int>(books.size()); }
  const Codebook& at(int level) const;
  void validate() const;
  // Maps features to roughly zero mean and unit spread, using the finest
  // codebook as a summary of the training distribution. Networks consume
  // features through this map; the quantizers themselves do not.
  FeatureVector standardize(std::span<const double> features) const;
};

// level 0 is the null message; it carries no indices.
struct Message {
  int level = 0;
  std::vector<int> indices;

  bool is_null() const { return level == 0; }
  bool operator==(const Message&) const = default;
};

struct LloydOptions {
  int max_iterations = 300;
};

// Per-feature k-means (k-means++ seeding from `rng`, then Lloyd iterations).
// `dataset` is row-major, each row num_features * dim values.
Codebook train_codebook(std::span<const double> dataset, int num_features,
                        int dim, int level, Rng& rng,
                        const LloydOptions& opts = {});

CodebookEnsemble train_ensemble(std::span<const double> dataset,
                                int num_features, int dim, int max_level,
                                Rng& rng, const LloydOptions& opts = {});

Message encode(std::span<const double> features, const Codebook& book);
FeatureVector decode(const Message& msg, const CodebookEnsemble& ensemble);
FeatureVector decode(const Message& msg, const Codebook& book);

double message_length_bytes(const Message& msg, int num_features);
double message_length_bytes(int level, int num_features);

// 2^H of the empirical codeword frequencies.
double perplexity(std::span<const double> usage_counts);

// Mean squared error of each feature against its nearest codeword.
std::vector<double> quantization_mse(std::span<const double> dataset,
                                     const Codebook& book);
// Usage perplexity of each feature's codebook over `dataset`.
std::vector<double> usage_perplexity(std::span<const double> dataset,
                                     const Codebook& book);

double distortion_psnr(const Observation& o, const Observation& o_hat);
double distortion_mse(std::span<const double> a, std::span<const double> b);

inline constexpr double kMseFloor = 1e-12;

// Codebook file:
//   "DFCB" u32 version=1 u32 F u32 K u32 V
//   for v in 1..V: 2^v * F * K f64 in [feature][codeword][k] order
// All integers and floats little-endian.
void save_ensemble(const CodebookEnsemble& ensemble, const std::string& path);
CodebookEnsemble load_ensemble(const std::string& path);

void save_projection(const PixelProjection& p, const std::string& path);
PixelProjection load_projection(const std::string& path);

// One sample of the random-policy dataset. Observed snapshots are the noisy
// normalized vectors; pixel frames are re-rendered from the true states.
struct DatasetRecord {
  SystemState prev_true;
  SystemState curr_true;
  std::array<double, 4> prev_obs{};
  std::array<double, 4> curr_obs{};
};

Observation record_observation(const DatasetRecord& r, const EnvConfig& cfg);

void save_dataset(const std::vector<DatasetRecord>& records,
                  const std::string& path);
std::vector<DatasetRecord> load_dataset(const std::string& path);

// Ridge fit of a pixel projection onto the noiseless vector-mode features.
PixelProjection train_pixel_projection(const std::vector<DatasetRecord>& data,
                                       const EnvConfig& cfg, int pool = 4,
                                       double ridge = 1e-3);

// Row-major feature matrix for a dataset.
std::vector<double> dataset_features(const std::vector<DatasetRecord>& data,
                                     const EnvConfig& cfg,
                                     const PixelProjection* projection);

}  // namespace dfc
