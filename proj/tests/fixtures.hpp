// Small trained components for tests that need a working pipeline.
#pragma once

#include <vector>

#include "dfc/codec.hpp"
#include "dfc/env.hpp"

namespace dfc::test {

inline std::vector<DatasetRecord> random_policy_records(const EnvConfig& cfg, int n, Rng& rng) {
  std::vector<DatasetRecord> out;
  SystemState s = reset(rng, cfg);
  SystemState prev = s;
  for (int i = 0; i < n; ++i) {
    const Observation o = observe(prev, s, cfg, rng);
    DatasetRecord r;
    r.prev_true = prev;
    r.curr_true = s;
    for (int k = 0; k < 4; ++k) {
      r.prev_obs[k] = o.previous[k];
      r.curr_obs[k] = o.current[k];
    }
    out.push_back(r);
    const StepResult sr = step(s, uniform01(rng) < 0.5 ? Action::kLeft : Action::kRight, cfg);
    prev = s;
    s = sr.state;
    if (sr.done) {
      s = reset(rng, cfg);
      prev = s;
    }
  }
  return out;
}

inline CodebookEnsemble small_trained_ensemble(const EnvConfig& cfg, int max_level = 6,
                                               int samples = 3000) {
  Rng rng(21);
  const auto records = random_policy_records(cfg, samples, rng);
  const auto data = dataset_features(records, cfg, nullptr);
  Rng fit(22);
  LloydOptions opts;
  opts.max_iterations = 50;
  return train_ensemble(data, kVectorFeatureDim, 1, max_level, fit, opts);
}

}  // namespace dfc::test
