#include "dfc/dfc.h"

#include <cstring>
#include <fstream>
#include <new>
#include <string>
#include <vector>

#include "dfc/codec.hpp"
#include "dfc/config.hpp"
#include "dfc/error.hpp"
#include "dfc/eval.hpp"
#include "dfc/pipeline.hpp"

struct dfc_config {
  dfc::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

dfc_status to_status(dfc::ErrorCode c) {
  switch (c) {
    case dfc::ErrorCode::kInvalidArgument: return DFC_ERR_INVALID_ARGUMENT;
    case dfc::ErrorCode::kNotFound: return DFC_ERR_NOT_FOUND;
    case dfc::ErrorCode::kFormat: return DFC_ERR_FORMAT;
    case dfc::ErrorCode::kInternal: return DFC_ERR_INTERNAL;
  }
  return DFC_ERR_INTERNAL;
}

template <typename F>
dfc_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return DFC_OK;
  } catch (const dfc::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return DFC_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (p == nullptr) dfc::fail(dfc::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

}  // namespace

extern "C" {

const char* dfc_last_error(void) { return g_last_error.c_str(); }

const char* dfc_version(void) { return "1.0.0"; }

dfc_status dfc_config_new(dfc_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new dfc_config{};
  });
}

dfc_status dfc_config_load(const char* path, dfc_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new dfc_config{dfc::load_config(path)};
  });
}

dfc_status dfc_config_parse(const char* text, dfc_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new dfc_config{dfc::parse_config(text)};
  });
}

void dfc_config_free(dfc_config* cfg) { delete cfg; }

dfc_status dfc_config_set(dfc_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    dfc::set_config_value(cfg->cfg, key, value);
  });
}

dfc_status dfc_config_get(const dfc_config* cfg, const char* key, char* buf, size_t cap,
                          size_t* needed) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    const std::string v = dfc::get_config_value(cfg->cfg, key);
    if (needed) *needed = v.size() + 1;
    if (buf != nullptr && cap >= v.size() + 1) std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

dfc_status dfc_config_validate(const dfc_config* cfg) {
  return guarded([&] {
    need(cfg, "cfg");
    cfg->cfg.validate();
  });
}

dfc_status dfc_config_write(const dfc_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "cfg");
    need(path, "path");
    std::ofstream out(path);
    if (!out) dfc::fail(dfc::ErrorCode::kInvalidArgument, std::string("cannot write ") + path);
    dfc::write_config(out, cfg->cfg);
  });
}

dfc_status dfc_run(const dfc_config* cfg, const char* subcommand) {
  return guarded([&] {
    need(cfg, "cfg");
    need(subcommand, "subcommand");
    dfc::run_subcommand(subcommand, cfg->cfg);
  });
}

dfc_status dfc_train_observer(const dfc_config* cfg, char level, int has_beta, double beta) {
  return guarded([&] {
    need(cfg, "cfg");
    dfc::ObserverSelection sel;
    if (level != 0) sel.level = dfc::parse_level(std::string(1, level));
    if (has_beta) {
      dfc::require(beta >= 0.0, "beta must be non-negative");
      sel.beta = beta;
    }
    dfc::run_train_observer(cfg->cfg, sel);
  });
}

dfc_status dfc_env_step(const dfc_config* cfg, const double state[4], int action,
                        int steps_taken, double out_state[4], double* reward, int* done) {
  return guarded([&] {
    need(state, "state");
    need(out_state, "out_state");
    dfc::require(action == 0 || action == 1, "action must be 0 or 1");
    const dfc::EnvConfig env = cfg ? cfg->cfg.env : dfc::EnvConfig{};
    const dfc::StepResult r =
        dfc::step({state[0], state[1], state[2], state[3]}, static_cast<dfc::Action>(action),
                  env, steps_taken);
    const auto a = r.state.as_array();
    for (int i = 0; i < 4; ++i) out_state[i] = a[i];
    if (reward) *reward = r.reward;
    if (done) *done = r.done ? 1 : 0;
  });
}

int dfc_update_aoi(int aoi, int transmitted) {
  return aoi < 0 ? -1 : dfc::update_aoi(aoi, transmitted != 0);
}

dfc_status dfc_pareto_dominates(const double* eta, const double* eta_prime, size_t n, int* out) {
  return guarded([&] {
    need(eta, "eta");
    need(eta_prime, "eta_prime");
    need(out, "out");
    *out = dfc::pareto_dominates({eta, n}, {eta_prime, n}) ? 1 : 0;
  });
}

dfc_status dfc_pareto_front(const double* points, size_t n, size_t dim, size_t* out_idx,
                            size_t* out_count) {
  return guarded([&] {
    need(out_count, "out_count");
    if (n > 0) {
      need(points, "points");
      need(out_idx, "out_idx");
    }
    std::vector<std::vector<double>> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i].assign(points + i * dim, points + (i + 1) * dim);
    const auto front = dfc::pareto_front(pts);
    for (size_t i = 0; i < front.size(); ++i) out_idx[i] = front[i];
    *out_count = front.size();
  });
}

dfc_status dfc_rmsd(const double* series, size_t n, double target, double* out) {
  return guarded([&] {
    need(out, "out");
    dfc::require(series != nullptr || n == 0, "series is null");
    *out = dfc::rmsd({series, n}, target);
  });
}

dfc_status dfc_perplexity(const double* counts, size_t n, double* out) {
  return guarded([&] {
    need(counts, "counts");
    need(out, "out");
    *out = dfc::perplexity({counts, n});
  });
}

}  // extern "C"
