// dfc: command-line driver over the C API.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dfc/dfc.h"

namespace {

int exit_code(dfc_status s) {
  switch (s) {
    case DFC_OK: return 0;
    case DFC_ERR_INTERNAL: return 2;
    default: return 1;
  }
}

struct ConfigHandle {
  dfc_config* p = nullptr;
  ~ConfigHandle() { dfc_config_free(p); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic feature compression for remote control: dataset, training, evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, level, beta_text;
  std::vector<std::string> sets;
  long long seed = -1;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"collect-dataset", "Roll out a random policy and store observation pairs"},
      {"train-codec", "Fit the codebook ensemble (and pixel projection)"},
      {"train-robot", "Train the robot policy on full-quality messages"},
      {"train-regressor", "Train the state regressor used for semantic rewards"},
      {"train-observer", "Train observer policies over the levels and beta grids"},
      {"evaluate", "Evaluate static and dynamic schemes, write pareto.csv and traces"},
      {"analyze", "Build heatmaps and AoI distributions from saved traces"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Root seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--level", level, "Communication level")->check(CLI::IsMember({"A", "B", "C"}));
    sub->add_option("--beta", beta_text, "Cost per byte");
    sub->add_option("--set", sets, "Override, section.key=value (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  ConfigHandle cfg;
  dfc_status st = config_path.empty() ? dfc_config_new(&cfg.p) : dfc_config_load(config_path.c_str(), &cfg.p);
  auto check = [](dfc_status s) {
    if (s != DFC_OK) std::fprintf(stderr, "dfc: %s\n", dfc_last_error());
    return s;
  };
  if (check(st) != DFC_OK) return exit_code(st);

  // Flags take precedence over the file.
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "dfc: --set expects key=value, got '%s'\n", kv.c_str());
      return 1;
    }
    if ((st = check(dfc_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()))) != DFC_OK)
      return exit_code(st);
  }
  if (seed >= 0 && (st = check(dfc_config_set(cfg.p, "run.seed", std::to_string(seed).c_str()))) != DFC_OK)
    return exit_code(st);
  if (!out_dir.empty() && (st = check(dfc_config_set(cfg.p, "run.out", out_dir.c_str()))) != DFC_OK)
    return exit_code(st);
  if (!level.empty() && (st = check(dfc_config_set(cfg.p, "train.level", level.c_str()))) != DFC_OK)
    return exit_code(st);
  if (!beta_text.empty() && (st = check(dfc_config_set(cfg.p, "train.beta", beta_text.c_str()))) != DFC_OK)
    return exit_code(st);
  if ((st = check(dfc_config_validate(cfg.p))) != DFC_OK) return exit_code(st);

  if (cmd == "train-observer") {
    double beta = 0.0;
    if (!beta_text.empty()) {
      char buf[64];
      size_t n = 0;
      dfc_config_get(cfg.p, "train.beta", buf, sizeof buf, &n);
      beta = std::stod(buf);
    }
    st = dfc_train_observer(cfg.p, level.empty() ? 0 : level[0], beta_text.empty() ? 0 : 1, beta);
  } else {
    st = dfc_run(cfg.p, cmd.c_str());
  }
  check(st);
  return exit_code(st);
}
