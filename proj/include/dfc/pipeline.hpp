#pragma once

#include <optional>
#include <string>

#include "dfc/config.hpp"

namespace dfc {

// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* kDataset = "dataset.bin";
inline constexpr const char* kCodebooks = "codebooks.bin";
inline constexpr const char* kProjection = "projection.bin";
inline constexpr const char* kCodecReport = "codec.csv";
inline constexpr const char* kRobot = "robot.ckpt";
inline constexpr const char* kRegressor = "regressor.ckpt";
inline constexpr const char* kPareto = "pareto.csv";
inline constexpr const char* kLenhist = "lenhist.csv";
inline constexpr const char* kLevelhist = "levelhist.csv";
inline constexpr const char* kExplain = "explain.csv";
inline constexpr const char* kTraceDir = "traces";
inline constexpr const char* kEffectiveConfig = "config.effective.ini";
}  // namespace artifact

std::string observer_checkpoint_name(CommLevel level, double beta);
// robot.ckpt when v is V or 0, robot_v{v}.ckpt otherwise.
std::string robot_checkpoint_name(int v, int max_level);
std::string beta_tag(double beta);

// Restricts train-observer to one level and/or one beta.
struct ObserverSelection {
  std::optional<CommLevel> level;
  std::optional<double> beta;
};

// Each writes config.effective.ini next to its outputs.
void run_collect_dataset(const RunConfig& cfg);
void run_train_codec(const RunConfig& cfg);
void run_train_robot(const RunConfig& cfg);
void run_train_regressor(const RunConfig& cfg);
void run_train_observer(const RunConfig& cfg, const ObserverSelection& sel = {});
void run_evaluate(const RunConfig& cfg);
void run_analyze(const RunConfig& cfg);

void run_subcommand(const std::string& name, const RunConfig& cfg,
                    const ObserverSelection& sel = {});

}  // namespace dfc
