#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace injuryrisk::cli {

inline constexpr std::string_view kVersion = "0.1.0";

/// Outcome of a pipeline stage; `manifest` is also written to disk.
struct StageOutcome {
  nlohmann::json manifest;
  bool ok = true;  // false when a stage finished with partial failures
};

/// Hash over the relative paths and bytes of every regular file below `dir`.
std::string hash_tree(const std::filesystem::path& dir);

StageOutcome preprocess(const GlobalConfig& cfg);

/// Rewrites windows.csv unless its inputs and output are unchanged, in which
/// case the manifest records a cache hit.
StageOutcome build_windows(const GlobalConfig& cfg);

StageOutcome synth(const GlobalConfig& cfg, bool force);

struct TrainOptions {
  std::optional<models::ModelKind> model;
  int round = 0;
};
StageOutcome train(const GlobalConfig& cfg, const TrainOptions& options);

struct EvaluateOptions {
  std::optional<models::ModelKind> model;
};
StageOutcome evaluate(const GlobalConfig& cfg, const EvaluateOptions& options);

struct GridRunOptions {
  std::vector<std::string> cells;
  bool force = false;
};
StageOutcome grid(const GlobalConfig& cfg, const GridRunOptions& options);

}  // namespace injuryrisk::cli
