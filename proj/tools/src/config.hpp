#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "injuryrisk/evaluation.hpp"
#include "injuryrisk/feature_store.hpp"
#include "injuryrisk/features.hpp"
#include "injuryrisk/ingest.hpp"
#include "injuryrisk/models/model.hpp"
#include "injuryrisk/windowing.hpp"

namespace injuryrisk::cli {

/// Input and output locations. Relative paths are resolved against the
/// directory of the config file.
struct Paths {
  std::filesystem::path subjective_dir = "raw/subjective";
  std::filesystem::path gps_dir = "raw/gps";
  std::filesystem::path match_stats = "raw/match_stats.csv";
  std::filesystem::path injuries = "raw/injuries.csv";
  std::filesystem::path store = "work/store.csv";
  std::filesystem::path windows = "work/windows.csv";
  std::filesystem::path rounds_dir = "work/rounds";
  std::filesystem::path results_dir = "work/results";
  std::filesystem::path models_dir = "work/models";
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;  // optional dashboard assets
};

struct GlobalConfig {
  Paths paths;
  ingest::PlausibilityConfig plausibility;
  features::ZoneConfig zones;
  std::vector<ingest::RosterEntry> roster;
  features::LoadModel load_model = features::LoadModel::rolling;
  store::ImputeMethod imputation = store::ImputeMethod::median;
  windowing::WindowSpec window;
  windowing::SynthesisOptions synthesis;
  evaluation::GridSpec grid;
  models::ModelConfig models;  // `kind` is the model used by train/evaluate
  std::uint64_t seed = 42;
  ServiceConfig service;

  /// Applies the global seed to every seeded component.
  void set_seed(std::uint64_t s);

  /// Normalised snapshot recorded in manifests.
  nlohmann::json snapshot() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// ConfigError naming the key.
GlobalConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
GlobalConfig load_config(const std::filesystem::path& file);

}  // namespace injuryrisk::cli
