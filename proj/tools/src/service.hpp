#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "injuryrisk/feature_store.hpp"
#include "injuryrisk/models/model.hpp"

namespace injuryrisk::cli {

struct Response {
  int status = 200;
  nlohmann::json body;
};

using Query = std::map<std::string, std::string>;

/// Read-only API over a feature store, grid results and trained models.
/// Request handling is independent of the HTTP transport.
class Service {
 public:
  Service(store::FeatureStore store, nlohmann::json experiments, std::map<std::string, models::TrainedModel> models);

  /// Loads the store, `<results_dir>/results.json` (if present) and every
  /// `model_*.json` under the models directory and `<results_dir>/models`.
  static Service load(const std::filesystem::path& store_csv, const std::filesystem::path& results_dir,
                      const std::filesystem::path& models_dir);

  Response handle(const std::string& method, const std::string& path, const Query& query,
                  const std::string& body = "") const;

  const store::FeatureStore& store() const noexcept { return store_; }
  const std::map<std::string, models::TrainedModel>& models() const noexcept { return models_; }

 private:
  Response players() const;
  Response sessions(const Query& q) const;
  Response feature(const std::string& name, const Query& q) const;
  Response injuries(const Query& q) const;
  Response catalog() const;
  Response experiments() const;
  Response experiment(const std::string& id) const;
  Response predict(const std::string& body) const;

  std::optional<Response> check_player(const Query& q, bool required) const;

  store::FeatureStore store_;
  nlohmann::json experiments_;  // array of cell objects
  std::map<std::string, models::TrainedModel> models_;
};

/// Blocks serving `service` over HTTP until the process is stopped.
void serve(const Service& service, const std::string& host, int port, const std::filesystem::path& static_dir = {});

}  // namespace injuryrisk::cli
