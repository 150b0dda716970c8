#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "injuryrisk/feature_store.hpp"
#include "injuryrisk/models/model.hpp"
#include "injuryrisk/windowing.hpp"

namespace injuryrisk::evaluation {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

// 0/0 is defined as 0 for every ratio.
double precision(const ConfusionMatrix& cm);
double tpr(const ConfusionMatrix& cm);
double tnr(const ConfusionMatrix& cm);
double f1(const ConfusionMatrix& cm);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

/// Trapezoidal area under a point list.
double trapezoid(std::span<const double> x, std::span<const double> y);

/// Ties in score are one diagonal step. Throws PreconditionError on a single class.
RocCurve roc(std::span<const int> y_true, std::span<const double> scores);

inline constexpr int kRocGridPoints = 101;

/// Vertical averaging on the FPR grid 0, 0.01, ..., 1. Where a curve has a
/// vertical segment at a grid FPR the highest TPR there is used. The origin is
/// prepended when the averaged TPR at FPR 0 is positive.
RocCurve mean_roc(std::span<const RocCurve> curves);

/// Percentage change from `from` to `to`; throws when `from` is 0.
double percent_change(double from, double to);

struct Metrics {
  double precision = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
};

struct RoundResult {
  int round = 0;
  ConfusionMatrix cm;
  Metrics metrics;
  RocCurve roc;
};

RoundResult score_round(int round, std::span<const int> y_true, std::span<const double> scores,
                        double threshold = models::kDefaultThreshold);

/// Fits scaler and model on `round_dir/train.csv`, scores `round_dir/test.csv`.
/// The model seed is derived from (config.seed, round). Errors are rethrown
/// as Error tagged with the round index.
RoundResult run_round(const std::filesystem::path& round_dir, const models::ModelConfig& config, int round,
                      std::optional<models::TrainedModel>* trained = nullptr);

struct CellConfig {
  std::string id;
  std::string data;  // "R" or "R+S"
  double event_proportion = 0.0;
  int n_in = 3;
  int n_out = 1;
  std::vector<store::FeatureGroup> features;
  models::ModelKind model = models::ModelKind::logit;

  std::string features_label() const;  // e.g. "TL,W,GPS"
};

struct ExperimentResult {
  CellConfig config;
  std::vector<RoundResult> rounds;
  Metrics mean;
  Metrics sd;  // sample SD over rounds (0 for a single round)
  RocCurve mean_roc;
  std::string model_file;  // round-0 model, relative to the results dir
  std::optional<std::string> error;
};

/// Aggregates per-round metrics into mean/SD and the averaged ROC.
void aggregate(ExperimentResult& result);

/// Table row: ID,Data,Event,Input,Output,Features,Model,Prec,TPR,F1,AUC.
inline constexpr std::string_view kResultsHeader = "ID,Data,Event,Input,Output,Features,Model,Prec,TPR,F1,AUC";
std::string format_result_row(const CellConfig& cell, const Metrics& mean);
/// Metric cell: rounded to 3 decimals, shortest form ("0.07", "1.0").
std::string format_metric(double value);

struct GridSpec {
  std::vector<std::string> data = {"R+S"};
  std::vector<double> event_proportions = {0.25, 0.5, 0.1};
  std::vector<int> inputs = {3, 5, 7};
  std::vector<int> outputs = {1, 3, 7};
  std::vector<std::vector<store::FeatureGroup>> feature_sets = {
      {store::FeatureGroup::TL, store::FeatureGroup::W, store::FeatureGroup::GPS}};
  std::vector<models::ModelKind> models = {models::kAllModels.begin(), models::kAllModels.end()};
  int rounds = 30;
};

/// Cells in grid order: data, event, input, output, features, model.
/// IDs are I-1..I-n in that order. "R" cells skip the event axis.
std::vector<CellConfig> enumerate_cells(const GridSpec& grid);

struct GridOptions {
  windowing::WindowSpec window;           // n_in/n_out/features/rounds overridden per cell
  windowing::SynthesisOptions synthesis;  // event_proportion overridden per cell
  models::ModelConfig model_defaults;     // kind overridden per cell
  std::vector<std::string> only_cells;    // empty: all
  bool force = false;
};

struct GridOutcome {
  std::vector<ExperimentResult> results;
  std::size_t failed = 0;
};

/// Runs the grid and writes results.csv, results.json, per-cell
/// `cells/<id>/roc_mean.csv`, round-0 models and materialized rounds under
/// `out_dir`. A failing cell is recorded and the grid continues.
GridOutcome run_grid(const store::FeatureStore& store, const GridSpec& grid, const GridOptions& options,
                     const std::filesystem::path& out_dir);

std::string render_results_csv(std::span<const ExperimentResult> results);
nlohmann::json results_to_json(std::span<const ExperimentResult> results);
nlohmann::json result_to_json(const ExperimentResult& result, bool with_rounds);

}  // namespace injuryrisk::evaluation
