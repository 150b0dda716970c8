#include "injuryrisk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "injuryrisk/common.hpp"
#include "injuryrisk/csv.hpp"
#include "injuryrisk/random.hpp"

namespace injuryrisk::evaluation {

namespace fs = std::filesystem;

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw PreconditionError("confusion: " + std::to_string(y_true.size()) + " labels vs " +
                            std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1)) {
      throw PreconditionError("confusion: non-binary value at index " + std::to_string(i));
    }
    if (y_true[i]) {
      ++(y_pred[i] ? cm.tp : cm.fn);
    } else {
      ++(y_pred[i] ? cm.fp : cm.tn);
    }
  }
  return cm;
}

namespace {
double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace

double precision(const ConfusionMatrix& cm) { return ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fp)); }
double tpr(const ConfusionMatrix& cm) { return ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn)); }
double tnr(const ConfusionMatrix& cm) { return ratio(static_cast<double>(cm.tn), static_cast<double>(cm.tn + cm.fp)); }
double f1(const ConfusionMatrix& cm) {
  const double p = precision(cm);
  const double r = tpr(cm);
  return ratio(2.0 * p * r, p + r);
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("trapezoid: x/y length mismatch");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += (x[i] - x[i - 1]) * (y[i] + y[i - 1]) * 0.5;
  return area;
}

RocCurve roc(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) throw PreconditionError("roc: labels and scores differ in length");
  const auto pos = static_cast<std::size_t>(std::count(y_true.begin(), y_true.end(), 1));
  const auto neg = y_true.size() - pos;
  if (pos == 0 || neg == 0) {
    throw PreconditionError(std::string("roc needs both classes; test set has no ") +
                            (pos == 0 ? "positive" : "negative") + " samples");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  RocCurve c;
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      ++(y_true[order[i]] ? tp : fp);
      ++i;
    }
    c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
  }
  c.auc = trapezoid(c.fpr, c.tpr);
  return c;
}

RocCurve mean_roc(std::span<const RocCurve> curves) {
  if (curves.empty()) throw PreconditionError("mean_roc needs at least one curve");
  RocCurve out;
  for (int k = 0; k < kRocGridPoints; ++k) {
    const double x = static_cast<double>(k) / (kRocGridPoints - 1);
    double sum = 0.0;
    for (const auto& c : curves) {
      const auto hi = std::upper_bound(c.fpr.begin(), c.fpr.end(), x) - c.fpr.begin();
      const auto i = static_cast<std::size_t>(hi);
      double t;
      if (i > 0 && c.fpr[i - 1] == x) {
        t = c.tpr[i - 1];
      } else if (i == 0) {
        t = c.tpr.front();
      } else if (i >= c.fpr.size()) {
        t = c.tpr.back();
      } else {
        const double w = (x - c.fpr[i - 1]) / (c.fpr[i] - c.fpr[i - 1]);
        t = c.tpr[i - 1] + w * (c.tpr[i] - c.tpr[i - 1]);
      }
      sum += t;
    }
    out.fpr.push_back(x);
    out.tpr.push_back(sum / static_cast<double>(curves.size()));
  }
  if (out.tpr.front() > 0.0) {
    out.fpr.insert(out.fpr.begin(), 0.0);
    out.tpr.insert(out.tpr.begin(), 0.0);
  }
  out.auc = trapezoid(out.fpr, out.tpr);
  return out;
}

double percent_change(double from, double to) {
  if (from == 0.0) throw PreconditionError("percentage change from 0 is undefined");
  return (to - from) / from * 100.0;
}

RoundResult score_round(int round, std::span<const int> y_true, std::span<const double> scores, double threshold) {
  std::vector<int> pred(scores.size());
  std::transform(scores.begin(), scores.end(), pred.begin(),
                 [threshold](double s) { return models::classify_score(s, threshold); });
  RoundResult r;
  r.round = round;
  r.cm = confusion(y_true, pred);
  r.roc = roc(y_true, scores);
  r.metrics = {precision(r.cm), tpr(r.cm), tnr(r.cm), f1(r.cm), r.roc.auc};
  return r;
}

RoundResult run_round(const fs::path& round_dir, const models::ModelConfig& config, int round,
                      std::optional<models::TrainedModel>* trained) {
  try {
    const auto train = windowing::read_round_csv(round_dir / "train.csv");
    const auto test = windowing::read_round_csv(round_dir / "test.csv");
    if (train.names != test.names) throw DataError("train.csv and test.csv have different feature columns");
    const int n_in = windowing::infer_n_in(train.names);
    const auto train_set = models::Dataset::from_samples(train.names, n_in, train.samples);
    const auto test_set = models::Dataset::from_samples(test.names, n_in, test.samples);
    models::ModelConfig cfg = config;
    cfg.seed = Rng::mix(config.seed, static_cast<std::uint64_t>(round));
    auto model = models::TrainedModel::train(train_set, cfg);
    const Eigen::VectorXd scores = model.score_batch(test_set.x);
    auto result = score_round(round, test_set.y, std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())));
    if (trained) *trained = std::move(model);
    return result;
  } catch (const std::exception& e) {
    throw Error("round " + std::to_string(round) + ": " + e.what());
  }
}

std::string CellConfig::features_label() const {
  std::string out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i) out += ',';
    out += store::to_string(features[i]);
  }
  return out;
}

void aggregate(ExperimentResult& result) {
  const auto& rounds = result.rounds;
  if (rounds.empty()) throw PreconditionError("cannot aggregate an experiment without rounds");
  const auto n = static_cast<double>(rounds.size());
  auto field = [](Metrics& m, int k) -> double& {
    switch (k) {
      case 0: return m.precision;
      case 1: return m.tpr;
      case 2: return m.tnr;
      case 3: return m.f1;
      default: return m.auc;
    }
  };
  for (int k = 0; k < 5; ++k) {
    double sum = 0.0, lo = INFINITY, hi = -INFINITY;
    for (auto r : rounds) {
      const double v = field(r.metrics, k);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = std::clamp(sum / n, lo, hi);
    double ss = 0.0;
    for (auto r : rounds) ss += (field(r.metrics, k) - mean) * (field(r.metrics, k) - mean);
    field(result.mean, k) = mean;
    field(result.sd, k) = rounds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  std::vector<RocCurve> curves;
  for (const auto& r : rounds) curves.push_back(r.roc);
  result.mean_roc = mean_roc(curves);
}

std::string format_metric(double value) { return format_float_repr(std::round(value * 1000.0) / 1000.0); }

std::string format_result_row(const CellConfig& cell, const Metrics& mean) {
  csv::Row row = {cell.id,
                  cell.data,
                  cell.data == "R" ? std::string() : format_float_repr(cell.event_proportion),
                  format_float_repr(cell.n_in),
                  format_float_repr(cell.n_out),
                  cell.features_label(),
                  std::string(models::to_string(cell.model)),
                  format_metric(mean.precision),
                  format_metric(mean.tpr),
                  format_metric(mean.f1),
                  format_metric(mean.auc)};
  return csv::join(row);
}

std::vector<CellConfig> enumerate_cells(const GridSpec& grid) {
  std::vector<CellConfig> cells;
  for (const auto& data : grid.data) {
    if (data != "R" && data != "R+S") throw ConfigError("grid data entry must be \"R\" or \"R+S\", got '" + data + "'");
    const std::vector<double> events = data == "R" ? std::vector<double>{0.0} : grid.event_proportions;
    for (double event : events) {
      for (int n_in : grid.inputs) {
        for (int n_out : grid.outputs) {
          for (const auto& features : grid.feature_sets) {
            for (auto model : grid.models) {
              CellConfig c;
              c.id = "I-" + std::to_string(cells.size() + 1);
              c.data = data;
              c.event_proportion = event;
              c.n_in = n_in;
              c.n_out = n_out;
              c.features = features;
              c.model = model;
              cells.push_back(std::move(c));
            }
          }
        }
      }
    }
  }
  return cells;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"tpr", m.tpr}, {"tnr", m.tnr}, {"f1", m.f1}, {"auc", m.auc}};
}

std::string rounds_key(const CellConfig& c) {
  std::string key = (c.data == "R" ? "R" : "RS_e" + format_double(c.event_proportion)) + "_in" +
                    std::to_string(c.n_in) + "_out" + std::to_string(c.n_out) + "_";
  for (auto g : c.features) key += store::to_string(g);
  return key;
}

std::string roc_csv(const RocCurve& c) {
  std::string out = "fpr,tpr\n";
  for (std::size_t i = 0; i < c.fpr.size(); ++i) out += format_double(c.fpr[i]) + "," + format_double(c.tpr[i]) + "\n";
  return out;
}

}  // namespace

nlohmann::json result_to_json(const ExperimentResult& r, bool with_rounds) {
  nlohmann::json j = {{"id", r.config.id},
                      {"data", r.config.data},
                      {"event", r.config.event_proportion},
                      {"input", r.config.n_in},
                      {"output", r.config.n_out},
                      {"features", r.config.features_label()},
                      {"model", models::to_string(r.config.model)},
                      {"status", r.error ? "failed" : "ok"}};
  if (r.error) {
    j["error"] = *r.error;
    return j;
  }
  j["mean"] = metrics_json(r.mean);
  j["sd"] = metrics_json(r.sd);
  j["rounds_run"] = r.rounds.size();
  j["model_file"] = r.model_file;
  j["mean_roc"] = {{"fpr", r.mean_roc.fpr}, {"tpr", r.mean_roc.tpr}, {"auc", r.mean_roc.auc}};
  if (with_rounds) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& rr : r.rounds) {
      rounds.push_back({{"round", rr.round},
                        {"tp", rr.cm.tp},
                        {"fp", rr.cm.fp},
                        {"tn", rr.cm.tn},
                        {"fn", rr.cm.fn},
                        {"metrics", metrics_json(rr.metrics)}});
    }
    j["rounds"] = rounds;
  }
  return j;
}

std::string render_results_csv(std::span<const ExperimentResult> results) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : results) {
    if (!r.error) out += format_result_row(r.config, r.mean) + "\n";
  }
  return out;
}

nlohmann::json results_to_json(std::span<const ExperimentResult> results) {
  nlohmann::json cells = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& r : results) {
    cells.push_back(result_to_json(r, true));
    failed += r.error.has_value();
  }
  return {{"cells", cells}, {"failed", failed}};
}

GridOutcome run_grid(const store::FeatureStore& store, const GridSpec& grid, const GridOptions& options,
                     const fs::path& out_dir) {
  if (grid.rounds < 1) throw ConfigError("grid rounds must be >= 1");
  auto cells = enumerate_cells(grid);
  if (!options.only_cells.empty()) {
    std::vector<CellConfig> selected;
    for (const auto& id : options.only_cells) {
      auto it = std::find_if(cells.begin(), cells.end(), [&](const auto& c) { return c.id == id; });
      if (it == cells.end()) {
        throw ConfigError("unknown grid cell '" + id + "' (grid has I-1..I-" + std::to_string(cells.size()) + ")");
      }
      selected.push_back(*it);
    }
    cells = std::move(selected);
  }

  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!options.force) throw PreconditionError(out_dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir);

  std::map<std::string, windowing::WindowSet> windows_cache;
  std::map<std::string, std::optional<std::string>> rounds_cache;  // key -> materialization error
  GridOutcome outcome;
  for (const auto& cell : cells) {
    ExperimentResult result;
    result.config = cell;
    try {
      windowing::WindowSpec spec = options.window;
      spec.n_in = cell.n_in;
      spec.n_out = cell.n_out;
      spec.features = cell.features;
      spec.rounds = grid.rounds;
      const auto key = rounds_key(cell);
      const auto rounds_dir = out_dir / "rounds" / key;
      if (!rounds_cache.contains(key)) {
        try {
          std::string wkey = std::to_string(cell.n_in) + "_" + std::to_string(cell.n_out) + "_" + cell.features_label();
          if (!windows_cache.contains(wkey)) windows_cache.emplace(wkey, windowing::build_windows(store, spec));
          windowing::SynthesisOptions synth = options.synthesis;
          synth.enabled = cell.data == "R+S";
          synth.event_proportion = cell.event_proportion;
          windowing::materialize_rounds(windows_cache.at(wkey), spec, synth, rounds_dir, true);
          rounds_cache[key] = std::nullopt;
        } catch (const std::exception& e) {
          rounds_cache[key] = std::string("materializing rounds: ") + e.what();
        }
      }
      if (const auto& err = rounds_cache.at(key)) throw Error(*err);

      models::ModelConfig cfg = options.model_defaults;
      cfg.kind = cell.model;
      for (int k = 0; k < grid.rounds; ++k) {
        std::optional<models::TrainedModel> trained;
        result.rounds.push_back(
            run_round(rounds_dir / ("round_" + std::to_string(k)), cfg, k, k == 0 ? &trained : nullptr));
        if (trained) {
          const auto path = trained->save(out_dir / "models");
          result.model_file = fs::relative(path, out_dir).generic_string();
        }
      }
      aggregate(result);
      csv::write_text(out_dir / "cells" / cell.id / "roc_mean.csv", roc_csv(result.mean_roc));
    } catch (const std::exception& e) {
      result.rounds.clear();
      result.error = e.what();
      ++outcome.failed;
    }
    outcome.results.push_back(std::move(result));
  }

  csv::write_text(out_dir / "results.csv", render_results_csv(outcome.results));
  csv::write_text(out_dir / "results.json", results_to_json(outcome.results).dump(2) + "\n");
  return outcome;
}

}  // namespace injuryrisk::evaluation
