#include "injuryrisk/models/model.hpp"

#include <fstream>
#include <sstream>

#include "injuryrisk/common.hpp"
#include "injuryrisk/csv.hpp"
#include "injuryrisk/hash.hpp"

namespace injuryrisk::models {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::logit: return "logit";
    case ModelKind::lstm: return "lstm";
    case ModelKind::randomforest: return "randomforest";
    case ModelKind::svc: return "svc";
    case ModelKind::xgboost: return "xgboost";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : kAllModels) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(text) +
                    "' (expected logit, lstm, randomforest, svc or xgboost)");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json params;
  switch (kind) {
    case ModelKind::logit:
      params = {{"l2", logit.l2},
                {"learning_rate", logit.learning_rate},
                {"max_epochs", logit.max_epochs},
                {"gradient_tolerance", logit.gradient_tolerance}};
      break;
    case ModelKind::svc:
      params = {{"l2", svc.l2}, {"learning_rate", svc.learning_rate}, {"passes", svc.passes}};
      break;
    case ModelKind::randomforest:
      params = {{"trees", forest.trees},
                {"max_depth", forest.max_depth},
                {"min_leaf", forest.min_leaf},
                {"max_features", forest.max_features},
                {"bootstrap", forest.bootstrap}};
      break;
    case ModelKind::xgboost:
      params = {{"rounds", boost.rounds},
                {"max_depth", boost.max_depth},
                {"learning_rate", boost.learning_rate},
                {"l2", boost.l2},
                {"min_child_weight", boost.min_child_weight}};
      break;
    case ModelKind::lstm:
      params = {{"hidden", lstm.hidden},
                {"learning_rate", lstm.learning_rate},
                {"epochs", lstm.epochs},
                {"clip_norm", lstm.clip_norm},
                {"init_scale", lstm.init_scale},
                {"forget_bias", lstm.forget_bias},
                {"early_stopping", lstm.early_stopping},
                {"validation_fraction", lstm.validation_fraction},
                {"patience", lstm.patience}};
      break;
  }
  return {{"kind", to_string(kind)}, {"seed", seed}, {"params", params}};
}

TrainedModel TrainedModel::train(const Dataset& train, const ModelConfig& config) {
  if (train.rows() == 0) throw PreconditionError("cannot train on an empty dataset");
  if (train.names.size() != train.cols()) throw PreconditionError("dataset names do not match its columns");
  TrainedModel m;
  m.kind_ = config.kind;
  m.names_ = train.names;
  m.n_in_ = train.n_in;
  m.scaler_ = Scaler::fit(train.x);
  const Eigen::MatrixXd x = m.scaler_.transform(train.x);
  const std::span<const int> y(train.y);
  switch (config.kind) {
    case ModelKind::logit: m.impl_ = LogisticRegression::train(x, y, config.logit); break;
    case ModelKind::svc: m.impl_ = LinearSvc::train(x, y, config.svc, config.seed); break;
    case ModelKind::randomforest: m.impl_ = RandomForest::train(x, y, config.forest, config.seed); break;
    case ModelKind::xgboost: m.impl_ = GradientBoosting::train(x, y, config.boost); break;
    case ModelKind::lstm:
      m.impl_ = Lstm::train(SequenceBatch::from_flat(x, train.n_in), y, config.lstm, config.seed);
      break;
  }
  m.manifest_ = {{"config", config.to_json()},
                 {"data_hash", train.hash()},
                 {"train_rows", train.rows()},
                 {"train_positives", train.positives()}};
  return m;
}

void TrainedModel::check_features(std::span<const std::string> names) const {
  if (names.size() != names_.size()) {
    throw PreconditionError("model expects " + std::to_string(names_.size()) + " features, got " +
                            std::to_string(names.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != names_[i]) {
      throw PreconditionError("feature " + std::to_string(i) + " is '" + names[i] + "', model expects '" + names_[i] +
                              "'");
    }
  }
}

Eigen::VectorXd TrainedModel::score_batch(const Eigen::MatrixXd& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != names_.size()) {
    throw PreconditionError("model expects " + std::to_string(names_.size()) + " features, got " +
                            std::to_string(rows.cols()));
  }
  const Eigen::MatrixXd x = scaler_.transform(rows);
  Eigen::VectorXd out(x.rows());
  if (const auto* lstm = std::get_if<Lstm>(&impl_)) return lstm->scores(SequenceBatch::from_flat(x, n_in_));
  std::visit(
      [&](const auto& model) {
        using T = std::decay_t<decltype(model)>;
        if constexpr (!std::is_same_v<T, Lstm>) {
          for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = model.score(x.row(i).transpose());
        }
      },
      impl_);
  return out;
}

double TrainedModel::score(std::span<const double> row) const {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(row.size()));
  for (std::size_t j = 0; j < row.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = row[j];
  return score_batch(m)(0);
}

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json params = std::visit([](const auto& model) { return model.to_json(); }, impl_);
  return {{"format", 1},     {"kind", to_string(kind_)}, {"names", names_},      {"n_in", n_in_},
          {"scaler", scaler_.to_json()}, {"params", params}, {"manifest", manifest_}};
}

std::string TrainedModel::id() const {
  Fnv1a h;
  h.add(to_json().dump());
  return "model_" + std::string(to_string(kind_)) + "_" + h.hex();
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  try {
    TrainedModel m;
    m.kind_ = parse_model_kind(j.at("kind").get<std::string>());
    m.names_ = j.at("names").get<std::vector<std::string>>();
    m.n_in_ = j.at("n_in").get<int>();
    m.scaler_ = Scaler::from_json(j.at("scaler"));
    m.manifest_ = j.value("manifest", nlohmann::json::object());
    const auto& p = j.at("params");
    switch (m.kind_) {
      case ModelKind::logit: m.impl_ = LogisticRegression::from_json(p); break;
      case ModelKind::svc: m.impl_ = LinearSvc::from_json(p); break;
      case ModelKind::randomforest: m.impl_ = RandomForest::from_json(p); break;
      case ModelKind::xgboost: m.impl_ = GradientBoosting::from_json(p); break;
      case ModelKind::lstm: m.impl_ = Lstm::from_json(p); break;
    }
    if (static_cast<std::size_t>(m.scaler_.mean().size()) != m.names_.size()) {
      throw DataError("scaler width does not match feature names");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

std::filesystem::path TrainedModel::save(const std::filesystem::path& dir) const {
  const auto path = dir / (id() + ".json");
  csv::write_text(path, to_json().dump() + "\n");
  return path;
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace injuryrisk::models
