#include "injuryrisk/models/dataset.hpp"

#include <algorithm>

#include "injuryrisk/hash.hpp"

namespace injuryrisk::models {

Dataset Dataset::from_samples(std::vector<std::string> names, int n_in,
                              std::span<const windowing::WindowSample> samples) {
  Dataset d;
  d.names = std::move(names);
  d.n_in = n_in;
  const auto p = static_cast<Eigen::Index>(d.names.size());
  d.x.resize(static_cast<Eigen::Index>(samples.size()), p);
  d.y.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<Eigen::Index>(samples[i].x.size()) != p) {
      throw PreconditionError("sample " + std::to_string(i) + " has " + std::to_string(samples[i].x.size()) +
                              " features, expected " + std::to_string(p));
    }
    for (Eigen::Index j = 0; j < p; ++j) d.x(static_cast<Eigen::Index>(i), j) = samples[i].x[static_cast<std::size_t>(j)];
    d.y.push_back(samples[i].label);
  }
  return d;
}

std::size_t Dataset::positives() const noexcept {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

std::string Dataset::hash() const {
  Fnv1a h;
  for (const auto& n : names) h.add(n).add(std::string_view(","));
  h.add(static_cast<std::uint64_t>(n_in)).add(static_cast<std::uint64_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) h.add(x(i, j));
    h.add(static_cast<std::uint64_t>(y[static_cast<std::size_t>(i)]));
  }
  return h.hex();
}

void require_both_classes(std::span<const int> y) {
  const bool pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool neg = std::find(y.begin(), y.end(), 0) != y.end();
  if (!pos || !neg) {
    throw PreconditionError(std::string("training data must contain both classes; missing the ") +
                            (pos ? "negative" : "positive") + " class");
  }
}

Scaler Scaler::fit(const Eigen::MatrixXd& train_x) {
  if (train_x.rows() == 0) throw PreconditionError("cannot fit a scaler on an empty matrix");
  Scaler s;
  s.mean_ = train_x.colwise().mean().transpose();
  s.sd_.resize(train_x.cols());
  const auto n = static_cast<double>(train_x.rows());
  for (Eigen::Index j = 0; j < train_x.cols(); ++j) {
    double sd = 0.0;
    if (train_x.rows() > 1) sd = std::sqrt((train_x.col(j).array() - s.mean_(j)).square().sum() / (n - 1.0));
    s.sd_(j) = sd < kMinSd ? 1.0 : sd;
  }
  return s;
}

Eigen::MatrixXd Scaler::transform(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean_.size()) throw PreconditionError("scaler dimension mismatch");
  return (x.rowwise() - mean_.transpose()).array().rowwise() / sd_.transpose().array();
}

Eigen::VectorXd Scaler::transform_row(std::span<const double> row) const {
  if (static_cast<Eigen::Index>(row.size()) != mean_.size()) throw PreconditionError("scaler dimension mismatch");
  Eigen::VectorXd out(mean_.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = (row[static_cast<std::size_t>(j)] - mean_(j)) / sd_(j);
  return out;
}

nlohmann::json Scaler::to_json() const { return {{"mean", models::to_json(mean_)}, {"sd", models::to_json(sd_)}}; }

Scaler Scaler::from_json(const nlohmann::json& j) {
  Scaler s;
  s.mean_ = vector_from_json(j.at("mean"));
  s.sd_ = vector_from_json(j.at("sd"));
  if (s.mean_.size() != s.sd_.size()) throw DataError("scaler mean/sd length mismatch");
  return s;
}

nlohmann::json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const auto cols = rows.empty() ? 0 : rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw DataError("ragged matrix in model file");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  }
  return m;
}

}  // namespace injuryrisk::models
