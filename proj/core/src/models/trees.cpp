#include "injuryrisk/models/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "injuryrisk/common.hpp"
#include "injuryrisk/models/dataset.hpp"
#include "injuryrisk/random.hpp"

namespace injuryrisk::models {

// ---------------------------------------------------------------------------
// DecisionTree
// ---------------------------------------------------------------------------

const DecisionTree::Node& DecisionTree::leaf_for(const Eigen::VectorXd& row) const {
  const Node* node = &nodes_.at(0);
  while (node->feature >= 0) {
    node = &nodes_[static_cast<std::size_t>(row(node->feature) <= node->threshold ? node->left : node->right)];
  }
  return *node;
}

int DecisionTree::depth() const {
  std::vector<int> depth(nodes_.size(), 0);
  int max_depth = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].feature >= 0) {
      depth[static_cast<std::size_t>(nodes_[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes_[i].right)] = depth[i] + 1;
      max_depth = std::max(max_depth, depth[i] + 1);
    }
  }
  return max_depth;
}

nlohmann::json DecisionTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return nodes;
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
  DecisionTree t;
  for (const auto& n : j) {
    t.nodes_.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                        n.at(4).get<double>()});
  }
  if (t.nodes_.empty()) throw DataError("empty tree in model file");
  for (const auto& n : t.nodes_) {
    const auto size = static_cast<int>(t.nodes_.size());
    if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)) {
      throw DataError("corrupt tree node in model file");
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// RandomForest
// ---------------------------------------------------------------------------

double split_gini(double left_pos, double left_n, double right_pos, double right_n) {
  auto gini = [](double pos, double n) {
    const double q = pos / n;
    return 2.0 * q * (1.0 - q);
  };
  return (left_n * gini(left_pos, left_n) + right_n * gini(right_pos, right_n)) / (left_n + right_n);
}

namespace {

class CartBuilder {
 public:
  CartBuilder(const Eigen::MatrixXd& x, std::span<const int> y, const ForestParams& params, std::size_t mtry, Rng& rng)
      : x_(x), y_(y), params_(params), mtry_(mtry), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    DecisionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  int grow(DecisionTree& tree, std::vector<std::size_t> rows, int depth) {
    const auto id = static_cast<int>(tree.nodes().size());
    tree.nodes().emplace_back();
    const auto n = static_cast<double>(rows.size());
    double pos = 0.0;
    for (auto r : rows) pos += y_[r];
    tree.nodes()[static_cast<std::size_t>(id)].value = pos / n;

    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    if (depth >= params_.max_depth || rows.size() < 2 * min_leaf || pos == 0.0 || pos == n) return id;

    std::vector<Eigen::Index> features(static_cast<std::size_t>(x_.cols()));
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t k = 0; k < mtry_; ++k) {
      std::swap(features[k], features[k + rng_.below(features.size() - k)]);
    }
    features.resize(mtry_);
    std::sort(features.begin(), features.end());

    double best = 2.0 * (pos / n) * (1.0 - pos / n);
    const double threshold_gini = best - 1e-12;
    Eigen::Index best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> column(rows.size());
    for (auto f : features) {
      for (std::size_t k = 0; k < rows.size(); ++k) column[k] = {x_(static_cast<Eigen::Index>(rows[k]), f), y_[rows[k]]};
      std::sort(column.begin(), column.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_pos = 0.0;
      for (std::size_t k = 0; k + 1 < column.size(); ++k) {
        left_pos += column[k].second;
        const std::size_t left_n = k + 1;
        if (column[k].first == column[k + 1].first) continue;
        if (left_n < min_leaf || rows.size() - left_n < min_leaf) continue;
        const double g = split_gini(left_pos, static_cast<double>(left_n), pos - left_pos,
                                    n - static_cast<double>(left_n));
        if (g < best && g < threshold_gini) {
          best = g;
          best_feature = f;
          best_threshold = 0.5 * (column[k].first + column[k + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    auto& node = tree.nodes()[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(best_feature);
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  const ForestParams& params_;
  std::size_t mtry_;
  Rng& rng_;
};

}  // namespace

RandomForest RandomForest::train(const Eigen::MatrixXd& x, std::span<const int> y, const ForestParams& params,
                                 std::uint64_t seed) {
  require_both_classes(y);
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw PreconditionError("forest: x/y length mismatch");
  if (params.trees < 1) throw PreconditionError("forest needs at least one tree");
  const auto p = static_cast<std::size_t>(x.cols());
  std::size_t mtry = params.max_features > 0 ? static_cast<std::size_t>(params.max_features)
                                             : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))));
  mtry = std::clamp<std::size_t>(mtry, 1, std::max<std::size_t>(p, 1));

  RandomForest forest;
  const auto n = static_cast<std::size_t>(x.rows());
  for (int t = 0; t < params.trees; ++t) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.below(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    CartBuilder builder(x, y, params, mtry, rng);
    forest.trees_.push_back(builder.build(std::move(rows)));
  }
  return forest;
}

double RandomForest::score(const Eigen::VectorXd& row) const {
  std::size_t votes = 0;
  for (const auto& t : trees_) votes += t.predict(row) > 0.5;
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"trees", trees}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest f;
  for (const auto& t : j.at("trees")) f.trees_.push_back(DecisionTree::from_json(t));
  if (f.trees_.empty()) throw DataError("forest without trees");
  return f;
}

// ---------------------------------------------------------------------------
// GradientBoosting
// ---------------------------------------------------------------------------

namespace {

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Level-wise exact greedy growth over a global per-feature presort.
DecisionTree grow_boosted_tree(const Eigen::MatrixXd& x, const std::vector<std::vector<std::size_t>>& sorted,
                               const std::vector<double>& grad, const std::vector<double>& hess,
                               const BoostParams& params) {
  const std::size_t n = grad.size();
  DecisionTree tree;
  auto& nodes = tree.nodes();
  std::vector<int> node_of(n, 0);
  std::vector<NodeStats> stats(1);
  for (std::size_t i = 0; i < n; ++i) {
    stats[0].g += grad[i];
    stats[0].h += hess[i];
  }
  nodes.emplace_back();
  std::vector<int> frontier = {0};
  const double lambda = params.l2;
  auto score = [lambda](double g, double h) { return g * g / (h + lambda); };

  for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    std::vector<SplitCandidate> best(nodes.size());
    std::vector<char> active(nodes.size(), 0);
    for (int id : frontier) active[static_cast<std::size_t>(id)] = 1;

    std::vector<NodeStats> left(nodes.size());
    std::vector<double> last(nodes.size());
    std::vector<char> seen(nodes.size());
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      std::fill(left.begin(), left.end(), NodeStats{});
      std::fill(seen.begin(), seen.end(), 0);
      for (std::size_t i : sorted[f]) {
        const auto nd = static_cast<std::size_t>(node_of[i]);
        if (!active[nd]) continue;
        const double v = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
        if (seen[nd] && v > last[nd]) {
          const NodeStats& total = stats[nd];
          const double gl = left[nd].g, hl = left[nd].h;
          const double gr = total.g - gl, hr = total.h - hl;
          if (hl >= params.min_child_weight && hr >= params.min_child_weight) {
            const double gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(total.g, total.h));
            if (gain > best[nd].gain) best[nd] = {gain, static_cast<int>(f), 0.5 * (last[nd] + v)};
          }
        }
        left[nd].g += grad[i];
        left[nd].h += hess[i];
        last[nd] = v;
        seen[nd] = 1;
      }
    }

    std::vector<int> next;
    for (int id : frontier) {
      const auto& cand = best[static_cast<std::size_t>(id)];
      if (cand.feature < 0 || !(cand.gain > 1e-12)) continue;
      const auto l = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      stats.resize(nodes.size());
      auto& node = nodes[static_cast<std::size_t>(id)];
      node.feature = cand.feature;
      node.threshold = cand.threshold;
      node.left = l;
      node.right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& node = nodes[static_cast<std::size_t>(node_of[i])];
      if (node.feature < 0 || !active[static_cast<std::size_t>(node_of[i])]) continue;
      node_of[i] = x(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
      stats[static_cast<std::size_t>(node_of[i])].g += grad[i];
      stats[static_cast<std::size_t>(node_of[i])].h += hess[i];
    }
    frontier = std::move(next);
  }
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    if (nodes[id].feature < 0) nodes[id].value = -stats[id].g / (stats[id].h + lambda);
  }
  return tree;
}

}  // namespace

GradientBoosting GradientBoosting::train(const Eigen::MatrixXd& x, std::span<const int> y, const BoostParams& params) {
  require_both_classes(y);
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw PreconditionError("xgboost: x/y length mismatch");
  const std::size_t n = y.size();
  GradientBoosting model;
  model.learning_rate_ = params.learning_rate;
  const double base_rate = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(n);
  model.base_score_ = std::log(base_rate / (1.0 - base_rate));

  std::vector<std::vector<std::size_t>> sorted(static_cast<std::size_t>(x.cols()));
  for (std::size_t f = 0; f < sorted.size(); ++f) {
    auto& idx = sorted[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return x(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(f)) <
             x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f));
    });
  }

  std::vector<double> margin(n, model.base_score_), grad(n), hess(n);
  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - y[i];
      hess[i] = p * (1.0 - p);
    }
    DecisionTree tree = grow_boosted_tree(x, sorted, grad, hess, params);
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += params.learning_rate * tree.predict(x.row(static_cast<Eigen::Index>(i)).transpose());
    }
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

double GradientBoosting::margin(const Eigen::VectorXd& row) const {
  double m = base_score_;
  for (const auto& t : trees_) m += learning_rate_ * t.predict(row);
  return m;
}

double GradientBoosting::score(const Eigen::VectorXd& row) const { return sigmoid(margin(row)); }

nlohmann::json GradientBoosting::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"base_score", base_score_}, {"learning_rate", learning_rate_}, {"trees", trees}};
}

GradientBoosting GradientBoosting::from_json(const nlohmann::json& j) {
  GradientBoosting m;
  m.base_score_ = j.at("base_score").get<double>();
  m.learning_rate_ = j.at("learning_rate").get<double>();
  for (const auto& t : j.at("trees")) m.trees_.push_back(DecisionTree::from_json(t));
  return m;
}

}  // namespace injuryrisk::models
