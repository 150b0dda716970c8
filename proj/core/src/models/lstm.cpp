#include "injuryrisk/models/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "injuryrisk/common.hpp"
#include "injuryrisk/models/dataset.hpp"
#include "injuryrisk/random.hpp"

namespace injuryrisk::models {

SequenceBatch SequenceBatch::from_flat(const Eigen::MatrixXd& flat, int n_in) {
  if (n_in < 1 || flat.cols() % n_in != 0) {
    throw PreconditionError("cannot fold " + std::to_string(flat.cols()) + " columns into " + std::to_string(n_in) +
                            " steps");
  }
  const Eigen::Index d = flat.cols() / n_in;
  SequenceBatch b;
  for (int t = 0; t < n_in; ++t) {
    Eigen::MatrixXd step(flat.rows(), d);
    for (Eigen::Index f = 0; f < d; ++f) step.col(f) = flat.col(f * n_in + t);
    b.steps.push_back(std::move(step));
  }
  return b;
}

SequenceBatch SequenceBatch::rows(std::span<const Eigen::Index> idx) const {
  SequenceBatch out;
  for (const auto& step : steps) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(idx.size()), step.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = step.row(idx[i]);
    out.steps.push_back(std::move(s));
  }
  return out;
}

namespace {

Eigen::MatrixXd sigmoid_m(const Eigen::MatrixXd& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

struct Trace {
  std::vector<Eigen::MatrixXd> h;  // h[0] = initial state, h[t + 1] after step t
  std::vector<Eigen::MatrixXd> c;
  std::vector<Eigen::MatrixXd> i, f, o, g;
};

}  // namespace

Lstm Lstm::initialise(int features, const LstmParams& params, std::uint64_t seed) {
  if (features < 1 || params.hidden < 1) throw PreconditionError("lstm needs at least one feature and hidden unit");
  const Eigen::Index h = params.hidden;
  Rng rng(seed);
  Lstm m;
  auto fill = [&](Eigen::MatrixXd& w, Eigen::Index r, Eigen::Index c) {
    w.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) w(i, j) = rng.uniform(-params.init_scale, params.init_scale);
  };
  fill(m.wx_, 4 * h, features);
  fill(m.wh_, 4 * h, h);
  m.b_.resize(4 * h);
  for (Eigen::Index i = 0; i < 4 * h; ++i) m.b_(i) = rng.uniform(-params.init_scale, params.init_scale);
  m.b_.segment(h, h).setConstant(params.forget_bias);
  m.v_.resize(h);
  for (Eigen::Index i = 0; i < h; ++i) m.v_(i) = rng.uniform(-params.init_scale, params.init_scale);
  m.c_ = 0.0;
  return m;
}

static Trace forward(const Eigen::MatrixXd& wx, const Eigen::MatrixXd& wh, const Eigen::VectorXd& b,
                     const SequenceBatch& x) {
  const Eigen::Index n = x.samples();
  const Eigen::Index h = wh.cols();
  Trace tr;
  tr.h.push_back(Eigen::MatrixXd::Zero(n, h));
  tr.c.push_back(Eigen::MatrixXd::Zero(n, h));
  for (const auto& step : x.steps) {
    if (step.cols() != wx.cols()) throw PreconditionError("lstm input width mismatch");
    Eigen::MatrixXd z = step * wx.transpose() + tr.h.back() * wh.transpose();
    z.rowwise() += b.transpose();
    tr.i.push_back(sigmoid_m(z.middleCols(0, h)));
    tr.f.push_back(sigmoid_m(z.middleCols(h, h)));
    tr.o.push_back(sigmoid_m(z.middleCols(2 * h, h)));
    tr.g.push_back(z.middleCols(3 * h, h).array().tanh().matrix());
    Eigen::MatrixXd c = tr.f.back().cwiseProduct(tr.c.back()) + tr.i.back().cwiseProduct(tr.g.back());
    tr.h.push_back(tr.o.back().cwiseProduct(c.array().tanh().matrix()));
    tr.c.push_back(std::move(c));
  }
  return tr;
}

Eigen::VectorXd Lstm::logits(const SequenceBatch& x) const {
  if (x.steps.empty()) throw PreconditionError("lstm input has no steps");
  const Trace tr = forward(wx_, wh_, b_, x);
  return (tr.h.back() * v_).array() + c_;
}

Eigen::VectorXd Lstm::scores(const SequenceBatch& x) const {
  return logits(x).unaryExpr([](double z) { return sigmoid(z); });
}

double Lstm::loss(const SequenceBatch& x, std::span<const int> y) const {
  const Eigen::VectorXd z = logits(x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += y[static_cast<std::size_t>(i)] ? softplus(-z(i)) : softplus(z(i));
  return total / static_cast<double>(z.size());
}

Eigen::VectorXd Lstm::gradient(const SequenceBatch& x, std::span<const int> y) const {
  const Eigen::Index n = x.samples();
  const Eigen::Index h = wh_.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw PreconditionError("lstm: x/y length mismatch");
  const Trace tr = forward(wx_, wh_, b_, x);
  const auto steps = x.steps.size();

  Eigen::VectorXd dlogit = (tr.h.back() * v_).array() + c_;
  for (Eigen::Index i = 0; i < n; ++i) {
    dlogit(i) = (sigmoid(dlogit(i)) - y[static_cast<std::size_t>(i)]) / static_cast<double>(n);
  }
  Eigen::MatrixXd dwx = Eigen::MatrixXd::Zero(wx_.rows(), wx_.cols());
  Eigen::MatrixXd dwh = Eigen::MatrixXd::Zero(wh_.rows(), wh_.cols());
  Eigen::VectorXd db = Eigen::VectorXd::Zero(b_.size());
  const Eigen::VectorXd dv = tr.h.back().transpose() * dlogit;
  const double dc = dlogit.sum();

  Eigen::MatrixXd dh = dlogit * v_.transpose();
  Eigen::MatrixXd dcell = Eigen::MatrixXd::Zero(n, h);
  Eigen::MatrixXd dz(n, 4 * h);
  for (std::size_t t = steps; t-- > 0;) {
    const Eigen::ArrayXXd tanh_c = tr.c[t + 1].array().tanh();
    const Eigen::ArrayXXd i = tr.i[t].array(), f = tr.f[t].array(), o = tr.o[t].array(), g = tr.g[t].array();
    const Eigen::ArrayXXd dct = dcell.array() + dh.array() * o * (1.0 - tanh_c.square());
    dz.middleCols(0, h) = (dct * g * i * (1.0 - i)).matrix();
    dz.middleCols(h, h) = (dct * tr.c[t].array() * f * (1.0 - f)).matrix();
    dz.middleCols(2 * h, h) = (dh.array() * tanh_c * o * (1.0 - o)).matrix();
    dz.middleCols(3 * h, h) = (dct * i * (1.0 - g.square())).matrix();
    dcell = (dct * f).matrix();
    dwx.noalias() += dz.transpose() * x.steps[t];
    dwh.noalias() += dz.transpose() * tr.h[t];
    db += dz.colwise().sum().transpose();
    dh = dz * wh_;
  }

  Eigen::VectorXd grad(wx_.size() + wh_.size() + b_.size() + v_.size() + 1);
  Eigen::Index k = 0;
  grad.segment(k, dwx.size()) = Eigen::Map<const Eigen::VectorXd>(dwx.data(), dwx.size());
  k += dwx.size();
  grad.segment(k, dwh.size()) = Eigen::Map<const Eigen::VectorXd>(dwh.data(), dwh.size());
  k += dwh.size();
  grad.segment(k, db.size()) = db;
  k += db.size();
  grad.segment(k, dv.size()) = dv;
  k += dv.size();
  grad(k) = dc;
  return grad;
}

Eigen::VectorXd Lstm::flat() const {
  Eigen::VectorXd theta(wx_.size() + wh_.size() + b_.size() + v_.size() + 1);
  Eigen::Index k = 0;
  theta.segment(k, wx_.size()) = Eigen::Map<const Eigen::VectorXd>(wx_.data(), wx_.size());
  k += wx_.size();
  theta.segment(k, wh_.size()) = Eigen::Map<const Eigen::VectorXd>(wh_.data(), wh_.size());
  k += wh_.size();
  theta.segment(k, b_.size()) = b_;
  k += b_.size();
  theta.segment(k, v_.size()) = v_;
  k += v_.size();
  theta(k) = c_;
  return theta;
}

void Lstm::set_flat(const Eigen::VectorXd& theta) {
  if (theta.size() != wx_.size() + wh_.size() + b_.size() + v_.size() + 1) {
    throw PreconditionError("lstm parameter vector has the wrong length");
  }
  Eigen::Index k = 0;
  Eigen::Map<Eigen::VectorXd>(wx_.data(), wx_.size()) = theta.segment(k, wx_.size());
  k += wx_.size();
  Eigen::Map<Eigen::VectorXd>(wh_.data(), wh_.size()) = theta.segment(k, wh_.size());
  k += wh_.size();
  b_ = theta.segment(k, b_.size());
  k += b_.size();
  v_ = theta.segment(k, v_.size());
  k += v_.size();
  c_ = theta(k);
}

Lstm Lstm::train(const SequenceBatch& x, std::span<const int> y, const LstmParams& params, std::uint64_t seed) {
  require_both_classes(y);
  if (static_cast<std::size_t>(x.samples()) != y.size()) throw PreconditionError("lstm: x/y length mismatch");
  Lstm m = initialise(static_cast<int>(x.features()), params, seed);

  SequenceBatch fit_x = x;
  std::vector<int> fit_y(y.begin(), y.end());
  SequenceBatch val_x;
  std::vector<int> val_y;
  if (params.early_stopping) {
    std::vector<Eigen::Index> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(seed, 1);
    rng.shuffle(std::span<Eigen::Index>(order));
    const auto n_val = static_cast<std::size_t>(std::llround(params.validation_fraction * static_cast<double>(y.size())));
    if (n_val >= 1 && n_val < y.size()) {
      std::vector<Eigen::Index> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
      std::vector<Eigen::Index> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
      std::sort(val.begin(), val.end());
      std::sort(fit.begin(), fit.end());
      val_x = x.rows(val);
      fit_x = x.rows(fit);
      val_y.clear();
      fit_y.clear();
      for (auto i : val) val_y.push_back(y[static_cast<std::size_t>(i)]);
      for (auto i : fit) fit_y.push_back(y[static_cast<std::size_t>(i)]);
    }
  }
  const bool validate = !val_y.empty();

  Eigen::VectorXd theta = m.flat();
  Eigen::VectorXd best = theta;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    const double l = m.loss(fit_x, fit_y);
    if (!std::isfinite(l)) throw Error("lstm: non-finite loss at epoch " + std::to_string(epoch));
    m.loss_history_.push_back(l);
    Eigen::VectorXd grad = m.gradient(fit_x, fit_y);
    const double norm = grad.norm();
    if (norm > params.clip_norm) grad *= params.clip_norm / norm;
    theta -= params.learning_rate * grad;
    m.set_flat(theta);
    if (validate) {
      const double vl = m.loss(val_x, val_y);
      if (vl < best_val) {
        best_val = vl;
        best = theta;
        since_best = 0;
      } else if (++since_best >= params.patience) {
        break;
      }
    }
  }
  if (validate) m.set_flat(best);
  m.loss_history_.push_back(m.loss(fit_x, fit_y));
  return m;
}

nlohmann::json Lstm::to_json() const {
  return {{"wx", models::to_json(wx_)}, {"wh", models::to_json(wh_)}, {"b", models::to_json(b_)},
          {"v", models::to_json(v_)},   {"c", c_}};
}

Lstm Lstm::from_json(const nlohmann::json& j) {
  Lstm m;
  m.wx_ = matrix_from_json(j.at("wx"));
  m.wh_ = matrix_from_json(j.at("wh"));
  m.b_ = vector_from_json(j.at("b"));
  m.v_ = vector_from_json(j.at("v"));
  m.c_ = j.at("c").get<double>();
  const auto h = m.v_.size();
  if (m.wh_.rows() != 4 * h || m.wh_.cols() != h || m.wx_.rows() != 4 * h || m.b_.size() != 4 * h) {
    throw DataError("lstm parameter shapes are inconsistent");
  }
  return m;
}

}  // namespace injuryrisk::models
