#include "adbn/rbm.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "adbn/adaptive.hpp"
#include "adbn/error.hpp"

namespace adbn {

namespace {

void require_length(const Vector& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n)
    raise(ErrorKind::Dimension,
          fmt::format("{}: expected length {}, got {}", what, n, v.size()));
}

Vector bits_of(std::uint64_t state, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = (state >> i) & 1U;
  return v;
}

double log_sum_exp(const std::vector<double>& xs) {
  const double hi = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

Matrix sample_bernoulli(const Matrix& p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix out(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c) out(r, c) = u(rng) < p(r, c) ? 1.0 : 0.0;
  return out;
}

Matrix logistic(const Matrix& x) {
  return x.unaryExpr([](double a) { return sigmoid(a); });
}

}  // namespace

Rbm::Rbm(std::size_t n_visible, std::size_t n_hidden, std::uint64_t seed) {
  if (n_visible == 0 || n_hidden == 0)
    raise(ErrorKind::InvalidArgument,
          fmt::format("rbm: dimensions must be positive (got {}x{})", n_visible, n_hidden));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  w_.resize(static_cast<Eigen::Index>(n_visible), static_cast<Eigen::Index>(n_hidden));
  // Column-major fill order: neuron by neuron.
  for (Eigen::Index j = 0; j < w_.cols(); ++j)
    for (Eigen::Index i = 0; i < w_.rows(); ++i) w_(i, j) = normal(rng);
  b_ = Vector::Zero(w_.rows());
  c_ = Vector::Zero(w_.cols());
}

Rbm Rbm::from_parameters(Matrix weights, Vector visible_bias, Vector hidden_bias) {
  if (weights.rows() == 0 || weights.cols() == 0)
    raise(ErrorKind::InvalidArgument, "rbm: dimensions must be positive");
  if (visible_bias.size() != weights.rows() || hidden_bias.size() != weights.cols())
    raise(ErrorKind::Dimension,
          fmt::format("rbm: weights {}x{} inconsistent with biases ({}, {})", weights.rows(),
                      weights.cols(), visible_bias.size(), hidden_bias.size()));
  Rbm m;
  m.w_ = std::move(weights);
  m.b_ = std::move(visible_bias);
  m.c_ = std::move(hidden_bias);
  return m;
}

double Rbm::energy(const Vector& v, const Vector& h) const {
  require_length(v, n_visible(), "energy: visible vector");
  require_length(h, n_hidden(), "energy: hidden vector");
  return -b_.dot(v) - c_.dot(h) - v.dot(w_ * h);
}

Vector Rbm::hidden_input(const Vector& v) const {
  require_length(v, n_visible(), "hidden_input");
  const Eigen::Index nv = w_.rows();
  Vector a(w_.cols());
  for (Eigen::Index j = 0; j < w_.cols(); ++j) {
    double acc = c_[j];
    for (Eigen::Index i = 0; i < nv; ++i) acc += v[i] * w_(i, j);
    a[j] = acc;
  }
  return a;
}

double Rbm::free_energy(const Vector& v) const {
  require_length(v, n_visible(), "free_energy");
  const Vector a = hidden_input(v);
  double f = -b_.dot(v);
  for (Eigen::Index j = 0; j < a.size(); ++j) f -= softplus(a[j]);
  return f;
}

Vector Rbm::prob_h_given_v(const Vector& v) const {
  Vector a = hidden_input(v);
  for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = sigmoid(a[j]);
  return a;
}

Vector Rbm::prob_v_given_h(const Vector& h) const {
  require_length(h, n_hidden(), "prob_v_given_h");
  const Eigen::Index nh = w_.cols();
  Vector p(w_.rows());
  for (Eigen::Index i = 0; i < w_.rows(); ++i) {
    double acc = b_[i];
    for (Eigen::Index j = 0; j < nh; ++j) acc += w_(i, j) * h[j];
    p[i] = sigmoid(acc);
  }
  return p;
}

std::size_t Rbm::append_hidden(const Vector& column, double bias) {
  require_length(column, n_visible(), "append_hidden: column");
  const Eigen::Index j = w_.cols();
  w_.conservativeResize(Eigen::NoChange, j + 1);
  w_.col(j) = column;
  c_.conservativeResize(j + 1);
  c_[j] = bias;
  return static_cast<std::size_t>(j);
}

void Rbm::remove_hidden(std::size_t j) {
  if (j >= n_hidden())
    raise(ErrorKind::InvalidArgument,
          fmt::format("remove_hidden: index {} out of range ({} hidden)", j, n_hidden()));
  if (n_hidden() < 2) raise(ErrorKind::State, "remove_hidden: cannot remove the last hidden unit");
  const auto jj = static_cast<Eigen::Index>(j);
  const Eigen::Index tail = w_.cols() - jj - 1;
  if (tail > 0) {
    w_.middleCols(jj, tail) = w_.rightCols(tail).eval();
    c_.segment(jj, tail) = c_.tail(tail).eval();
  }
  w_.conservativeResize(Eigen::NoChange, w_.cols() - 1);
  c_.conservativeResize(c_.size() - 1);
}

std::size_t Rbm::append_visible(const Vector& row, double bias) {
  require_length(row, n_hidden(), "append_visible: row");
  const Eigen::Index i = w_.rows();
  w_.conservativeResize(i + 1, Eigen::NoChange);
  w_.row(i) = row.transpose();
  b_.conservativeResize(i + 1);
  b_[i] = bias;
  return static_cast<std::size_t>(i);
}

void Rbm::apply_update(const Matrix& dw, const Vector& db, const Vector& dc) {
  if (dw.rows() != w_.rows() || dw.cols() != w_.cols() || db.size() != b_.size() ||
      dc.size() != c_.size())
    raise(ErrorKind::Dimension, "apply_update: update shape does not match model");
  w_ += dw;
  b_ += db;
  c_ += dc;
}

bool Rbm::all_finite() const { return w_.allFinite() && b_.allFinite() && c_.allFinite(); }

bool operator==(const Rbm& a, const Rbm& b) {
  return a.w_.rows() == b.w_.rows() && a.w_.cols() == b.w_.cols() && a.w_ == b.w_ &&
         a.b_ == b.b_ && a.c_ == b.c_;
}

void CdConfig::validate() const {
  if (k < 1) raise(ErrorKind::Config, "cd.k must be >= 1");
  if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "cd.learning_rate must be > 0");
  if (batch_size < 1) raise(ErrorKind::Config, "cd.batch_size must be >= 1");
}

CdReport cd_train(Rbm& m, const Matrix& data, const CdConfig& cfg, WdMonitor* monitor,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (static_cast<std::size_t>(data.cols()) != m.n_visible())
    raise(ErrorKind::Dimension, fmt::format("cd_train: data has {} columns, model expects {}",
                                            data.cols(), m.n_visible()));
  CdReport report;
  if (data.rows() == 0 || cfg.epochs == 0) return report;

  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto n = static_cast<std::size_t>(data.rows());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Rbm before = m;
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const auto rows = static_cast<Eigen::Index>(stop - start);
      Matrix v0(rows, data.cols());
      for (Eigen::Index r = 0; r < rows; ++r) v0.row(r) = data.row(order[start + r]);

      const Matrix& w = m.weights();
      const Matrix ph0 = logistic((v0 * w).rowwise() + m.hidden_bias().transpose());
      Matrix h = sample_bernoulli(ph0, rng);
      Matrix pv, ph;
      for (std::size_t step = 0; step < cfg.k; ++step) {
        pv = logistic((h * w.transpose()).rowwise() + m.visible_bias().transpose());
        if (step + 1 < cfg.k) {
          const Matrix v = sample_bernoulli(pv, rng);
          h = sample_bernoulli(logistic((v * w).rowwise() + m.hidden_bias().transpose()), rng);
        }
      }
      ph = logistic((pv * w).rowwise() + m.hidden_bias().transpose());

      const double scale = cfg.learning_rate / static_cast<double>(rows);
      const Matrix dw = scale * (v0.transpose() * ph0 - pv.transpose() * ph);
      const Vector db = scale * (v0 - pv).colwise().sum().transpose();
      const Vector dc = scale * (ph0 - ph).colwise().sum().transpose();
      m.apply_update(dw, db, dc);
    }

    if (!m.all_finite())
      raise(ErrorKind::Numeric,
            fmt::format("cd_train: non-finite parameter after epoch {} (lr={})", epoch + 1,
                        cfg.learning_rate));
    report.reconstruction_error.push_back(reconstruction_error(m, data));
    if (monitor != nullptr) monitor->update(before, m);
    if (on_epoch) on_epoch(epoch + 1, m);
  }
  return report;
}

double reconstruction_error(const Rbm& m, const Matrix& data) {
  if (static_cast<std::size_t>(data.cols()) != m.n_visible())
    raise(ErrorKind::Dimension, fmt::format("reconstruction_error: data has {} columns, model "
                                            "expects {}",
                                            data.cols(), m.n_visible()));
  if (data.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const Vector v = data.row(r).transpose();
    const Vector recon = m.prob_v_given_h(m.prob_h_given_v(v));
    total += (v - recon).cwiseAbs().mean();
  }
  return total / static_cast<double>(data.rows());
}

RbmGradient free_energy_gradient(const Rbm& m, const Vector& v) {
  const Vector p = m.prob_h_given_v(v);
  RbmGradient g;
  g.weights = -(v * p.transpose());
  g.visible_bias = -v;
  g.hidden_bias = -p;
  return g;
}

namespace {

void require_enumerable(const Rbm& m) {
  if (m.n_visible() > 20)
    raise(ErrorKind::InvalidArgument,
          fmt::format("exact enumeration limited to 20 visible units (got {})", m.n_visible()));
}

}  // namespace

double log_partition(const Rbm& m) {
  require_enumerable(m);
  const std::uint64_t states = std::uint64_t{1} << m.n_visible();
  std::vector<double> neg_f(states);
  for (std::uint64_t s = 0; s < states; ++s) neg_f[s] = -m.free_energy(bits_of(s, m.n_visible()));
  return log_sum_exp(neg_f);
}

double log_likelihood(const Rbm& m, const Matrix& data) {
  if (data.rows() == 0) raise(ErrorKind::InvalidArgument, "log_likelihood: empty data");
  const double log_z = log_partition(m);
  double total = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) total -= m.free_energy(data.row(r).transpose());
  return total / static_cast<double>(data.rows()) - log_z;
}

RbmGradient log_likelihood_gradient(const Rbm& m, const Matrix& data) {
  if (data.rows() == 0) raise(ErrorKind::InvalidArgument, "log_likelihood_gradient: empty data");
  require_enumerable(m);
  RbmGradient g{Matrix::Zero(m.weights().rows(), m.weights().cols()),
                Vector::Zero(m.visible_bias().size()), Vector::Zero(m.hidden_bias().size())};
  const double inv_n = 1.0 / static_cast<double>(data.rows());
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const RbmGradient d = free_energy_gradient(m, data.row(r).transpose());
    g.weights -= inv_n * d.weights;
    g.visible_bias -= inv_n * d.visible_bias;
    g.hidden_bias -= inv_n * d.hidden_bias;
  }
  const double log_z = log_partition(m);
  const std::uint64_t states = std::uint64_t{1} << m.n_visible();
  for (std::uint64_t s = 0; s < states; ++s) {
    const Vector v = bits_of(s, m.n_visible());
    const double p = std::exp(-m.free_energy(v) - log_z);
    const RbmGradient d = free_energy_gradient(m, v);
    g.weights += p * d.weights;
    g.visible_bias += p * d.visible_bias;
    g.hidden_bias += p * d.hidden_bias;
  }
  return g;
}

}  // namespace adbn
