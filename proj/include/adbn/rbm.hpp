#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "adbn/types.hpp"

namespace adbn {

class WdMonitor;

/// Bernoulli-Bernoulli restricted Boltzmann machine.
///
/// Energy: E(v, h) = -b.v - c.h - v^T W h, with W stored n_visible x n_hidden.
/// Single-sample inference walks each hidden (or visible) unit in a fixed
/// index order, so a unit's output depends only on its own parameters. This is
/// what lets structural edits leave untouched units bitwise unchanged.
class Rbm {
 public:
  /// W ~ N(0, 0.01^2) i.i.d., b = 0, c = 0.
  Rbm(std::size_t n_visible, std::size_t n_hidden, std::uint64_t seed);

  static Rbm from_parameters(Matrix weights, Vector visible_bias, Vector hidden_bias);

  std::size_t n_visible() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  std::size_t n_hidden() const noexcept { return static_cast<std::size_t>(w_.cols()); }

  const Matrix& weights() const noexcept { return w_; }
  const Vector& visible_bias() const noexcept { return b_; }
  const Vector& hidden_bias() const noexcept { return c_; }

  // Element-wise mutable access. Shapes are only changed through the
  // structural edit functions below.
  double& weight(std::size_t i, std::size_t j) { return w_(i, j); }
  double& visible_bias(std::size_t i) { return b_(i); }
  double& hidden_bias(std::size_t j) { return c_(j); }

  double energy(const Vector& v, const Vector& h) const;
  double free_energy(const Vector& v) const;

  // Pre-activation c_j + (v^T W)_j.
  Vector hidden_input(const Vector& v) const;
  Vector prob_h_given_v(const Vector& v) const;
  Vector prob_v_given_h(const Vector& h) const;

  /// Appends a hidden unit with the given incoming column and bias; returns
  /// its index.
  std::size_t append_hidden(const Vector& column, double bias);
  void remove_hidden(std::size_t j);
  /// Appends a visible unit with the given outgoing row and bias.
  std::size_t append_visible(const Vector& row, double bias);

  /// Adds `delta` to every parameter. Used by trainers; shapes must match.
  void apply_update(const Matrix& dw, const Vector& db, const Vector& dc);

  bool all_finite() const;

  friend bool operator==(const Rbm& a, const Rbm& b);

 private:
  Rbm() = default;

  Matrix w_;
  Vector b_;
  Vector c_;
};

struct CdConfig {
  std::size_t k = 1;
  double learning_rate = 0.1;
  std::size_t batch_size = 10;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

struct CdReport {
  std::vector<double> reconstruction_error;  // one per epoch
};

// Called after every epoch with the number of completed epochs. The callback
// may edit the model's hidden layer.
using EpochCallback = std::function<void(std::size_t epoch, Rbm&)>;

/// CD-k with sampled binary hidden states inside the Gibbs chain and
/// mean-field probabilities for the final statistics.
CdReport cd_train(Rbm& m, const Matrix& data, const CdConfig& cfg, WdMonitor* monitor = nullptr,
                  const EpochCallback& on_epoch = {});

/// Mean absolute difference between v and its deterministic mean-field
/// round trip, averaged over samples.
double reconstruction_error(const Rbm& m, const Matrix& data);

/// Gradient of a scalar with respect to every Rbm parameter.
struct RbmGradient {
  Matrix weights;
  Vector visible_bias;
  Vector hidden_bias;
};

RbmGradient free_energy_gradient(const Rbm& m, const Vector& v);

// Exact quantities by enumeration of all 2^n_visible visible states.
// Limited to n_visible <= 20.
double log_partition(const Rbm& m);
double log_likelihood(const Rbm& m, const Matrix& data);
RbmGradient log_likelihood_gradient(const Rbm& m, const Matrix& data);

}  // namespace adbn
