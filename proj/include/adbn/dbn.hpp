#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "adbn/adaptive.hpp"
#include "adbn/rbm.hpp"

namespace adbn {

/// Softmax classifier over the top layer's hidden probabilities.
/// logits = U^T x + d, with U stored top_hidden x n_classes.
struct SoftmaxHead {
  Matrix weights;
  Vector bias;

  std::size_t n_inputs() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t n_classes() const noexcept { return static_cast<std::size_t>(weights.cols()); }

  Vector logits(const Vector& x) const;
  Vector predict_proba(const Vector& x) const;

  friend bool operator==(const SoftmaxHead& a, const SoftmaxHead& b);
};

struct ForwardResult {
  std::vector<Vector> hidden;  // one per layer
  Vector proba;
};

class Dbn {
 public:
  /// A stack with a zero head of n_classes outputs.
  Dbn(std::vector<Rbm> layers, std::size_t n_classes);
  Dbn(std::vector<Rbm> layers, SoftmaxHead head, EventLog events);

  std::size_t n_layers() const noexcept { return layers_.size(); }
  std::size_t n_inputs() const noexcept { return layers_.front().n_visible(); }
  std::size_t n_classes() const noexcept { return head_.n_classes(); }
  std::vector<std::size_t> layer_widths() const;

  const std::vector<Rbm>& layers() const noexcept { return layers_; }
  const Rbm& layer(std::size_t l) const { return layers_.at(l); }
  const SoftmaxHead& head() const noexcept { return head_; }
  const EventLog& events() const noexcept { return events_; }
  EventLog& events() noexcept { return events_; }

  // Parameter-level mutation; shapes are preserved.
  Rbm& mutable_layer(std::size_t l) { return layers_.at(l); }
  SoftmaxHead& mutable_head() noexcept { return head_; }

  /// Appends a hidden unit to layer l together with its outgoing row into
  /// layer l+1 (or the head for the top layer), keeping the chain consistent.
  std::size_t append_neuron(std::size_t l, const Vector& incoming, double bias,
                            const Vector& outgoing, double next_visible_bias = 0.0);

  ForwardResult forward(const Vector& v) const;
  Vector top_features(const Vector& v) const;
  Vector predict_proba(const Vector& v) const;
  std::size_t predict(const Vector& v) const;

  /// Throws if the chain or head dimensions are inconsistent.
  void check_invariants() const;

  friend bool operator==(const Dbn&, const Dbn&) = default;

 private:
  std::vector<Rbm> layers_;
  SoftmaxHead head_;
  EventLog events_;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const Vector& p);

/// Greedy layer-wise adaptive pretraining. The head is left at zero.
Dbn pretrain(const Matrix& data, std::size_t n_classes, const StructureConfig& structure,
             const CdConfig& cd);

/// Hidden probabilities of every row of `data` through all layers.
Matrix top_features(const Dbn& m, const Matrix& data);

struct HeadConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.5;

  void validate() const;
};

struct HeadReport {
  std::vector<double> loss;  // mean cross-entropy before each step, plus the final value
};

/// Full-batch gradient descent on mean cross-entropy, head parameters only.
HeadReport train_head(Dbn& m, const Matrix& data, const std::vector<std::size_t>& labels,
                      const HeadConfig& cfg);

/// Head training on precomputed top-layer features.
HeadReport train_head_on_features(SoftmaxHead& head, const Matrix& features,
                                  const std::vector<std::size_t>& labels, const HeadConfig& cfg);

double head_loss(const SoftmaxHead& head, const Matrix& features,
                 const std::vector<std::size_t>& labels);

struct HeadGradient {
  Matrix weights;
  Vector bias;
};

HeadGradient head_loss_gradient(const SoftmaxHead& head, const Matrix& features,
                                const std::vector<std::size_t>& labels);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes with no samples
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> predictions;
};

Evaluation evaluate(const Dbn& m, const Matrix& data, const std::vector<std::size_t>& labels);

std::vector<std::size_t> predict_all(const Dbn& m, const Matrix& data);

}  // namespace adbn
