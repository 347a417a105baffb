#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adbn/data.hpp"
#include "adbn/dbn.hpp"

namespace adbn {

inline constexpr double kDefaultThetaKl = 0.0015;
inline constexpr double kKlClamp = 1e-12;
inline constexpr double kKlBinWidth = 1e-4;

// ---------------------------------------------------------------------------
// KL divergence between class distributions

/// sum_i p_i ln(p_i / max(q_i, 1e-12)), with 0 ln(0/q) = 0. Both inputs must
/// be non-negative and sum to 1 within 1e-9.
double per_sample_kl(const Vector& p, const Vector& q);

struct KlReport {
  std::vector<double> per_sample;
  double aggregate = 0.0;  // sum of per_sample, in index order
  double theta_kl = kDefaultThetaKl;
  std::vector<std::size_t> above;        // KL > theta_kl
  std::vector<std::size_t> at_or_below;  // KL <= theta_kl
};

struct KlSplit {
  std::vector<std::size_t> above;
  std::vector<std::size_t> at_or_below;
};

KlSplit split_by_threshold(const KlReport& report, double theta_kl);

/// KL(parent || child) of the two models' class distributions per input row.
KlReport dataset_kl(const Dbn& parent, const Dbn& child, const Matrix& data,
                    double theta_kl = kDefaultThetaKl);

struct HistogramBin {
  std::size_t index = 0;  // covers [index * width, (index + 1) * width)
  std::size_t count = 0;
};

/// Non-empty bins only, in increasing order.
std::vector<HistogramBin> kl_histogram(const std::vector<double>& values,
                                       double bin_width = kKlBinWidth);

// ---------------------------------------------------------------------------
// Activation paths

struct PathTrace {
  std::vector<std::vector<std::uint8_t>> layers;  // 1 iff hidden probability >= threshold
  std::size_t predicted = 0;

  friend bool operator==(const PathTrace&, const PathTrace&) = default;
};

PathTrace trace_path(const Dbn& m, const Vector& v, double activation_threshold = 0.5);

/// Inclusive range of hidden-layer indices.
struct LayerRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// The top `count` hidden layers of an n-layer model.
LayerRange upper_layers(std::size_t n_layers, std::size_t count = 1);

struct LayerDiff {
  std::size_t layer = 0;
  std::vector<std::size_t> child_only;   // indices into the child's layer
  std::vector<std::size_t> parent_only;  // indices into the parent's layer

  friend bool operator==(const LayerDiff&, const LayerDiff&) = default;
};

struct PathDiff {
  std::vector<LayerDiff> layers;

  bool empty() const;
  /// Set union, layer by layer.
  void merge(const PathDiff& other);

  friend bool operator==(const PathDiff&, const PathDiff&) = default;
};

PathDiff diff_paths(const PathTrace& parent, const PathTrace& child, LayerRange range);

// ---------------------------------------------------------------------------
// Grafting and retraining

struct GraftedNeuron {
  std::size_t layer = 0;
  std::size_t child_index = 0;
  std::size_t parent_index = 0;
};

struct GraftReport {
  std::vector<GraftedNeuron> grafted;
};

/// Copies every child_only neuron of `diff` into the parent: incoming weights
/// and bias from the child, outgoing row into the next layer (or head) from
/// the child, zero towards units the child does not have.
GraftReport graft_neurons(Dbn& parent, const Dbn& child, const PathDiff& diff);

struct RetrainConfig {
  double sigma = 0.005;
  std::size_t cd_epochs = 20;
  double cd_learning_rate = 0.01;
  std::size_t cd_batch_size = 10;
  HeadConfig head{300, 0.5};
  std::uint64_t seed = 11;

  void validate() const;
};

struct RetrainReport {
  std::vector<CdReport> cd;  // one per refreshed layer
  HeadReport head;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
};

/// Gaussian noise on the grafted neurons' parameters, a short CD refresh of
/// each affected layer, then head training.
RetrainReport perturb_retrain(Dbn& parent, const Matrix& data,
                              const std::vector<std::size_t>& labels,
                              const std::vector<GraftedNeuron>& grafted, const RetrainConfig& cfg);

// ---------------------------------------------------------------------------
// Path-based fine tuning

struct FineTuneConfig {
  double theta_t = 0.3;
  double theta_f = 0.3;
  double w_correct = 1.0;
  double w_wrong = 0.0;
  double activation_threshold = 0.5;
  // Count only neurons fired exclusively by one partition.
  bool exclusive = true;

  void validate() const;
};

struct EdgeEdit {
  std::size_t layer = 0;   // source hidden layer
  std::size_t neuron = 0;  // source neuron
  std::size_t target = 0;  // neuron in layer + 1, or class index for the head
  bool into_head = false;
  double before = 0.0;
  double after = 0.0;
};

struct FineTuneReport {
  std::size_t n_correct = 0;
  std::size_t n_wrong = 0;
  std::size_t neurons_correct = 0;  // neurons that met the correct-set rule
  std::size_t neurons_wrong = 0;
  std::vector<EdgeEdit> edits;      // only edges whose value changed
};

FineTuneReport fine_tune(Dbn& m, const Matrix& x, const std::vector<std::size_t>& y,
                         const FineTuneConfig& cfg);

// ---------------------------------------------------------------------------
// Parent/child repair

enum class ChildTrainingSet { Misclassified, Correct, AllTargets };

const char* child_training_set_name(ChildTrainingSet s) noexcept;

struct ChildConfig {
  ChildTrainingSet training_set = ChildTrainingSet::Misclassified;
  std::size_t max_rounds = 20;
  std::size_t cd_epochs = 5;
  double cd_learning_rate = 0.05;
  std::size_t cd_batch_size = 10;
  HeadConfig head{50, 0.5};
  std::uint64_t seed = 13;

  void validate() const;
};

struct ChildResult {
  Dbn child;
  std::size_t rounds = 0;
  double accuracy = 0.0;  // on its own training set
};

/// Clones the parent and retrains it (CD refresh of every layer plus head)
/// on (x, y) until every sample is classified correctly or max_rounds is hit.
/// Runs at least one round.
ChildResult train_child(const Dbn& parent, const Matrix& x, const std::vector<std::size_t>& y,
                        const ChildConfig& cfg);

struct RepairConfig {
  double theta_kl = kDefaultThetaKl;
  std::size_t upper_layer_count = 1;
  ChildConfig child;
  RetrainConfig retrain;
  FineTuneConfig fine_tune;

  void validate() const;
};

struct RepairReport {
  bool noop = false;
  std::string explanation;
  std::vector<std::size_t> target_classes;
  std::size_t n_target_samples = 0;
  std::size_t n_misclassified = 0;
  std::size_t child_rounds = 0;
  double child_accuracy = 0.0;
  KlReport kl;
  std::vector<GraftedNeuron> grafted;
  RetrainReport retrain;
  FineTuneReport fine_tune;
  Evaluation before;
  Evaluation after;
  std::optional<Dbn> child;  // absent for a no-op
};

/// Child retraining on the parent's mis-classified target samples, KL split,
/// path diff and grafting, perturbed retraining, then fine tuning. `eval`
/// (default: `train`) is the set the before/after evaluations use.
RepairReport repair_pipeline(Dbn& parent, const Dataset& train,
                             const std::vector<std::size_t>& target_classes,
                             const RepairConfig& cfg, const Dataset* eval = nullptr);

/// Accuracy over the samples whose label is in `classes`.
double subset_accuracy(const Evaluation& ev, const std::vector<std::size_t>& labels,
                       const std::vector<std::size_t>& classes);

}  // namespace adbn
