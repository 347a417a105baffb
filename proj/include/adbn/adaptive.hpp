#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "adbn/rbm.hpp"

namespace adbn {

/// Per-hidden-neuron Walking Distance history.
///
/// WD_j for one epoch is the L2 norm of the change of neuron j's parameter
/// vector (c_j followed by column W_{.j}). The monitor keeps the last
/// 2 * window values so that both the current window and the one before it
/// can be summarised; all statistics are recomputed from the stored values.
class WdMonitor {
 public:
  explicit WdMonitor(std::size_t n_neurons, std::size_t window = 10);

  /// Records one epoch of deltas and returns the per-neuron WD values.
  std::vector<double> update(const Rbm& prev, const Rbm& cur);

  void append_neuron();
  void remove_neuron(std::size_t j);
  void clear_neuron(std::size_t j);

  std::size_t n_neurons() const noexcept { return history_.size(); }
  std::size_t window() const noexcept { return window_; }
  std::size_t epoch() const noexcept { return epoch_; }

  /// Values in the current window, oldest first (at most `window` of them).
  std::vector<double> current_window(std::size_t j) const;
  /// Values in the window before the current one, if it is complete.
  std::optional<std::vector<double>> previous_window(std::size_t j) const;

  bool window_full(std::size_t j) const;
  double windowed_mean(std::size_t j) const;
  double windowed_variance(std::size_t j) const;

 private:
  std::size_t window_;
  std::size_t epoch_ = 0;
  std::vector<std::deque<double>> history_;
};

struct StructureConfig {
  std::size_t window = 10;
  double theta_gen = 0.05;
  double theta_ann = 1e-4;
  std::size_t warmup_epochs = 10;
  std::size_t initial_hidden = 16;
  std::size_t max_hidden = 64;
  double theta_wd_layer = 0.5;
  double theta_energy_layer = 1.0;
  std::size_t max_layers = 3;
  double inherit_noise_sigma = 0.01;

  void validate() const;
};

enum class EventKind { NeuronGenerated, NeuronAnnihilated, LayerGenerated, NeuronGrafted };

const char* event_kind_name(EventKind kind) noexcept;
std::optional<EventKind> parse_event_kind(const std::string& name) noexcept;

struct StructureEvent {
  std::size_t epoch = 0;
  EventKind kind = EventKind::NeuronGenerated;
  std::size_t layer_index = 0;
  std::optional<std::size_t> neuron_index;
  std::string detail;

  friend bool operator==(const StructureEvent&, const StructureEvent&) = default;
};

/// Append-only event log. The sequence number of an event is its position.
class EventLog {
 public:
  void append(StructureEvent event) { events_.push_back(std::move(event)); }
  const std::vector<StructureEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  std::size_t count(EventKind kind) const;
  std::size_t last_epoch() const noexcept { return events_.empty() ? 0 : events_.back().epoch; }

  /// One tab-separated record per line: seq, epoch, kind, layer, neuron, detail.
  std::string to_lines() const;

  friend bool operator==(const EventLog&, const EventLog&) = default;

 private:
  std::vector<StructureEvent> events_;
};

/// Optional bookkeeping attached to a structural edit.
struct EditContext {
  WdMonitor* monitor = nullptr;
  EventLog* log = nullptr;
  std::size_t layer_index = 0;
  std::size_t epoch = 0;
};

std::vector<double> wd_update(WdMonitor& monitor, const Rbm& prev, const Rbm& cur);

/// Neurons whose WD is still fluctuating: windowed variance above theta_gen
/// and windowed mean not below the mean one window earlier. At most
/// max_hidden - n_hidden indices are returned, lowest first.
std::vector<std::size_t> check_neuron_generation(const WdMonitor& monitor,
                                                 const StructureConfig& cfg,
                                                 std::size_t n_hidden);

/// Splits neuron j: the new unit copies c_j and W_{.j} plus N(0, sigma^2)
/// noise on the weights. Returns the new index.
std::size_t generate_neuron(Rbm& m, std::size_t j, double sigma, std::uint64_t seed,
                            std::size_t max_hidden, const EditContext& ctx = {});

/// Neurons whose activation variance over the data is below theta_ann. The
/// highest-variance neuron is never returned.
std::vector<std::size_t> check_neuron_annihilation(const Rbm& m, const Matrix& data,
                                                   const StructureConfig& cfg);

void annihilate_neuron(Rbm& m, std::size_t j, const EditContext& ctx = {});

struct LayerReport {
  double total_wd = 0.0;
  double energy = 0.0;
};

/// total_wd: sum of windowed mean WD over neurons.
/// energy: dataset mean of F(v) - min_v' F(v') over the training data.
LayerReport layer_report(const WdMonitor& monitor, const Rbm& m, const Matrix& data);

bool check_layer_generation(const LayerReport& report, const StructureConfig& cfg,
                            std::size_t n_layers);

struct AdaptiveReport {
  CdReport cd;
  LayerReport layer;
  std::size_t generated = 0;
  std::size_t annihilated = 0;
};

/// CD training of one layer with generation then annihilation evaluated after
/// every post-warmup epoch. Events are stamped with epoch_offset + epoch.
AdaptiveReport train_adaptive(Rbm& m, const Matrix& data, const CdConfig& cd,
                              const StructureConfig& cfg, std::size_t layer_index, EventLog& log,
                              std::size_t epoch_offset = 0);

}  // namespace adbn
