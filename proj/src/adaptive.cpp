#include "adbn/adaptive.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "adbn/error.hpp"

namespace adbn {

WdMonitor::WdMonitor(std::size_t n_neurons, std::size_t window)
    : window_(window), history_(n_neurons) {
  if (window == 0) raise(ErrorKind::InvalidArgument, "wd monitor: window must be >= 1");
}

std::vector<double> WdMonitor::update(const Rbm& prev, const Rbm& cur) {
  if (prev.n_visible() != cur.n_visible() || prev.n_hidden() != cur.n_hidden())
    raise(ErrorKind::Dimension,
          fmt::format("wd_update: parameter shapes differ ({}x{} vs {}x{})", prev.n_visible(),
                      prev.n_hidden(), cur.n_visible(), cur.n_hidden()));
  if (cur.n_hidden() != history_.size())
    raise(ErrorKind::Dimension,
          fmt::format("wd_update: monitor tracks {} neurons, model has {}", history_.size(),
                      cur.n_hidden()));
  std::vector<double> wd(history_.size());
  for (std::size_t j = 0; j < history_.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double dc = cur.hidden_bias()[jj] - prev.hidden_bias()[jj];
    const double dw2 = (cur.weights().col(jj) - prev.weights().col(jj)).squaredNorm();
    wd[j] = std::sqrt(dc * dc + dw2);
    auto& h = history_[j];
    h.push_back(wd[j]);
    while (h.size() > 2 * window_) h.pop_front();
  }
  ++epoch_;
  return wd;
}

void WdMonitor::append_neuron() { history_.emplace_back(); }

void WdMonitor::remove_neuron(std::size_t j) {
  if (j >= history_.size())
    raise(ErrorKind::InvalidArgument, fmt::format("wd monitor: no neuron {}", j));
  history_.erase(history_.begin() + static_cast<std::ptrdiff_t>(j));
}

void WdMonitor::clear_neuron(std::size_t j) {
  if (j >= history_.size())
    raise(ErrorKind::InvalidArgument, fmt::format("wd monitor: no neuron {}", j));
  history_[j].clear();
}

std::vector<double> WdMonitor::current_window(std::size_t j) const {
  const auto& h = history_.at(j);
  const std::size_t take = std::min(window_, h.size());
  return {h.end() - static_cast<std::ptrdiff_t>(take), h.end()};
}

std::optional<std::vector<double>> WdMonitor::previous_window(std::size_t j) const {
  const auto& h = history_.at(j);
  if (h.size() < 2 * window_) return std::nullopt;
  return std::vector<double>(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(window_));
}

bool WdMonitor::window_full(std::size_t j) const { return history_.at(j).size() >= window_; }

namespace {

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double mu = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return s / static_cast<double>(xs.size());
}

}  // namespace

double WdMonitor::windowed_mean(std::size_t j) const { return mean_of(current_window(j)); }

double WdMonitor::windowed_variance(std::size_t j) const {
  return variance_of(current_window(j));
}

void StructureConfig::validate() const {
  if (window == 0) raise(ErrorKind::Config, "structure.window must be >= 1");
  if (!(theta_gen > 0.0)) raise(ErrorKind::Config, "structure.theta_gen must be > 0");
  if (!(theta_ann > 0.0)) raise(ErrorKind::Config, "structure.theta_ann must be > 0");
  if (warmup_epochs < window)
    raise(ErrorKind::Config, "structure.warmup_epochs must be >= structure.window");
  if (initial_hidden == 0) raise(ErrorKind::Config, "structure.initial_hidden must be >= 1");
  if (max_hidden < initial_hidden)
    raise(ErrorKind::Config, "structure.max_hidden must be >= structure.initial_hidden");
  if (!(theta_wd_layer > 0.0)) raise(ErrorKind::Config, "structure.theta_wd_layer must be > 0");
  if (!(theta_energy_layer > 0.0))
    raise(ErrorKind::Config, "structure.theta_energy_layer must be > 0");
  if (max_layers == 0) raise(ErrorKind::Config, "structure.max_layers must be >= 1");
  if (!(inherit_noise_sigma >= 0.0))
    raise(ErrorKind::Config, "structure.inherit_noise_sigma must be >= 0");
}

const char* event_kind_name(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::NeuronGenerated: return "NeuronGenerated";
    case EventKind::NeuronAnnihilated: return "NeuronAnnihilated";
    case EventKind::LayerGenerated: return "LayerGenerated";
    case EventKind::NeuronGrafted: return "NeuronGrafted";
  }
  return "Unknown";
}

std::optional<EventKind> parse_event_kind(const std::string& name) noexcept {
  for (auto k : {EventKind::NeuronGenerated, EventKind::NeuronAnnihilated,
                 EventKind::LayerGenerated, EventKind::NeuronGrafted})
    if (name == event_kind_name(k)) return k;
  return std::nullopt;
}

std::size_t EventLog::count(EventKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      events_.begin(), events_.end(), [kind](const StructureEvent& e) { return e.kind == kind; }));
}

std::string EventLog::to_lines() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& e = events_[i];
    out << i << '\t' << e.epoch << '\t' << event_kind_name(e.kind) << '\t' << e.layer_index
        << '\t' << (e.neuron_index ? std::to_string(*e.neuron_index) : std::string("-")) << '\t'
        << e.detail << '\n';
  }
  return out.str();
}

std::vector<double> wd_update(WdMonitor& monitor, const Rbm& prev, const Rbm& cur) {
  return monitor.update(prev, cur);
}

std::vector<std::size_t> check_neuron_generation(const WdMonitor& monitor,
                                                 const StructureConfig& cfg,
                                                 std::size_t n_hidden) {
  std::vector<std::size_t> out;
  if (monitor.epoch() < cfg.warmup_epochs || n_hidden >= cfg.max_hidden) return out;
  const std::size_t budget = cfg.max_hidden - n_hidden;
  for (std::size_t j = 0; j < monitor.n_neurons() && out.size() < budget; ++j) {
    if (!monitor.window_full(j)) continue;
    if (!(monitor.windowed_variance(j) > cfg.theta_gen)) continue;
    // A window whose mean has dropped since the previous one is converging.
    if (const auto prev = monitor.previous_window(j)) {
      if (monitor.windowed_mean(j) < mean_of(*prev)) continue;
    }
    out.push_back(j);
  }
  return out;
}

std::size_t generate_neuron(Rbm& m, std::size_t j, double sigma, std::uint64_t seed,
                            std::size_t max_hidden, const EditContext& ctx) {
  if (j >= m.n_hidden())
    raise(ErrorKind::InvalidArgument,
          fmt::format("generate_neuron: index {} out of range ({} hidden)", j, m.n_hidden()));
  if (m.n_hidden() >= max_hidden)
    raise(ErrorKind::State,
          fmt::format("generate_neuron: max_hidden {} reached", max_hidden));
  if (!(sigma >= 0.0)) raise(ErrorKind::InvalidArgument, "generate_neuron: sigma must be >= 0");

  const auto jj = static_cast<Eigen::Index>(j);
  Vector column = m.weights().col(jj);
  if (sigma > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < column.size(); ++i) column[i] += noise(rng);
  }
  const std::size_t idx = m.append_hidden(column, m.hidden_bias()[jj]);
  if (ctx.monitor != nullptr) {
    ctx.monitor->append_neuron();
    ctx.monitor->clear_neuron(j);
  }
  if (ctx.log != nullptr)
    ctx.log->append({ctx.epoch, EventKind::NeuronGenerated, ctx.layer_index, idx,
                     fmt::format("parent={} sigma={}", j, sigma)});
  return idx;
}

std::vector<std::size_t> check_neuron_annihilation(const Rbm& m, const Matrix& data,
                                                   const StructureConfig& cfg) {
  if (data.rows() == 0) raise(ErrorKind::InvalidArgument, "check_neuron_annihilation: empty data");
  if (static_cast<std::size_t>(data.cols()) != m.n_visible())
    raise(ErrorKind::Dimension, "check_neuron_annihilation: data width does not match model");
  std::vector<std::size_t> out;
  const std::size_t nh = m.n_hidden();
  if (nh < 2) return out;

  Vector sum = Vector::Zero(static_cast<Eigen::Index>(nh));
  Vector sum_sq = Vector::Zero(static_cast<Eigen::Index>(nh));
  std::vector<Vector> probs;
  probs.reserve(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    probs.push_back(m.prob_h_given_v(data.row(r).transpose()));
    sum += probs.back();
  }
  const double n = static_cast<double>(data.rows());
  const Vector mean = sum / n;
  for (const auto& p : probs) sum_sq += (p - mean).cwiseAbs2();
  const Vector var = sum_sq / n;

  Eigen::Index keep = 0;
  var.maxCoeff(&keep);
  for (std::size_t j = 0; j < nh; ++j) {
    if (static_cast<Eigen::Index>(j) == keep) continue;
    if (var[static_cast<Eigen::Index>(j)] < cfg.theta_ann) out.push_back(j);
  }
  return out;
}

void annihilate_neuron(Rbm& m, std::size_t j, const EditContext& ctx) {
  if (j >= m.n_hidden())
    raise(ErrorKind::InvalidArgument,
          fmt::format("annihilate_neuron: index {} out of range ({} hidden)", j, m.n_hidden()));
  m.remove_hidden(j);
  if (ctx.monitor != nullptr) ctx.monitor->remove_neuron(j);
  if (ctx.log != nullptr)
    ctx.log->append({ctx.epoch, EventKind::NeuronAnnihilated, ctx.layer_index, j,
                     fmt::format("remaining={}", m.n_hidden())});
}

LayerReport layer_report(const WdMonitor& monitor, const Rbm& m, const Matrix& data) {
  LayerReport r;
  for (std::size_t j = 0; j < monitor.n_neurons(); ++j) r.total_wd += monitor.windowed_mean(j);
  if (data.rows() > 0) {
    std::vector<double> f(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      f[static_cast<std::size_t>(i)] = m.free_energy(data.row(i).transpose());
    const double lo = *std::min_element(f.begin(), f.end());
    double s = 0.0;
    for (double x : f) s += x - lo;
    r.energy = s / static_cast<double>(f.size());
  }
  return r;
}

bool check_layer_generation(const LayerReport& report, const StructureConfig& cfg,
                            std::size_t n_layers) {
  return report.total_wd > cfg.theta_wd_layer && report.energy > cfg.theta_energy_layer &&
         n_layers < cfg.max_layers;
}

AdaptiveReport train_adaptive(Rbm& m, const Matrix& data, const CdConfig& cd,
                              const StructureConfig& cfg, std::size_t layer_index,
                              EventLog& log, std::size_t epoch_offset) {
  cfg.validate();
  AdaptiveReport report;
  WdMonitor monitor(m.n_hidden(), cfg.window);
  const std::uint64_t edit_seed = derive_seed(cd.seed, 0x5eed0000ULL + layer_index);

  auto on_epoch = [&](std::size_t epoch, Rbm& model) {
    if (epoch < cfg.warmup_epochs) return;
    EditContext ctx{&monitor, &log, layer_index, epoch_offset + epoch};
    for (std::size_t j : check_neuron_generation(monitor, cfg, model.n_hidden())) {
      const std::uint64_t seed = derive_seed(edit_seed, epoch * 1'000'003ULL + j);
      generate_neuron(model, j, cfg.inherit_noise_sigma, seed, cfg.max_hidden, ctx);
      ++report.generated;
    }
    auto doomed = check_neuron_annihilation(model, data, cfg);
    for (auto it = doomed.rbegin(); it != doomed.rend(); ++it) {
      annihilate_neuron(model, *it, ctx);
      ++report.annihilated;
    }
  };

  report.cd = cd_train(m, data, cd, &monitor, on_epoch);
  report.layer = layer_report(monitor, m, data);
  return report;
}

}  // namespace adbn
