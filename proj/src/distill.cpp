#include "adbn/distill.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "adbn/error.hpp"
#include "parallel.hpp"

namespace adbn {

namespace {

void check_distribution(const Vector& p, const char* name) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0))
      raise(ErrorKind::InvalidArgument,
            fmt::format("per_sample_kl: {}[{}] = {} is negative", name, i, p[i]));
    s += p[i];
  }
  if (std::abs(s - 1.0) > 1e-9)
    raise(ErrorKind::InvalidArgument,
          fmt::format("per_sample_kl: {} sums to {:.17g}, not 1", name, s));
}

std::vector<std::size_t> sorted_union(const std::vector<std::size_t>& a,
                                      const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Matrix propagate_to(const Dbn& m, const Matrix& data, std::size_t layer) {
  Matrix x = data;
  for (std::size_t l = 0; l < layer; ++l) {
    const Rbm& rbm = m.layer(l);
    Matrix next(x.rows(), static_cast<Eigen::Index>(rbm.n_hidden()));
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      next.row(r) = rbm.prob_h_given_v(x.row(r).transpose()).transpose();
    x = std::move(next);
  }
  return x;
}

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

double per_sample_kl(const Vector& p, const Vector& q) {
  if (p.size() != q.size())
    raise(ErrorKind::Dimension,
          fmt::format("per_sample_kl: lengths differ ({} vs {})", p.size(), q.size()));
  check_distribution(p, "p");
  check_distribution(q, "q");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    kl += p[i] * std::log(p[i] / std::max(q[i], kKlClamp));
  }
  return kl;
}

KlSplit split_by_threshold(const KlReport& report, double theta_kl) {
  KlSplit split;
  for (std::size_t i = 0; i < report.per_sample.size(); ++i)
    (report.per_sample[i] > theta_kl ? split.above : split.at_or_below).push_back(i);
  return split;
}

KlReport dataset_kl(const Dbn& parent, const Dbn& child, const Matrix& data, double theta_kl) {
  if (parent.n_classes() != child.n_classes())
    raise(ErrorKind::Dimension, fmt::format("dataset_kl: parent has {} classes, child has {}",
                                            parent.n_classes(), child.n_classes()));
  if (parent.n_inputs() != child.n_inputs())
    raise(ErrorKind::Dimension, fmt::format("dataset_kl: parent takes {} inputs, child takes {}",
                                            parent.n_inputs(), child.n_inputs()));
  if (static_cast<std::size_t>(data.cols()) != parent.n_inputs())
    raise(ErrorKind::Dimension, fmt::format("dataset_kl: data has {} columns, models expect {}",
                                            data.cols(), parent.n_inputs()));
  KlReport report;
  report.theta_kl = theta_kl;
  report.per_sample.resize(static_cast<std::size_t>(data.rows()));
  detail::parallel_for(report.per_sample.size(), [&](std::size_t i) {
    const Vector v = data.row(static_cast<Eigen::Index>(i)).transpose();
    report.per_sample[i] = per_sample_kl(parent.predict_proba(v), child.predict_proba(v));
  });
  for (double x : report.per_sample) report.aggregate += x;
  KlSplit split = split_by_threshold(report, theta_kl);
  report.above = std::move(split.above);
  report.at_or_below = std::move(split.at_or_below);
  return report;
}

std::vector<HistogramBin> kl_histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0.0)) raise(ErrorKind::InvalidArgument, "kl_histogram: bin width must be > 0");
  std::map<std::size_t, std::size_t> bins;
  for (double x : values) {
    const double clamped = std::max(x, 0.0);
    ++bins[static_cast<std::size_t>(std::floor(clamped / bin_width))];
  }
  std::vector<HistogramBin> out;
  for (const auto& [index, count] : bins) out.push_back({index, count});
  return out;
}

PathTrace trace_path(const Dbn& m, const Vector& v, double activation_threshold) {
  if (!(activation_threshold > 0.0 && activation_threshold < 1.0))
    raise(ErrorKind::InvalidArgument, "trace_path: activation threshold must lie in (0,1)");
  const ForwardResult fw = m.forward(v);
  PathTrace t;
  for (const Vector& h : fw.hidden) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(h.size()));
    for (Eigen::Index j = 0; j < h.size(); ++j)
      bits[static_cast<std::size_t>(j)] = h[j] >= activation_threshold ? 1 : 0;
    t.layers.push_back(std::move(bits));
  }
  t.predicted = argmax(fw.proba);
  return t;
}

LayerRange upper_layers(std::size_t n_layers, std::size_t count) {
  if (n_layers == 0) raise(ErrorKind::InvalidArgument, "upper_layers: model has no layers");
  count = std::clamp<std::size_t>(count, 1, n_layers);
  return {n_layers - count, n_layers - 1};
}

bool PathDiff::empty() const {
  return std::all_of(layers.begin(), layers.end(), [](const LayerDiff& d) {
    return d.child_only.empty() && d.parent_only.empty();
  });
}

void PathDiff::merge(const PathDiff& other) {
  for (const LayerDiff& d : other.layers) {
    auto it = std::find_if(layers.begin(), layers.end(),
                           [&](const LayerDiff& x) { return x.layer == d.layer; });
    if (it == layers.end()) {
      layers.push_back(d);
      continue;
    }
    it->child_only = sorted_union(it->child_only, d.child_only);
    it->parent_only = sorted_union(it->parent_only, d.parent_only);
  }
  std::sort(layers.begin(), layers.end(),
            [](const LayerDiff& a, const LayerDiff& b) { return a.layer < b.layer; });
}

PathDiff diff_paths(const PathTrace& parent, const PathTrace& child, LayerRange range) {
  if (range.first > range.last)
    raise(ErrorKind::InvalidArgument, "diff_paths: empty layer range");
  if (range.last >= parent.layers.size() || range.last >= child.layers.size())
    raise(ErrorKind::Dimension,
          fmt::format("diff_paths: layer {} not present in both traces ({} / {} layers)",
                      range.last, parent.layers.size(), child.layers.size()));
  PathDiff diff;
  for (std::size_t l = range.first; l <= range.last; ++l) {
    const auto& p = parent.layers[l];
    const auto& c = child.layers[l];
    LayerDiff d;
    d.layer = l;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] != 0 && (i >= p.size() || p[i] == 0)) d.child_only.push_back(i);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] != 0 && (i >= c.size() || c[i] == 0)) d.parent_only.push_back(i);
    diff.layers.push_back(std::move(d));
  }
  return diff;
}

GraftReport graft_neurons(Dbn& parent, const Dbn& child, const PathDiff& diff) {
  GraftReport report;
  if (diff.layers.empty()) return report;
  if (parent.n_layers() != child.n_layers())
    raise(ErrorKind::Dimension, fmt::format("graft: parent has {} layers, child has {}",
                                            parent.n_layers(), child.n_layers()));
  if (parent.n_classes() != child.n_classes())
    raise(ErrorKind::Dimension, "graft: parent and child class counts differ");

  std::vector<LayerDiff> ordered = diff.layers;
  std::sort(ordered.begin(), ordered.end(),
            [](const LayerDiff& a, const LayerDiff& b) { return a.layer < b.layer; });
  std::set<std::pair<std::size_t, std::size_t>> done;

  // Validate everything before the first edit so a rejected diff leaves the
  // parent untouched.
  for (const LayerDiff& d : ordered) {
    if (d.layer >= parent.n_layers())
      raise(ErrorKind::InvalidArgument,
            fmt::format("graft: layer {} out of range ({} hidden layers)", d.layer,
                        parent.n_layers()));
    if (child.layer(d.layer).n_visible() > parent.layer(d.layer).n_visible())
      raise(ErrorKind::Dimension,
            fmt::format("graft: child layer {} has more inputs than the parent", d.layer));
    for (std::size_t j : d.child_only)
      if (j >= child.layer(d.layer).n_hidden())
        raise(ErrorKind::InvalidArgument,
              fmt::format("graft: child layer {} has no neuron {}", d.layer, j));
  }

  for (const LayerDiff& d : ordered) {
    const std::size_t l = d.layer;
    const Rbm& src = child.layer(l);
    const bool top = l + 1 == parent.n_layers();
    for (std::size_t j : d.child_only) {
      if (!done.insert({l, j}).second) continue;
      const auto jj = static_cast<Eigen::Index>(j);

      Vector incoming = Vector::Zero(static_cast<Eigen::Index>(parent.layer(l).n_visible()));
      incoming.head(src.weights().rows()) = src.weights().col(jj);

      const std::size_t out_width = top ? parent.n_classes() : parent.layer(l + 1).n_hidden();
      Vector outgoing = Vector::Zero(static_cast<Eigen::Index>(out_width));
      double next_bias = 0.0;
      if (top) {
        outgoing = child.head().weights.row(jj).transpose();
      } else {
        const Rbm& above = child.layer(l + 1);
        const auto shared = std::min<Eigen::Index>(above.weights().cols(), outgoing.size());
        outgoing.head(shared) = above.weights().row(jj).head(shared).transpose();
        next_bias = above.visible_bias()[jj];
      }
      const std::size_t idx =
          parent.append_neuron(l, incoming, src.hidden_bias()[jj], outgoing, next_bias);
      parent.events().append({parent.events().last_epoch(), EventKind::NeuronGrafted, l, idx,
                              fmt::format("child_neuron={}", j)});
      report.grafted.push_back({l, j, idx});
    }
  }
  parent.check_invariants();
  return report;
}

void RetrainConfig::validate() const {
  if (!(sigma >= 0.0)) raise(ErrorKind::Config, "retrain.sigma must be >= 0");
  if (!(cd_learning_rate > 0.0)) raise(ErrorKind::Config, "retrain.cd_learning_rate must be > 0");
  if (cd_batch_size == 0) raise(ErrorKind::Config, "retrain.cd_batch_size must be >= 1");
  head.validate();
}

RetrainReport perturb_retrain(Dbn& parent, const Matrix& data,
                              const std::vector<std::size_t>& labels,
                              const std::vector<GraftedNeuron>& grafted, const RetrainConfig& cfg) {
  cfg.validate();
  if (data.rows() == 0) raise(ErrorKind::InvalidArgument, "perturb_retrain: empty data");
  RetrainReport report;
  report.accuracy_before = evaluate(parent, data, labels).accuracy;

  Rng rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.sigma > 0.0 ? cfg.sigma : 1.0);
  std::set<std::size_t> affected;
  for (const GraftedNeuron& g : grafted) {
    if (g.layer >= parent.n_layers() || g.parent_index >= parent.layer(g.layer).n_hidden())
      raise(ErrorKind::InvalidArgument,
            fmt::format("perturb_retrain: no neuron {} in layer {}", g.parent_index, g.layer));
    affected.insert(g.layer);
    if (cfg.sigma == 0.0) continue;
    Rbm& layer = parent.mutable_layer(g.layer);
    for (std::size_t i = 0; i < layer.n_visible(); ++i) layer.weight(i, g.parent_index) += noise(rng);
    layer.hidden_bias(g.parent_index) += noise(rng);
  }

  if (cfg.cd_epochs > 0) {
    for (std::size_t l : affected) {
      CdConfig cd;
      cd.k = 1;
      cd.learning_rate = cfg.cd_learning_rate;
      cd.batch_size = cfg.cd_batch_size;
      cd.epochs = cfg.cd_epochs;
      cd.seed = derive_seed(cfg.seed, 300 + l);
      const Matrix input = propagate_to(parent, data, l);
      report.cd.push_back(cd_train(parent.mutable_layer(l), input, cd));
    }
  }
  if (cfg.head.epochs > 0) report.head = train_head(parent, data, labels, cfg.head);
  report.accuracy_after = evaluate(parent, data, labels).accuracy;
  return report;
}

void FineTuneConfig::validate() const {
  if (!(theta_t > 0.0 && theta_t <= 1.0)) raise(ErrorKind::Config, "fine_tune.theta_t must lie in (0,1]");
  if (!(theta_f > 0.0 && theta_f <= 1.0)) raise(ErrorKind::Config, "fine_tune.theta_f must lie in (0,1]");
  if (!(activation_threshold > 0.0 && activation_threshold < 1.0))
    raise(ErrorKind::Config, "fine_tune.activation_threshold must lie in (0,1)");
  if (!std::isfinite(w_correct) || !std::isfinite(w_wrong))
    raise(ErrorKind::Config, "fine_tune weights must be finite");
}

FineTuneReport fine_tune(Dbn& m, const Matrix& x, const std::vector<std::size_t>& y,
                         const FineTuneConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) raise(ErrorKind::InvalidArgument, "fine_tune: empty data");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    raise(ErrorKind::Dimension, "fine_tune: labels do not match samples");
  for (std::size_t label : y)
    if (label >= m.n_classes())
      raise(ErrorKind::InvalidArgument, fmt::format("fine_tune: label {} out of range", label));

  // Activations are recorded once, before any edit.
  std::vector<PathTrace> traces(y.size());
  detail::parallel_for(y.size(), [&](std::size_t i) {
    traces[i] = trace_path(m, x.row(static_cast<Eigen::Index>(i)).transpose(),
                           cfg.activation_threshold);
  });

  FineTuneReport report;
  std::vector<std::size_t> correct, wrong;
  for (std::size_t s = 0; s < y.size(); ++s)
    (traces[s].predicted == y[s] ? correct : wrong).push_back(s);
  report.n_correct = correct.size();
  report.n_wrong = wrong.size();
  const double total = static_cast<double>(y.size());

  auto fired_by = [&](const std::vector<std::size_t>& set, std::size_t l, std::size_t j) {
    std::vector<std::size_t> out;
    for (std::size_t s : set)
      if (traces[s].layers[l][j] != 0) out.push_back(s);
    return out;
  };

  auto rewrite = [&](std::size_t l, std::size_t j, const std::vector<std::size_t>& samples,
                     double value) {
    const bool top = l + 1 == m.n_layers();
    std::set<std::size_t> targets;
    for (std::size_t s : samples) {
      if (top) {
        targets.insert(traces[s].predicted);
      } else {
        const auto& next = traces[s].layers[l + 1];
        for (std::size_t k = 0; k < next.size(); ++k)
          if (next[k] != 0) targets.insert(k);
      }
    }
    for (std::size_t k : targets) {
      double& w = top ? m.mutable_head().weights(static_cast<Eigen::Index>(j),
                                                 static_cast<Eigen::Index>(k))
                      : m.mutable_layer(l + 1).weight(j, k);
      if (w == value) continue;
      report.edits.push_back({l, j, k, top, w, value});
      w = value;
    }
  };

  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const std::size_t width = traces.front().layers[l].size();
    for (std::size_t j = 0; j < width; ++j) {
      std::vector<std::size_t> act_t = fired_by(correct, l, j);
      std::vector<std::size_t> act_f = fired_by(wrong, l, j);
      if (cfg.exclusive && !act_t.empty() && !act_f.empty()) continue;
      if (!act_t.empty() && static_cast<double>(act_t.size()) / total >= cfg.theta_t) {
        ++report.neurons_correct;
        rewrite(l, j, act_t, cfg.w_correct);
      }
      if (!act_f.empty() && static_cast<double>(act_f.size()) / total >= cfg.theta_f) {
        ++report.neurons_wrong;
        rewrite(l, j, act_f, cfg.w_wrong);
      }
    }
  }
  return report;
}

const char* child_training_set_name(ChildTrainingSet s) noexcept {
  switch (s) {
    case ChildTrainingSet::Misclassified: return "misclassified";
    case ChildTrainingSet::Correct: return "correct";
    case ChildTrainingSet::AllTargets: return "all_targets";
  }
  return "unknown";
}

void ChildConfig::validate() const {
  if (max_rounds == 0) raise(ErrorKind::Config, "child.max_rounds must be >= 1");
  if (!(cd_learning_rate > 0.0)) raise(ErrorKind::Config, "child.cd_learning_rate must be > 0");
  if (cd_batch_size == 0) raise(ErrorKind::Config, "child.cd_batch_size must be >= 1");
  head.validate();
}

ChildResult train_child(const Dbn& parent, const Matrix& x, const std::vector<std::size_t>& y,
                        const ChildConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) raise(ErrorKind::InvalidArgument, "train_child: empty training set");
  ChildResult result{parent, 0, 0.0};
  Dbn& child = result.child;
  for (std::size_t round = 0; round < cfg.max_rounds; ++round) {
    if (cfg.cd_epochs > 0) {
      Matrix input = x;
      for (std::size_t l = 0; l < child.n_layers(); ++l) {
        CdConfig cd;
        cd.learning_rate = cfg.cd_learning_rate;
        cd.batch_size = cfg.cd_batch_size;
        cd.epochs = cfg.cd_epochs;
        cd.seed = derive_seed(cfg.seed, round * 1000 + l);
        cd_train(child.mutable_layer(l), input, cd);
        input = propagate_to(child, x, l + 1);
      }
    }
    if (cfg.head.epochs > 0) train_head(child, x, y, cfg.head);
    result.rounds = round + 1;
    result.accuracy = evaluate(child, x, y).accuracy;
    if (result.accuracy >= 1.0) break;
  }
  return result;
}

void RepairConfig::validate() const {
  if (!(theta_kl >= 0.0)) raise(ErrorKind::Config, "repair.theta_kl must be >= 0");
  if (upper_layer_count == 0) raise(ErrorKind::Config, "repair.upper_layers must be >= 1");
  child.validate();
  retrain.validate();
  fine_tune.validate();
}

double subset_accuracy(const Evaluation& ev, const std::vector<std::size_t>& labels,
                       const std::vector<std::size_t>& classes) {
  std::size_t n = 0, hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::find(classes.begin(), classes.end(), labels[i]) == classes.end()) continue;
    ++n;
    if (ev.predictions.at(i) == labels[i]) ++hit;
  }
  return n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n);
}

RepairReport repair_pipeline(Dbn& parent, const Dataset& train,
                             const std::vector<std::size_t>& target_classes,
                             const RepairConfig& cfg, const Dataset* eval) {
  cfg.validate();
  train.validate();
  if (target_classes.empty())
    raise(ErrorKind::InvalidArgument, "repair: at least one target class required");
  for (std::size_t c : target_classes)
    if (c >= parent.n_classes())
      raise(ErrorKind::InvalidArgument, fmt::format("repair: target class {} out of range", c));
  const Dataset& eval_set = eval != nullptr ? *eval : train;

  RepairReport report;
  report.target_classes = target_classes;
  report.before = evaluate(parent, eval_set.features, eval_set.labels);

  // (1) parent's performance on the target-class training samples
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (std::find(target_classes.begin(), target_classes.end(), train.labels[i]) !=
        target_classes.end())
      targets.push_back(i);
  report.n_target_samples = targets.size();
  if (targets.empty()) {
    report.noop = true;
    report.explanation = "no training samples carry a target label";
    report.after = report.before;
    return report;
  }
  const Matrix tx = rows_of(train.features, targets);
  const std::vector<std::size_t> ty = pick(train.labels, targets);
  const std::vector<std::size_t> predicted = predict_all(parent, tx);
  std::vector<std::size_t> miss, hit;
  for (std::size_t i = 0; i < ty.size(); ++i) (predicted[i] == ty[i] ? hit : miss).push_back(i);
  report.n_misclassified = miss.size();
  if (miss.empty()) {
    report.noop = true;
    report.explanation = "parent classifies every target-class training sample correctly";
    report.after = report.before;
    return report;
  }

  // (2) child model
  std::vector<std::size_t> child_rows;
  switch (cfg.child.training_set) {
    case ChildTrainingSet::Misclassified: child_rows = miss; break;
    case ChildTrainingSet::Correct: child_rows = hit; break;
    case ChildTrainingSet::AllTargets:
      child_rows.resize(ty.size());
      for (std::size_t i = 0; i < ty.size(); ++i) child_rows[i] = i;
      break;
  }
  if (child_rows.empty()) {
    report.noop = true;
    report.explanation = fmt::format("child training set '{}' is empty",
                                     child_training_set_name(cfg.child.training_set));
    report.after = report.before;
    return report;
  }
  ChildResult child = train_child(parent, rows_of(tx, child_rows), pick(ty, child_rows), cfg.child);
  report.child_rounds = child.rounds;
  report.child_accuracy = child.accuracy;

  // (3) KL between parent and child on the target samples
  report.kl = dataset_kl(parent, child.child, tx, cfg.theta_kl);

  // (4) path differences of the above-threshold samples, then grafting
  const LayerRange range = upper_layers(parent.n_layers(), cfg.upper_layer_count);
  PathDiff diff;
  for (std::size_t s : report.kl.above) {
    const Vector v = tx.row(static_cast<Eigen::Index>(s)).transpose();
    diff.merge(diff_paths(trace_path(parent, v, cfg.fine_tune.activation_threshold),
                          trace_path(child.child, v, cfg.fine_tune.activation_threshold), range));
  }
  report.grafted = graft_neurons(parent, child.child, diff).grafted;

  // (5) small-perturbation retraining on the full training set
  report.retrain = perturb_retrain(parent, train.features, train.labels, report.grafted, cfg.retrain);

  // (6) path-based fine tuning on the target samples
  report.fine_tune = fine_tune(parent, tx, ty, cfg.fine_tune);

  // (7)
  report.after = evaluate(parent, eval_set.features, eval_set.labels);
  report.child = std::move(child.child);
  return report;
}

}  // namespace adbn
