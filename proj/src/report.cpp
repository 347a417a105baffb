#include "adbn/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

namespace adbn {

using Json = nlohmann::ordered_json;

namespace {

std::string name_of(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : fmt::format("c{}", c);
}

std::string fixed(double x) { return std::isnan(x) ? "-" : fmt::format("{:.4f}", x); }

Json nullable(double x) { return std::isnan(x) ? Json(nullptr) : Json(x); }

std::size_t row_total(const std::vector<std::size_t>& row) {
  std::size_t n = 0;
  for (std::size_t v : row) n += v;
  return n;
}

// Rows are true classes, columns predicted classes.
std::string confusion_text(const std::vector<std::vector<std::size_t>>& cm,
                           const std::vector<std::string>& names) {
  std::size_t w = 6;
  for (std::size_t c = 0; c < cm.size(); ++c) w = std::max(w, name_of(names, c).size() + 1);
  for (const auto& row : cm)
    for (std::size_t v : row) w = std::max(w, fmt::format("{}", v).size() + 1);
  std::string out = fmt::format("{:<{}}", "true\\pred", std::max<std::size_t>(w, 10));
  for (std::size_t c = 0; c < cm.size(); ++c) out += fmt::format("{:>{}}", name_of(names, c), w);
  out += fmt::format("{:>{}}\n", "total", w);
  for (std::size_t t = 0; t < cm.size(); ++t) {
    out += fmt::format("{:<{}}", name_of(names, t), std::max<std::size_t>(w, 10));
    for (std::size_t v : cm[t]) out += fmt::format("{:>{}}", v, w);
    out += fmt::format("{:>{}}\n", row_total(cm[t]), w);
  }
  return out;
}

std::string per_class_text(const Evaluation& ev, const std::vector<std::string>& names) {
  std::string out = fmt::format("{:<6}{:<12}{:>8}{:>9}{:>10}\n", "class", "name", "samples",
                                "correct", "accuracy");
  for (std::size_t c = 0; c < ev.per_class_accuracy.size(); ++c)
    out += fmt::format("{:<6}{:<12}{:>8}{:>9}{:>10}\n", c, name_of(names, c),
                       row_total(ev.confusion[c]), ev.confusion[c][c],
                       fixed(ev.per_class_accuracy[c]));
  return out;
}

Json evaluation_json(const Evaluation& ev, const std::vector<std::string>& names) {
  Json per = Json::array();
  for (std::size_t c = 0; c < ev.per_class_accuracy.size(); ++c)
    per.push_back({{"class", c},
                   {"name", name_of(names, c)},
                   {"samples", row_total(ev.confusion[c])},
                   {"correct", ev.confusion[c][c]},
                   {"accuracy", nullable(ev.per_class_accuracy[c])}});
  return {{"samples", ev.predictions.size()},
          {"accuracy", ev.accuracy},
          {"per_class", per},
          {"confusion", ev.confusion}};
}

std::string histogram_text(const std::vector<HistogramBin>& bins) {
  std::string out = fmt::format("{:>10}{:>12}{:>12}{:>8}\n", "bin", "from", "to", "count");
  for (const HistogramBin& b : bins)
    out += fmt::format("{:>10}{:>12.4f}{:>12.4f}{:>8}\n", b.index,
                       static_cast<double>(b.index) * kKlBinWidth,
                       static_cast<double>(b.index + 1) * kKlBinWidth, b.count);
  return out;
}

Json histogram_json(const std::vector<HistogramBin>& bins) {
  Json out = Json::array();
  for (const HistogramBin& b : bins)
    out.push_back({{"bin", b.index},
                   {"from", static_cast<double>(b.index) * kKlBinWidth},
                   {"to", static_cast<double>(b.index + 1) * kKlBinWidth},
                   {"count", b.count}});
  return out;
}

std::string bits(const std::vector<std::uint8_t>& v) {
  std::string s;
  for (std::uint8_t b : v) s += b != 0 ? '1' : '0';
  return s;
}

Report finish(std::string name, std::string text, const Json& j) {
  return {std::move(name), std::move(text), j.dump(2) + "\n"};
}

}  // namespace

Report synth_report(const SynthSplit& split, const SynthConfig& cfg, std::uint64_t seed) {
  std::string t = fmt::format("synth\nseed {}\n", seed);
  t += fmt::format("classes {}\ninput_dim {}\nconfusable_pair {} {}\noverlap {}\n"
                   "disagreement_rate {}\nnoise {}\n",
                   cfg.n_classes, cfg.input_dim, cfg.pair_a, cfg.pair_b, cfg.overlap,
                   cfg.disagreement_rate, cfg.noise);
  t += fmt::format("train {}\ntest {}\n\n", split.train.size(), split.test.size());
  t += fmt::format("{:<6}{:>8}{:>8}{:>12}\n", "class", "train", "test", "relabeled");
  Json classes = Json::array();
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    std::size_t ntr = 0, nte = 0, moved = 0;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      if (split.train.labels[i] != c) continue;
      ++ntr;
      if (split.train_origin[i] != c) ++moved;
    }
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      if (split.test.labels[i] != c) continue;
      ++nte;
      if (split.test_origin[i] != c) ++moved;
    }
    t += fmt::format("{:<6}{:>8}{:>8}{:>12}\n", c, ntr, nte, moved);
    classes.push_back({{"class", c}, {"train", ntr}, {"test", nte}, {"relabeled", moved}});
  }
  return finish("synth", t,
                {{"report", "synth"},
                 {"seed", seed},
                 {"train", split.train.size()},
                 {"test", split.test.size()},
                 {"classes", classes}});
}

Report pretrain_report(const Dbn& m, std::uint64_t seed) {
  std::string t = fmt::format("pretrain\nseed {}\ninputs {}\nclasses {}\n\n", seed, m.n_inputs(),
                              m.n_classes());
  t += fmt::format("{:<6}{:>8}{:>8}\n", "layer", "inputs", "hidden");
  Json layers = Json::array();
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    t += fmt::format("{:<6}{:>8}{:>8}\n", l, m.layer(l).n_visible(), m.layer(l).n_hidden());
    layers.push_back({{"layer", l}, {"inputs", m.layer(l).n_visible()},
                      {"hidden", m.layer(l).n_hidden()}});
  }
  Json counts = Json::object();
  t += "\nevents\n";
  for (auto k : {EventKind::NeuronGenerated, EventKind::NeuronAnnihilated,
                 EventKind::LayerGenerated, EventKind::NeuronGrafted}) {
    t += fmt::format("{:<20}{:>8}\n", event_kind_name(k), m.events().count(k));
    counts[event_kind_name(k)] = m.events().count(k);
  }
  return finish("pretrain", t,
                {{"report", "pretrain"}, {"seed", seed}, {"layers", layers}, {"events", counts}});
}

Report train_report(const HeadReport& head, const Evaluation& train_eval,
                    const std::vector<std::string>& class_names, std::uint64_t seed) {
  const double first = head.loss.empty() ? std::nan("") : head.loss.front();
  const double last = head.loss.empty() ? std::nan("") : head.loss.back();
  std::string t = fmt::format("train\nseed {}\nsteps {}\nloss_initial {}\nloss_final {}\n"
                              "training_accuracy {:.4f}\n\n",
                              seed, head.loss.empty() ? 0 : head.loss.size() - 1, fixed(first),
                              fixed(last), train_eval.accuracy);
  t += per_class_text(train_eval, class_names);
  return finish("train", t,
                {{"report", "train"},
                 {"seed", seed},
                 {"loss_initial", nullable(first)},
                 {"loss_final", nullable(last)},
                 {"training", evaluation_json(train_eval, class_names)}});
}

Report eval_report(const Evaluation& ev, const std::vector<std::string>& class_names,
                   std::uint64_t seed) {
  std::string t = fmt::format("eval\nseed {}\nsamples {}\naccuracy {:.4f}\n\n", seed,
                              ev.predictions.size(), ev.accuracy);
  t += per_class_text(ev, class_names);
  t += "\nconfusion (rows: true class, columns: predicted class)\n";
  t += confusion_text(ev.confusion, class_names);
  Json j = {{"report", "eval"}, {"seed", seed}};
  j.update(evaluation_json(ev, class_names));
  return finish("eval", t, j);
}

Report kl_report(const KlReport& kl, std::uint64_t seed) {
  const auto bins = kl_histogram(kl.per_sample);
  std::string t = fmt::format("kl\nseed {}\nsamples {}\naggregate {:.6f}\ntheta_kl {}\n"
                              "above {}\nat_or_below {}\nbin_width {}\n\n",
                              seed, kl.per_sample.size(), kl.aggregate, kl.theta_kl,
                              kl.above.size(), kl.at_or_below.size(), kKlBinWidth);
  t += histogram_text(bins);
  return finish("kl", t,
                {{"report", "kl"},
                 {"seed", seed},
                 {"samples", kl.per_sample.size()},
                 {"aggregate", kl.aggregate},
                 {"theta_kl", kl.theta_kl},
                 {"above", kl.above.size()},
                 {"at_or_below", kl.at_or_below.size()},
                 {"bin_width", kKlBinWidth},
                 {"histogram", histogram_json(bins)},
                 {"per_sample", kl.per_sample}});
}

Report repair_report(const RepairReport& r, const std::vector<std::string>& class_names,
                     std::uint64_t seed) {
  std::string targets;
  for (std::size_t c : r.target_classes) targets += fmt::format("{}{}", targets.empty() ? "" : " ", c);
  std::string t = fmt::format("repair\nseed {}\ntarget_classes {}\n", seed, targets);
  Json j = {{"report", "repair"}, {"seed", seed}, {"target_classes", r.target_classes},
            {"noop", r.noop}};
  if (r.noop) {
    t += fmt::format("noop {}\n", r.explanation);
    j["explanation"] = r.explanation;
  } else {
    t += fmt::format("target_samples {}\nmisclassified {}\nchild_rounds {}\nchild_accuracy {:.4f}\n"
                     "kl_aggregate {:.6f}\nkl_above {}\ngrafted {}\nfine_tune_edits {}\n",
                     r.n_target_samples, r.n_misclassified, r.child_rounds, r.child_accuracy,
                     r.kl.aggregate, r.kl.above.size(), r.grafted.size(), r.fine_tune.edits.size());
    Json grafted = Json::array();
    for (const GraftedNeuron& g : r.grafted)
      grafted.push_back({{"layer", g.layer}, {"child_index", g.child_index},
                         {"parent_index", g.parent_index}});
    j["target_samples"] = r.n_target_samples;
    j["misclassified"] = r.n_misclassified;
    j["child_rounds"] = r.child_rounds;
    j["child_accuracy"] = r.child_accuracy;
    j["grafted"] = grafted;
    j["fine_tune"] = {{"correct", r.fine_tune.n_correct},
                      {"wrong", r.fine_tune.n_wrong},
                      {"neurons_correct", r.fine_tune.neurons_correct},
                      {"neurons_wrong", r.fine_tune.neurons_wrong},
                      {"edits", r.fine_tune.edits.size()}};
  }

  auto pair_acc = [&](const Evaluation& ev) {
    std::size_t n = 0, hit = 0;
    for (std::size_t c : r.target_classes) {
      n += row_total(ev.confusion[c]);
      hit += ev.confusion[c][c];
    }
    return n == 0 ? std::nan("") : static_cast<double>(hit) / static_cast<double>(n);
  };
  t += fmt::format("\ntarget_accuracy_before {}\ntarget_accuracy_after {}\n"
                   "accuracy_before {:.4f}\naccuracy_after {:.4f}\n\n",
                   fixed(pair_acc(r.before)), fixed(pair_acc(r.after)), r.before.accuracy,
                   r.after.accuracy);
  t += fmt::format("{:<6}{:<12}{:>8}{:>10}{:>10}{:>10}  {}\n", "class", "name", "samples", "before",
                   "after", "change", "target");
  Json rows = Json::array();
  for (std::size_t c = 0; c < r.before.per_class_accuracy.size(); ++c) {
    const double b = r.before.per_class_accuracy[c];
    const double a = r.after.per_class_accuracy[c];
    const bool target =
        std::find(r.target_classes.begin(), r.target_classes.end(), c) != r.target_classes.end();
    t += fmt::format("{:<6}{:<12}{:>8}{:>10}{:>10}{:>10}  {}\n", c, name_of(class_names, c),
                     row_total(r.before.confusion[c]), fixed(b), fixed(a),
                     std::isnan(a - b) ? "-" : fmt::format("{:+.4f}", a - b), target ? "yes" : "no");
    rows.push_back({{"class", c}, {"name", name_of(class_names, c)},
                    {"samples", row_total(r.before.confusion[c])}, {"before", nullable(b)},
                    {"after", nullable(a)}, {"target", target}});
  }
  t += "\nconfusion before (rows: true class, columns: predicted class)\n";
  t += confusion_text(r.before.confusion, class_names);
  t += "\nconfusion after\n";
  t += confusion_text(r.after.confusion, class_names);
  j["target_accuracy_before"] = nullable(pair_acc(r.before));
  j["target_accuracy_after"] = nullable(pair_acc(r.after));
  j["per_class"] = rows;
  j["before"] = evaluation_json(r.before, class_names);
  j["after"] = evaluation_json(r.after, class_names);
  if (!r.noop) {
    const auto bins = kl_histogram(r.kl.per_sample);
    t += fmt::format("\nkl histogram (theta_kl {}, aggregate {:.6f})\n", r.kl.theta_kl,
                     r.kl.aggregate);
    t += histogram_text(bins);
    j["kl"] = {{"aggregate", r.kl.aggregate},
               {"theta_kl", r.kl.theta_kl},
               {"above", r.kl.above.size()},
               {"at_or_below", r.kl.at_or_below.size()},
               {"histogram", histogram_json(bins)}};
  }
  return finish("repair", t, j);
}

Report trace_report(const std::vector<PathTrace>& traces, const std::vector<std::size_t>& labels,
                    std::uint64_t seed) {
  std::string t = fmt::format("trace\nseed {}\nsamples {}\n\n", seed, traces.size());
  t += "sample\tlabel\tpredicted\tlayers\n";
  Json rows = Json::array();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    std::string layers;
    Json lj = Json::array();
    for (const auto& l : traces[i].layers) {
      layers += (layers.empty() ? "" : " ") + bits(l);
      lj.push_back(bits(l));
    }
    t += fmt::format("{}\t{}\t{}\t{}\n", i, labels.at(i), traces[i].predicted, layers);
    rows.push_back(
        {{"sample", i}, {"label", labels[i]}, {"predicted", traces[i].predicted}, {"layers", lj}});
  }
  return finish("trace", t, {{"report", "trace"}, {"seed", seed}, {"traces", rows}});
}

Report rules_report(const RuleExtraction& rules, double tree_accuracy,
                    const std::vector<std::size_t>& labels, std::uint64_t seed) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (rules.network_labels.at(i) == labels[i]) ++hit;
  const double net_acc =
      labels.empty() ? std::nan("") : static_cast<double>(hit) / static_cast<double>(labels.size());
  const std::string body = tree_to_text(rules.tree);
  std::string t = fmt::format("rules\nseed {}\nsamples {}\nfidelity {:.4f}\n"
                              "network_accuracy {}\ntree_accuracy {}\ndepth {}\nleaves {}\n\n",
                              seed, labels.size(), rules.fidelity, fixed(net_acc),
                              fixed(tree_accuracy),
                              rules.tree.depth(), rules.tree.leaf_count());
  t += body;
  return finish("rules", t,
                {{"report", "rules"},
                 {"seed", seed},
                 {"samples", labels.size()},
                 {"fidelity", rules.fidelity},
                 {"network_accuracy", nullable(net_acc)},
                 {"tree_accuracy", nullable(tree_accuracy)},
                 {"depth", rules.tree.depth()},
                 {"leaves", rules.tree.leaf_count()},
                 {"rules", body}});
}

}  // namespace adbn
