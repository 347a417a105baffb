#include "adbn/dbn.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "adbn/error.hpp"
#include "parallel.hpp"

namespace adbn {

namespace {

void check_labels(const std::vector<std::size_t>& labels, std::size_t n_rows,
                  std::size_t n_classes, const char* where) {
  if (labels.size() != n_rows)
    raise(ErrorKind::Dimension,
          fmt::format("{}: {} labels for {} samples", where, labels.size(), n_rows));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= n_classes)
      raise(ErrorKind::InvalidArgument,
            fmt::format("{}: label {} at sample {} out of range [0, {})", where, labels[i], i,
                        n_classes));
}

void check_unit_interval(const Vector& x, std::size_t layer) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= 0.0 && x[i] <= 1.0))
      raise(ErrorKind::Numeric,
            fmt::format("pretrain: layer {} produced value {} outside [0,1]", layer, x[i]));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double hi = logits.row(r).maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) s += (p(r, c) = std::exp(logits(r, c) - hi));
    p.row(r) /= s;
  }
  return p;
}

}  // namespace

Vector SoftmaxHead::logits(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != n_inputs())
    raise(ErrorKind::Dimension,
          fmt::format("head: expected {} inputs, got {}", n_inputs(), x.size()));
  Vector z(weights.cols());
  for (Eigen::Index k = 0; k < weights.cols(); ++k) {
    double acc = bias[k];
    for (Eigen::Index j = 0; j < weights.rows(); ++j) acc += x[j] * weights(j, k);
    z[k] = acc;
  }
  return z;
}

Vector SoftmaxHead::predict_proba(const Vector& x) const {
  Vector z = logits(x);
  const double hi = z.maxCoeff();
  double s = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) s += (z[k] = std::exp(z[k] - hi));
  return z / s;
}

bool operator==(const SoftmaxHead& a, const SoftmaxHead& b) {
  return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
         a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
}

Dbn::Dbn(std::vector<Rbm> layers, std::size_t n_classes) : layers_(std::move(layers)) {
  if (layers_.empty()) raise(ErrorKind::InvalidArgument, "dbn: at least one layer required");
  if (n_classes == 0) raise(ErrorKind::InvalidArgument, "dbn: at least one class required");
  head_.weights = Matrix::Zero(static_cast<Eigen::Index>(layers_.back().n_hidden()),
                               static_cast<Eigen::Index>(n_classes));
  head_.bias = Vector::Zero(static_cast<Eigen::Index>(n_classes));
  check_invariants();
}

Dbn::Dbn(std::vector<Rbm> layers, SoftmaxHead head, EventLog events)
    : layers_(std::move(layers)), head_(std::move(head)), events_(std::move(events)) {
  check_invariants();
}

std::vector<std::size_t> Dbn::layer_widths() const {
  std::vector<std::size_t> w;
  for (const auto& l : layers_) w.push_back(l.n_hidden());
  return w;
}

void Dbn::check_invariants() const {
  if (layers_.empty()) raise(ErrorKind::State, "dbn: no layers");
  for (std::size_t l = 1; l < layers_.size(); ++l)
    if (layers_[l].n_visible() != layers_[l - 1].n_hidden())
      raise(ErrorKind::Dimension,
            fmt::format("dbn: layer {} has {} inputs but layer {} has {} hidden units", l,
                        layers_[l].n_visible(), l - 1, layers_[l - 1].n_hidden()));
  if (head_.n_inputs() != layers_.back().n_hidden())
    raise(ErrorKind::Dimension, fmt::format("dbn: head expects {} inputs, top layer has {}",
                                            head_.n_inputs(), layers_.back().n_hidden()));
  if (head_.n_classes() == 0 || static_cast<std::size_t>(head_.bias.size()) != head_.n_classes())
    raise(ErrorKind::Dimension, "dbn: head bias does not match class count");
}

std::size_t Dbn::append_neuron(std::size_t l, const Vector& incoming, double bias,
                               const Vector& outgoing, double next_visible_bias) {
  if (l >= layers_.size())
    raise(ErrorKind::InvalidArgument,
          fmt::format("append_neuron: layer {} out of range ({} layers)", l, layers_.size()));
  const bool top = l + 1 == layers_.size();
  const std::size_t expected_out = top ? head_.n_classes() : layers_[l + 1].n_hidden();
  if (static_cast<std::size_t>(outgoing.size()) != expected_out)
    raise(ErrorKind::Dimension, fmt::format("append_neuron: outgoing row has {} entries, "
                                            "expected {}",
                                            outgoing.size(), expected_out));
  const std::size_t idx = layers_[l].append_hidden(incoming, bias);
  if (top) {
    const Eigen::Index r = head_.weights.rows();
    head_.weights.conservativeResize(r + 1, Eigen::NoChange);
    head_.weights.row(r) = outgoing.transpose();
  } else {
    layers_[l + 1].append_visible(outgoing, next_visible_bias);
  }
  return idx;
}

ForwardResult Dbn::forward(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != n_inputs())
    raise(ErrorKind::Dimension,
          fmt::format("forward: expected {} inputs, got {}", n_inputs(), v.size()));
  ForwardResult out;
  out.hidden.reserve(layers_.size());
  const Vector* x = &v;
  for (const auto& layer : layers_) {
    out.hidden.push_back(layer.prob_h_given_v(*x));
    x = &out.hidden.back();
  }
  out.proba = head_.predict_proba(*x);
  return out;
}

Vector Dbn::top_features(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != n_inputs())
    raise(ErrorKind::Dimension,
          fmt::format("forward: expected {} inputs, got {}", n_inputs(), v.size()));
  Vector x = v;
  for (const auto& layer : layers_) x = layer.prob_h_given_v(x);
  return x;
}

Vector Dbn::predict_proba(const Vector& v) const { return head_.predict_proba(top_features(v)); }

std::size_t Dbn::predict(const Vector& v) const { return argmax(predict_proba(v)); }

std::size_t argmax(const Vector& p) {
  if (p.size() == 0) raise(ErrorKind::InvalidArgument, "argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return static_cast<std::size_t>(best);
}

Dbn pretrain(const Matrix& data, std::size_t n_classes, const StructureConfig& structure,
             const CdConfig& cd) {
  structure.validate();
  cd.validate();
  if (data.rows() == 0 || data.cols() == 0)
    raise(ErrorKind::InvalidArgument, "pretrain: empty data");

  std::vector<Rbm> layers;
  EventLog events;
  Matrix input = data;
  for (std::size_t l = 0;; ++l) {
    Rbm rbm(static_cast<std::size_t>(input.cols()), structure.initial_hidden,
            derive_seed(cd.seed, 100 + l));
    CdConfig layer_cd = cd;
    layer_cd.seed = derive_seed(cd.seed, 200 + l);
    const AdaptiveReport rep =
        train_adaptive(rbm, input, layer_cd, structure, l, events, l * cd.epochs);

    Matrix next(input.rows(), static_cast<Eigen::Index>(rbm.n_hidden()));
    for (Eigen::Index r = 0; r < input.rows(); ++r) {
      const Vector h = rbm.prob_h_given_v(input.row(r).transpose());
      check_unit_interval(h, l);
      next.row(r) = h.transpose();
    }
    layers.push_back(std::move(rbm));
    if (!check_layer_generation(rep.layer, structure, layers.size())) break;
    events.append({(l + 1) * cd.epochs, EventKind::LayerGenerated, l + 1, std::nullopt,
                   fmt::format("total_wd={:.6g} energy={:.6g}", rep.layer.total_wd,
                               rep.layer.energy)});
    input = std::move(next);
  }
  SoftmaxHead head{Matrix::Zero(static_cast<Eigen::Index>(layers.back().n_hidden()),
                                static_cast<Eigen::Index>(n_classes)),
                   Vector::Zero(static_cast<Eigen::Index>(n_classes))};
  return Dbn(std::move(layers), std::move(head), std::move(events));
}

Matrix top_features(const Dbn& m, const Matrix& data) {
  if (static_cast<std::size_t>(data.cols()) != m.n_inputs())
    raise(ErrorKind::Dimension, fmt::format("data has {} columns, model expects {}", data.cols(),
                                            m.n_inputs()));
  const auto width = static_cast<Eigen::Index>(m.layers().back().n_hidden());
  Matrix out(data.rows(), width);
  detail::parallel_for(static_cast<std::size_t>(data.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r) = m.top_features(data.row(r).transpose()).transpose();
  });
  return out;
}

void HeadConfig::validate() const {
  if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "head.learning_rate must be > 0");
}

double head_loss(const SoftmaxHead& head, const Matrix& features,
                 const std::vector<std::size_t>& labels) {
  check_labels(labels, static_cast<std::size_t>(features.rows()), head.n_classes(), "head_loss");
  if (features.rows() == 0) return 0.0;
  const Matrix logits = (features * head.weights).rowwise() + head.bias.transpose();
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double hi = logits.row(r).maxCoeff();
    const double lse = hi + std::log((logits.row(r).array() - hi).exp().sum());
    total += lse - logits(r, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]));
  }
  return total / static_cast<double>(features.rows());
}

HeadGradient head_loss_gradient(const SoftmaxHead& head, const Matrix& features,
                                const std::vector<std::size_t>& labels) {
  check_labels(labels, static_cast<std::size_t>(features.rows()), head.n_classes(),
               "head_loss_gradient");
  if (static_cast<std::size_t>(features.cols()) != head.n_inputs())
    raise(ErrorKind::Dimension, "head_loss_gradient: feature width does not match head");
  HeadGradient g{Matrix::Zero(head.weights.rows(), head.weights.cols()),
                 Vector::Zero(head.bias.size())};
  if (features.rows() == 0) return g;
  Matrix delta = softmax_rows((features * head.weights).rowwise() + head.bias.transpose());
  for (Eigen::Index r = 0; r < delta.rows(); ++r)
    delta(r, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)])) -= 1.0;
  const double inv_n = 1.0 / static_cast<double>(features.rows());
  g.weights = inv_n * (features.transpose() * delta);
  g.bias = inv_n * delta.colwise().sum().transpose();
  return g;
}

HeadReport train_head_on_features(SoftmaxHead& head, const Matrix& features,
                                  const std::vector<std::size_t>& labels, const HeadConfig& cfg) {
  cfg.validate();
  check_labels(labels, static_cast<std::size_t>(features.rows()), head.n_classes(),
               "train_head");
  if (static_cast<std::size_t>(features.cols()) != head.n_inputs())
    raise(ErrorKind::Dimension, "train_head: feature width does not match head");
  HeadReport report;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    report.loss.push_back(head_loss(head, features, labels));
    const HeadGradient g = head_loss_gradient(head, features, labels);
    head.weights -= cfg.learning_rate * g.weights;
    head.bias -= cfg.learning_rate * g.bias;
  }
  report.loss.push_back(head_loss(head, features, labels));
  if (!head.weights.allFinite() || !head.bias.allFinite())
    raise(ErrorKind::Numeric, "train_head: non-finite head parameter");
  return report;
}

HeadReport train_head(Dbn& m, const Matrix& data, const std::vector<std::size_t>& labels,
                      const HeadConfig& cfg) {
  check_labels(labels, static_cast<std::size_t>(data.rows()), m.n_classes(), "train_head");
  const Matrix features = top_features(m, data);
  return train_head_on_features(m.mutable_head(), features, labels, cfg);
}

std::vector<std::size_t> predict_all(const Dbn& m, const Matrix& data) {
  if (static_cast<std::size_t>(data.cols()) != m.n_inputs())
    raise(ErrorKind::Dimension, fmt::format("data has {} columns, model expects {}", data.cols(),
                                            m.n_inputs()));
  std::vector<std::size_t> out(static_cast<std::size_t>(data.rows()));
  detail::parallel_for(out.size(), [&](std::size_t i) {
    out[i] = m.predict(data.row(static_cast<Eigen::Index>(i)).transpose());
  });
  return out;
}

Evaluation evaluate(const Dbn& m, const Matrix& data, const std::vector<std::size_t>& labels) {
  check_labels(labels, static_cast<std::size_t>(data.rows()), m.n_classes(), "evaluate");
  const std::size_t k = m.n_classes();
  Evaluation ev;
  ev.predictions = predict_all(m, data);
  ev.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++ev.confusion[labels[i]][ev.predictions[i]];
    if (labels[i] == ev.predictions[i]) ++correct;
  }
  ev.accuracy = labels.empty() ? 0.0
                               : static_cast<double>(correct) / static_cast<double>(labels.size());
  ev.per_class_accuracy.resize(k);
  for (std::size_t t = 0; t < k; ++t) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < k; ++p) row += ev.confusion[t][p];
    ev.per_class_accuracy[t] = row == 0 ? std::numeric_limits<double>::quiet_NaN()
                                        : static_cast<double>(ev.confusion[t][t]) /
                                              static_cast<double>(row);
  }
  return ev;
}

}  // namespace adbn
