#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "adbn/dbn.hpp"
#include "adbn/error.hpp"
#include "oracles.hpp"

using namespace adbn;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Vector gaussian_vec(Eigen::Index n, std::uint64_t seed) { return gaussian(n, 1, seed).col(0); }

Dbn small_net(std::uint64_t seed) {
  std::vector<Rbm> layers;
  layers.push_back(Rbm::from_parameters(gaussian(5, 4, seed), gaussian_vec(5, seed + 1),
                                        gaussian_vec(4, seed + 2)));
  layers.push_back(Rbm::from_parameters(gaussian(4, 3, seed + 3), gaussian_vec(4, seed + 4),
                                        gaussian_vec(3, seed + 5)));
  SoftmaxHead head{gaussian(3, 3, seed + 6), gaussian_vec(3, seed + 7)};
  return Dbn(std::move(layers), head, {});
}

std::vector<double> oracle_proba(const Dbn& m, const Vector& v) {
  std::vector<double> x(v.data(), v.data() + v.size());
  for (const Rbm& l : m.layers()) {
    std::vector<double> h(l.n_hidden());
    for (std::size_t j = 0; j < h.size(); ++j) {
      long double a = l.hidden_bias()[static_cast<Eigen::Index>(j)];
      for (std::size_t i = 0; i < x.size(); ++i)
        a += x[i] * l.weights()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      h[j] = oracle::sigmoid(static_cast<double>(a));
    }
    x = h;
  }
  const auto& hd = m.head();
  std::vector<long double> z(hd.n_classes());
  long double hi = -INFINITY;
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = hd.bias[static_cast<Eigen::Index>(k)];
    for (std::size_t j = 0; j < x.size(); ++j)
      z[k] += x[j] * hd.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    hi = std::max(hi, z[k]);
  }
  long double s = 0.0L;
  for (auto& t : z) s += (t = std::exp(t - hi));
  std::vector<double> p;
  for (auto t : z) p.push_back(static_cast<double>(t / s));
  return p;
}

}  // namespace

TEST_CASE("forward pass matches a loop oracle") {
  const Dbn m = small_net(10);
  for (std::size_t code = 0; code < 32; ++code) {
    const Vector v = oracle::bits(code, 5);
    const Vector p = m.predict_proba(v);
    const auto q = oracle_proba(m, v);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(p[static_cast<Eigen::Index>(k)] == doctest::Approx(q[k]).epsilon(1e-12));
    const ForwardResult fw = m.forward(v);
    CHECK(fw.hidden.size() == 2);
    CHECK(fw.proba == p);
    CHECK(m.predict(v) == argmax(p));
  }
  CHECK_THROWS_AS(m.forward(Vector::Zero(4)), Error);
}

TEST_CASE("softmax is stable for large logits") {
  SoftmaxHead h{Matrix::Zero(1, 3), Vector(3)};
  h.bias << 1000.0, 999.0, -1000.0;
  const Vector p = h.predict_proba(Vector::Zero(1));
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p[0] > p[1]);
}

TEST_CASE("argmax ties go to the lowest index") {
  Vector p(4);
  p << 0.1, 0.4, 0.4, 0.1;
  CHECK(argmax(p) == 1);
  CHECK(argmax(Vector::Constant(3, 1.0 / 3)) == 0);
  CHECK_THROWS_AS(argmax(Vector()), Error);
}

TEST_CASE("evaluate identities") {
  const Dbn m = small_net(3);
  Matrix x(32, 5);
  for (std::size_t code = 0; code < 32; ++code) x.row(static_cast<Eigen::Index>(code)) = oracle::bits(code, 5).transpose();
  std::vector<std::size_t> y(32);
  for (std::size_t i = 0; i < 32; ++i) y[i] = i % 2;  // class 2 empty
  const Evaluation ev = evaluate(m, x, y);
  std::size_t total = 0, diag = 0;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) {
      total += ev.confusion[t][p];
      if (t == p) diag += ev.confusion[t][p];
    }
  CHECK(total == 32);
  CHECK(ev.accuracy == doctest::Approx(diag / 32.0));
  CHECK(std::isnan(ev.per_class_accuracy[2]));
  for (std::size_t t = 0; t < 2; ++t) {
    const auto row = std::accumulate(ev.confusion[t].begin(), ev.confusion[t].end(), std::size_t{0});
    CHECK(ev.per_class_accuracy[t] == doctest::Approx(double(ev.confusion[t][t]) / double(row)));
  }
  CHECK(ev.predictions == predict_all(m, x));

  std::vector<std::size_t> bad = y;
  bad[0] = 3;
  CHECK_THROWS_AS(evaluate(m, x, bad), Error);
  CHECK_THROWS_AS(evaluate(m, x, std::vector<std::size_t>(31, 0)), Error);
}

TEST_CASE("head gradient matches finite differences") {
  const Matrix f = (gaussian(20, 4, 1).array() * 0.5 + 0.5).cwiseMax(0.0).cwiseMin(1.0).matrix();
  std::vector<std::size_t> y(20);
  for (std::size_t i = 0; i < 20; ++i) y[i] = (i * 7) % 3;
  SoftmaxHead head{gaussian(4, 3, 2, 0.5), gaussian_vec(3, 3)};
  const HeadGradient g = head_loss_gradient(head, f, y);

  const double h = 1e-6;
  for (Eigen::Index i = 0; i < head.weights.size(); ++i) {
    SoftmaxHead hp = head, hm = head;
    hp.weights.data()[i] += h;
    hm.weights.data()[i] -= h;
    const double fd = (head_loss(hp, f, y) - head_loss(hm, f, y)) / (2 * h);
    CHECK(g.weights.data()[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  for (Eigen::Index k = 0; k < 3; ++k) {
    SoftmaxHead hp = head, hm = head;
    hp.bias[k] += h;
    hm.bias[k] -= h;
    const double fd = (head_loss(hp, f, y) - head_loss(hm, f, y)) / (2 * h);
    CHECK(g.bias[k] == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(head_loss(SoftmaxHead{Matrix::Zero(4, 3), Vector::Zero(3)}, f, y) ==
        doctest::Approx(std::log(3.0)));
}

TEST_CASE("head training") {
  SUBCASE("loss is monotone at a small rate") {
    const Matrix f = (gaussian(30, 4, 5).array() * 0.3 + 0.5).matrix();
    std::vector<std::size_t> y(30);
    for (std::size_t i = 0; i < 30; ++i) y[i] = i % 3;
    SoftmaxHead head{Matrix::Zero(4, 3), Vector::Zero(3)};
    const HeadReport r = train_head_on_features(head, f, y, {100, 1e-3});
    REQUIRE(r.loss.size() == 101);
    for (std::size_t e = 1; e < r.loss.size(); ++e) CHECK(r.loss[e] <= r.loss[e - 1]);
  }
  SUBCASE("separable data is learnt") {
    Matrix f(40, 2);
    std::vector<std::size_t> y(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
      const bool one = i % 2 == 1;
      f.row(i) << (one ? 0.9 : 0.1), (one ? 0.1 : 0.9);
      y[static_cast<std::size_t>(i)] = one ? 1 : 0;
    }
    SoftmaxHead head{Matrix::Zero(2, 2), Vector::Zero(2)};
    const HeadReport r = train_head_on_features(head, f, y, {300, 1.0});
    CHECK(r.loss.back() < 0.05);
    std::vector<Rbm> id;
    Matrix w = Matrix::Identity(2, 2) * 40.0;
    id.push_back(Rbm::from_parameters(w, Vector::Zero(2), Vector::Constant(2, -20.0)));
    Dbn m(std::move(id), head, {});
    CHECK(evaluate(m, f, y).accuracy == 1.0);
  }
  SUBCASE("zero epochs") {
    SoftmaxHead head{Matrix::Zero(2, 2), Vector::Zero(2)};
    const Matrix f = Matrix::Constant(3, 2, 0.5);
    const HeadReport r = train_head_on_features(head, f, {0, 1, 0}, {0, 0.5});
    CHECK(r.loss.size() == 1);
    CHECK(head.weights.isZero());
  }
  SUBCASE("invalid rate") {
    SoftmaxHead head{Matrix::Zero(2, 2), Vector::Zero(2)};
    CHECK_THROWS_AS(train_head_on_features(head, Matrix::Zero(1, 2), {0}, {10, 0.0}), Error);
  }
}

TEST_CASE("dbn structure") {
  Dbn m = small_net(1);
  CHECK(m.n_inputs() == 5);
  CHECK(m.layer_widths() == std::vector<std::size_t>{4, 3});

  const Vector v = oracle::bits(0b10110, 5);
  const Vector before = m.predict_proba(v);
  // A unit whose outgoing row is zero leaves the output unchanged.
  m.append_neuron(0, Vector::Ones(5), 0.3, Vector::Zero(3));
  CHECK(m.layer_widths() == std::vector<std::size_t>{5, 3});
  CHECK(m.layer(1).n_visible() == 5);
  CHECK(m.predict_proba(v).isApprox(before, 1e-15));
  m.append_neuron(1, Vector::Ones(5), 0.3, Vector::Zero(3));
  CHECK(m.head().n_inputs() == 4);
  CHECK(m.predict_proba(v).isApprox(before, 1e-15));
  CHECK_THROWS_AS(m.append_neuron(1, Vector::Ones(5), 0.0, Vector::Zero(2)), Error);
  CHECK_THROWS_AS(m.append_neuron(2, Vector::Ones(5), 0.0, Vector::Zero(3)), Error);

  std::vector<Rbm> broken{Rbm(5, 4, 1), Rbm(3, 2, 1)};
  CHECK_THROWS_AS(Dbn(broken, 2), Error);
  CHECK_THROWS_AS(Dbn({}, 2), Error);
}

TEST_CASE("pretraining") {
  Matrix data(40, 8);
  data.setZero();
  for (Eigen::Index r = 0; r < 40; ++r) data.block(r, 2 * (r % 4), 1, 2).setOnes();
  CdConfig cd;
  cd.epochs = 30;
  cd.batch_size = 4;
  cd.learning_rate = 0.2;
  cd.seed = 5;

  SUBCASE("single layer cap") {
    StructureConfig s;
    s.initial_hidden = 4;
    s.max_hidden = 6;
    s.max_layers = 1;
    s.theta_wd_layer = 1e-9;
    s.theta_energy_layer = 1e-9;
    const Dbn m = pretrain(data, 4, s, cd);
    CHECK(m.n_layers() == 1);
    CHECK(m.head().weights.isZero());
    CHECK(m.n_classes() == 4);
    const Dbn again = pretrain(data, 4, s, cd);
    CHECK(again == m);
  }
  SUBCASE("permissive thresholds grow a second layer") {
    StructureConfig s;
    s.initial_hidden = 4;
    s.max_hidden = 6;
    s.max_layers = 3;
    s.theta_wd_layer = 1e-9;
    s.theta_energy_layer = 1e-9;
    const Dbn m = pretrain(data, 4, s, cd);
    CHECK(m.n_layers() >= 2);
    CHECK(m.events().count(EventKind::LayerGenerated) == m.n_layers() - 1);
    m.check_invariants();
  }
  SUBCASE("strict thresholds stop at one layer") {
    StructureConfig s;
    s.initial_hidden = 4;
    s.max_hidden = 6;
    s.theta_wd_layer = 1e9;
    CHECK(pretrain(data, 4, s, cd).n_layers() == 1);
  }
  SUBCASE("errors") {
    StructureConfig s;
    CHECK_THROWS_AS(pretrain(Matrix(0, 8), 4, s, cd), Error);
    s.initial_hidden = 0;
    CHECK_THROWS_AS(pretrain(data, 4, s, cd), Error);
  }
}
