#include <doctest.h>

#include <cmath>
#include <random>

#include "adbn/adaptive.hpp"
#include "adbn/error.hpp"
#include "oracles.hpp"

using namespace adbn;

namespace {

Rbm with_params(Matrix w, Vector c) {
  const auto nv = w.rows();
  return Rbm::from_parameters(std::move(w), Vector::Zero(nv), std::move(c));
}

// Feeds a scripted WD sequence to neuron 0 of a 1x1 model: the bias moves by
// exactly the requested amount each epoch.
void feed(WdMonitor& mon, const std::vector<double>& wds) {
  double c = 0.0;
  for (double wd : wds) {
    const Rbm prev = with_params(Matrix::Zero(1, 1), Vector::Constant(1, c));
    c += wd;
    const Rbm cur = with_params(Matrix::Zero(1, 1), Vector::Constant(1, c));
    mon.update(prev, cur);
  }
}

double var_oracle(const std::vector<double>& xs) {
  long double m = 0.0L;
  for (double x : xs) m += x;
  m /= static_cast<long double>(xs.size());
  long double s = 0.0L;
  for (double x : xs) s += (x - m) * (x - m);
  return static_cast<double>(s / static_cast<long double>(xs.size()));
}

Matrix random_binary(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution b(0.5);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = b(rng) ? 1.0 : 0.0;
  return m;
}

StructureConfig permissive() {
  StructureConfig s;
  s.window = 10;
  s.warmup_epochs = 10;
  s.theta_gen = 0.05;
  return s;
}

}  // namespace

TEST_CASE("walking distance") {
  WdMonitor mon(2, 10);
  const Rbm a = with_params(Matrix::Zero(2, 2), Vector::Zero(2));
  CHECK(wd_update(mon, a, a) == std::vector<double>{0.0, 0.0});

  Matrix w = Matrix::Zero(2, 2);
  w(0, 0) = 4.0;
  Vector c = Vector::Zero(2);
  c[0] = 3.0;
  const Rbm b = with_params(w, c);
  const auto wd = wd_update(mon, a, b);
  CHECK(wd[0] == 5.0);
  CHECK(wd[1] == 0.0);
  CHECK(mon.epoch() == 2);

  Rng rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix w1(5, 3), w2(5, 3);
  Vector c1(3), c2(3);
  for (Eigen::Index i = 0; i < 15; ++i) {
    w1.data()[i] = n(rng);
    w2.data()[i] = n(rng);
  }
  for (Eigen::Index i = 0; i < 3; ++i) {
    c1[i] = n(rng);
    c2[i] = n(rng);
  }
  WdMonitor m3(3);
  const auto got = m3.update(with_params(w1, c1), with_params(w2, c2));
  for (Eigen::Index j = 0; j < 3; ++j) {
    long double s = (c2[j] - c1[j]) * (c2[j] - c1[j]);
    for (Eigen::Index i = 0; i < 5; ++i) s += (w2(i, j) - w1(i, j)) * (w2(i, j) - w1(i, j));
    CHECK(got[static_cast<std::size_t>(j)] ==
          doctest::Approx(static_cast<double>(std::sqrt(s))).epsilon(1e-14));
  }

  CHECK_THROWS_AS(mon.update(a, with_params(Matrix::Zero(2, 3), Vector::Zero(3))), Error);
  CHECK_THROWS_AS(m3.update(a, a), Error);
}

TEST_CASE("windowed statistics are recomputable from the window") {
  WdMonitor mon(1, 4);
  std::vector<double> seq{0.5, 0.1, 0.7, 0.2, 0.9, 0.3, 0.4, 0.8, 0.6, 0.05};
  feed(mon, seq);
  const auto cur = mon.current_window(0);
  REQUIRE(cur.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(cur[i] == doctest::Approx(seq[6 + i]).epsilon(1e-12));
  const auto prev = mon.previous_window(0);
  REQUIRE(prev.has_value());
  for (std::size_t i = 0; i < 4; ++i)
    CHECK((*prev)[i] == doctest::Approx(seq[2 + i]).epsilon(1e-12));
  CHECK(mon.windowed_variance(0) == doctest::Approx(var_oracle(cur)).epsilon(1e-14));

  WdMonitor young(1, 4);
  feed(young, {1.0, 2.0, 3.0});
  CHECK_FALSE(young.window_full(0));
  CHECK_FALSE(young.previous_window(0).has_value());
  CHECK(young.current_window(0).size() == 3);
}

TEST_CASE("neuron generation check") {
  StructureConfig cfg = permissive();

  SUBCASE("constant history") {
    WdMonitor mon(1);
    feed(mon, std::vector<double>(30, 0.4));
    CHECK(check_neuron_generation(mon, cfg, 1).empty());
  }
  SUBCASE("alternating history") {
    WdMonitor mon(1);
    std::vector<double> seq;
    for (int i = 0; i < 30; ++i) seq.push_back(i % 2 == 0 ? 0.1 : 0.9);
    feed(mon, seq);
    CHECK(var_oracle(mon.current_window(0)) == doctest::Approx(0.16));
    CHECK(check_neuron_generation(mon, cfg, 1) == std::vector<std::size_t>{0});
  }
  SUBCASE("history shorter than warmup") {
    WdMonitor mon(1);
    feed(mon, {0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1});
    CHECK(check_neuron_generation(mon, cfg, 1).empty());
  }
  SUBCASE("converging history") {
    WdMonitor mon(1);
    std::vector<double> seq;
    for (int i = 0; i < 10; ++i) seq.push_back(i % 2 == 0 ? 0.2 : 1.9);
    for (int i = 0; i < 10; ++i) seq.push_back(i % 2 == 0 ? 0.1 : 0.9);
    feed(mon, seq);
    CHECK(mon.windowed_variance(0) > cfg.theta_gen);
    CHECK(check_neuron_generation(mon, cfg, 1).empty());
  }
  SUBCASE("no budget left") {
    WdMonitor mon(1);
    std::vector<double> seq;
    for (int i = 0; i < 30; ++i) seq.push_back(i % 2 == 0 ? 0.1 : 0.9);
    feed(mon, seq);
    cfg.max_hidden = 1;
    cfg.initial_hidden = 1;
    CHECK(check_neuron_generation(mon, cfg, 1).empty());
  }
  SUBCASE("pure") {
    WdMonitor mon(1);
    std::vector<double> seq;
    for (int i = 0; i < 25; ++i) seq.push_back(i % 3 == 0 ? 0.05 : 0.95);
    feed(mon, seq);
    CHECK(check_neuron_generation(mon, cfg, 1) == check_neuron_generation(mon, cfg, 1));
  }
}

TEST_CASE("generate neuron") {
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix w(4, 2);
  for (Eigen::Index i = 0; i < 8; ++i) w.data()[i] = n(rng);
  Vector c(2);
  c << 0.3, -0.2;
  Rbm m = with_params(w, c);
  const Vector v = oracle::bits(0b1101, 4);
  const Vector before = m.prob_h_given_v(v);

  WdMonitor mon(2);
  feed(mon, {});  // no history
  EventLog log;
  const std::size_t idx = generate_neuron(m, 1, 0.0, 9, 8, {&mon, &log, 0, 12});
  CHECK(idx == 2);
  CHECK(m.n_hidden() == 3);
  CHECK(m.weights().col(2) == m.weights().col(1));
  CHECK(m.hidden_bias()[2] == m.hidden_bias()[1]);
  const Vector after = m.prob_h_given_v(v);
  CHECK(after[0] == before[0]);
  CHECK(after[1] == before[1]);
  CHECK(mon.n_neurons() == 3);
  REQUIRE(log.size() == 1);
  CHECK(log.events()[0].kind == EventKind::NeuronGenerated);
  CHECK(log.events()[0].epoch == 12);
  CHECK(log.events()[0].neuron_index == std::optional<std::size_t>{2});

  const std::size_t noisy = generate_neuron(m, 0, 0.01, 9, 8);
  CHECK(m.weights().col(static_cast<Eigen::Index>(noisy)) != m.weights().col(0));
  CHECK((m.weights().col(static_cast<Eigen::Index>(noisy)) - m.weights().col(0)).cwiseAbs().maxCoeff() <
        0.1);
  CHECK(m.hidden_bias()[static_cast<Eigen::Index>(noisy)] == m.hidden_bias()[0]);

  CHECK_THROWS_AS(generate_neuron(m, 10, 0.0, 1, 8), Error);
  CHECK_THROWS_AS(generate_neuron(m, 0, 0.0, 1, m.n_hidden()), Error);
}

TEST_CASE("neuron annihilation check") {
  StructureConfig cfg;
  const Matrix data = random_binary(200, 256, 5);

  SUBCASE("saturated neuron") {
    Rbm m(256, 4, 3);
    m.hidden_bias(2) = 30.0;
    const auto doomed = check_neuron_annihilation(m, data, cfg);
    CHECK(std::find(doomed.begin(), doomed.end(), 2) != doomed.end());
  }
  SUBCASE("fresh model agrees with a variance oracle") {
    const Rbm m(256, 16, 3);
    std::vector<double> var(16);
    for (std::size_t j = 0; j < 16; ++j) {
      std::vector<double> a;
      for (Eigen::Index r = 0; r < data.rows(); ++r) {
        double x = 0.0;
        for (Eigen::Index i = 0; i < 256; ++i) x += data(r, i) * m.weights()(i, static_cast<Eigen::Index>(j));
        a.push_back(oracle::sigmoid(x));
      }
      var[j] = var_oracle(a);
    }
    std::vector<std::size_t> expect;
    const auto keep = static_cast<std::size_t>(std::max_element(var.begin(), var.end()) - var.begin());
    for (std::size_t j = 0; j < 16; ++j)
      if (j != keep && var[j] < cfg.theta_ann) expect.push_back(j);
    CHECK(check_neuron_annihilation(m, data, cfg) == expect);
    CHECK(expect.empty());
  }
  SUBCASE("single neuron survives") {
    Rbm m(256, 1, 3);
    m.hidden_bias(0) = 30.0;
    CHECK(check_neuron_annihilation(m, data, cfg).empty());
  }
  SUBCASE("all constant keeps one") {
    Rbm m(256, 3, 3);
    for (std::size_t j = 0; j < 3; ++j) m.hidden_bias(j) = 30.0;
    CHECK(check_neuron_annihilation(m, data, cfg).size() == 2);
  }
  SUBCASE("empty data") {
    const Rbm m(256, 3, 3);
    CHECK_THROWS_AS(check_neuron_annihilation(m, Matrix(0, 256), cfg), Error);
  }
}

TEST_CASE("annihilate neuron") {
  Rng rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix w(5, 3);
  for (Eigen::Index i = 0; i < 15; ++i) w.data()[i] = n(rng);
  Vector c(3);
  c << 0.1, 0.2, 0.3;
  Rbm m = with_params(w, c);
  WdMonitor mon(3);
  EventLog log;
  annihilate_neuron(m, 0, {&mon, &log, 1, 4});
  CHECK(m.n_hidden() == 2);
  CHECK(m.weights().col(0) == w.col(1));
  CHECK(m.hidden_bias()[0] == 0.2);
  CHECK(mon.n_neurons() == 2);
  CHECK(log.count(EventKind::NeuronAnnihilated) == 1);

  // A neuron with no influence.
  Matrix w2(5, 3);
  w2 << w.leftCols(2), Vector::Zero(5);
  Vector c2(3);
  c2 << 0.1, 0.2, -30.0;
  Rbm z = with_params(w2, c2);
  const Rbm before = z;
  annihilate_neuron(z, 2);
  for (std::size_t code = 0; code < 32; ++code) {
    const Vector v = oracle::bits(code, 5);
    CHECK(std::abs(z.free_energy(v) - before.free_energy(v)) < 1e-9);
  }

  Rbm one = with_params(Matrix::Zero(2, 1), Vector::Zero(1));
  CHECK_THROWS_AS(annihilate_neuron(one, 0), Error);
  CHECK_THROWS_AS(annihilate_neuron(m, 5), Error);
}

TEST_CASE("generate then annihilate with zero noise restores the model") {
  Rbm m(6, 3, 4);
  for (std::size_t j = 0; j < 3; ++j) m.hidden_bias(j) = 0.1 * static_cast<double>(j);
  const Rbm before = m;
  const std::size_t idx = generate_neuron(m, 1, 0.0, 1, 10);
  annihilate_neuron(m, idx);
  CHECK(m == before);
  for (std::size_t code = 0; code < 64; ++code) {
    const Vector v = oracle::bits(code, 6);
    CHECK(std::abs(m.free_energy(v) - before.free_energy(v)) < 1e-9);
  }
}

TEST_CASE("random edit sequences keep the monitor aligned") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Rbm m(5, 3, static_cast<std::uint64_t>(trial));
    WdMonitor mon(3, 5);
    for (int step = 0; step < 40; ++step) {
      const Rbm prev = m;
      m.hidden_bias(0) += 0.01;
      mon.update(prev, m);
      std::uniform_int_distribution<int> op(0, 2);
      std::uniform_int_distribution<std::size_t> pick(0, m.n_hidden() - 1);
      const int o = op(rng);
      if (o == 0 && m.n_hidden() < 12) generate_neuron(m, pick(rng), 0.01, 3, 12, {&mon});
      else if (o == 1 && m.n_hidden() > 1) annihilate_neuron(m, pick(rng), {&mon});
      REQUIRE(mon.n_neurons() == m.n_hidden());
      REQUIRE(m.weights().cols() == m.hidden_bias().size());
      REQUIRE(m.weights().rows() == m.visible_bias().size());
    }
  }
}

TEST_CASE("layer generation check") {
  StructureConfig cfg;
  cfg.theta_wd_layer = 0.5;
  cfg.theta_energy_layer = 1.0;
  cfg.max_layers = 3;
  CHECK_FALSE(check_layer_generation({0.0, 5.0}, cfg, 1));
  CHECK(check_layer_generation({0.6, 1.1}, cfg, 1));
  CHECK_FALSE(check_layer_generation({0.6, 0.9}, cfg, 1));
  CHECK_FALSE(check_layer_generation({9.0, 9.0}, cfg, 3));
}

TEST_CASE("layer report") {
  Matrix data(3, 2);
  data << 0, 0, 1, 0, 1, 1;
  Matrix w(2, 1);
  w << 1.0, -0.5;
  Vector b(2);
  b << 0.2, 0.4;
  const Rbm m = Rbm::from_parameters(w, b, Vector::Zero(1));
  WdMonitor mon(1, 2);
  feed(mon, {0.3, 0.5});
  const LayerReport r = layer_report(mon, m, data);
  CHECK(r.total_wd == doctest::Approx(0.4));
  std::vector<double> f;
  for (Eigen::Index i = 0; i < 3; ++i) f.push_back(m.free_energy(data.row(i).transpose()));
  const double lo = *std::min_element(f.begin(), f.end());
  CHECK(r.energy == doctest::Approx((f[0] + f[1] + f[2]) / 3.0 - lo).epsilon(1e-12));
  CHECK(r.energy >= 0.0);
}

TEST_CASE("adaptive training on an under-capacity layer") {
  Matrix data(4, 8);
  data.setZero();
  for (Eigen::Index p = 0; p < 4; ++p) data.block(p, 2 * p, 1, 2).setOnes();
  Matrix batch(40, 8);
  for (Eigen::Index r = 0; r < 40; ++r) batch.row(r) = data.row(r % 4);

  Rbm m(8, 2, 1);
  CdConfig cd;
  cd.learning_rate = 0.5;
  cd.batch_size = 4;
  cd.epochs = 300;
  StructureConfig cfg;
  cfg.initial_hidden = 2;
  cfg.max_hidden = 8;
  cfg.theta_gen = 1e-6;
  EventLog log;
  const AdaptiveReport rep = train_adaptive(m, batch, cd, cfg, 0, log, 1000);
  CHECK(rep.generated >= 1);
  CHECK(log.count(EventKind::NeuronGenerated) == rep.generated);
  CHECK(m.n_hidden() == 2 + rep.generated - rep.annihilated);
  CHECK(m.n_hidden() <= cfg.max_hidden);
  std::size_t last = 0;
  for (const auto& e : log.events()) {
    CHECK(e.epoch >= 1000 + cfg.warmup_epochs);
    CHECK(e.epoch >= last);
    last = e.epoch;
  }

  Rbm again(8, 2, 1);
  EventLog log2;
  train_adaptive(again, batch, cd, cfg, 0, log2, 1000);
  CHECK(again == m);
  CHECK(log2 == log);
}

TEST_CASE("event log") {
  EventLog log;
  log.append({3, EventKind::NeuronGenerated, 0, 5, "parent=1"});
  log.append({7, EventKind::LayerGenerated, 1, std::nullopt, "x"});
  CHECK(log.to_lines() == "0\t3\tNeuronGenerated\t0\t5\tparent=1\n1\t7\tLayerGenerated\t1\t-\tx\n");
  CHECK(log.last_epoch() == 7);
  for (auto k : {EventKind::NeuronGenerated, EventKind::NeuronAnnihilated,
                 EventKind::LayerGenerated, EventKind::NeuronGrafted})
    CHECK(parse_event_kind(event_kind_name(k)) == k);
  CHECK_FALSE(parse_event_kind("Nope").has_value());
}

TEST_CASE("structure config validation") {
  StructureConfig s;
  CHECK_NOTHROW(s.validate());
  s.warmup_epochs = s.window - 1;
  CHECK_THROWS_AS(s.validate(), Error);
  s = StructureConfig{};
  s.max_hidden = s.initial_hidden - 1;
  CHECK_THROWS_AS(s.validate(), Error);
  s = StructureConfig{};
  s.theta_gen = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
}
