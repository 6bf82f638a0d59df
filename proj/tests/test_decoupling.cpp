#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mecole/decoupling.hpp"
#include "mecole/error.hpp"
#include "support.hpp"

using namespace mecole;
using namespace mecole::decouple;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

EmbeddingVars vars(Tape& t, const Matrix& hd, const Matrix& ho) {
  return {t.leaf(hd), ho.cols() ? t.leaf(ho) : Var{}};
}

// direct BCE: mean over edges (label 1) and the given non-edges (label 0)
double bce_oracle(const Graph& g, const Matrix& hd, const Matrix& ho, const std::vector<NodePair>& neg) {
  auto z = [&](NodeId u, NodeId v) {
    double zd = sig(dot(hd.row(u), hd.row(v)));
    double zo = ho.cols() ? sig(dot(ho.row(u), ho.row(v))) : 1.0;
    return std::clamp(zd * zo, 1e-7, 1.0 - 1e-7);
  };
  double total = 0.0;
  for (const Edge& e : g.edges()) total -= std::log(z(e.u, e.v));
  for (const auto& p : neg) total -= std::log(1.0 - z(p.u, p.v));
  return total / static_cast<double>(g.num_edges() + neg.size());
}

}  // namespace

TEST_CASE("predict_link: zero embeddings give 1/4") {
  std::vector<double> zero(3, 0.0);
  LinkProbability p = predict_link(zero, zero, zero, zero);
  CHECK(p.z == doctest::Approx(0.25));
  CHECK(p.z_d == doctest::Approx(0.5));
}

TEST_CASE("predict_link: worked value") {
  std::vector<double> hd_u{1.0}, hd_v{1.0}, ho_u{0.0}, ho_v{0.0};
  // sigmoid(1) * sigmoid(0)
  CHECK(predict_link(hd_u, hd_v, ho_u, ho_v).z == doctest::Approx(0.3655292893).epsilon(1e-9));
  std::vector<double> a{1.0, -1.0}, b{0.5, 0.5};
  std::vector<double> c{-1.0, 0.0}, d{0.4, 0.0};
  // sigmoid(0) * sigmoid(-0.4)
  CHECK(predict_link(a, b, c, d).z == doctest::Approx(0.5 * sig(-0.4)).epsilon(1e-12));
  CHECK(predict_link(a, b, c, d).z == doctest::Approx(0.2007).epsilon(1e-3));
}

TEST_CASE("predict_link: symmetric and factorized over random embeddings") {
  std::mt19937_64 rng(1);
  DecoupledEmbeddings e{testing::random_matrix(10, 4, rng), testing::random_matrix(10, 6, rng)};
  for (NodeId u = 0; u < 10; ++u)
    for (NodeId v = u + 1; v < 10; ++v) {
      LinkProbability p = predict_link(u, v, e), q = predict_link(v, u, e);
      CHECK(p.z == q.z);
      CHECK(std::abs(p.z - p.z_d * p.z_o) <= 1e-12);
      CHECK(p.z > 0.0);
      CHECK(p.z < 1.0);
    }
  DecoupledEmbeddings plain{e.hd, Matrix(10, 0)};
  CHECK(predict_link(0, 1, plain).z_o == 1.0);
}

TEST_CASE("reconstruction loss: constant probability gives the BCE of 1/4") {
  Graph g = testing::graph_of(4, {{0, 1}, {2, 3}});
  Tape t;
  EmbeddingVars e = vars(t, Matrix(4, 2), Matrix(4, 3));
  std::vector<NodePair> neg{{0, 2}, {1, 3}};
  // half the terms are -ln(1/4), half -ln(3/4)
  const double expected = 0.5 * (std::log(4.0) + std::log(4.0 / 3.0));
  CHECK(reconstruction_loss(g, e, neg).scalar() == doctest::Approx(expected).epsilon(1e-12));
  // without the invariant factor Z = 1/2 everywhere: ln 2
  Tape t2;
  EmbeddingVars e2 = vars(t2, Matrix(4, 2), Matrix(4, 0));
  CHECK(reconstruction_loss(g, e2, neg).scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("reconstruction loss: three-node hand computation") {
  Graph g = testing::graph_of(3, {{0, 1}, {1, 2}});
  Matrix hd = Matrix::from_rows({{1.0}, {0.5}, {-1.0}});
  Matrix ho = Matrix::from_rows({{0.2}, {0.4}, {0.0}});
  std::vector<NodePair> neg{{0, 2}};
  // edges: (0,1) sig(.5)sig(.08), (1,2) sig(-.5)sig(0); non-edge (0,2) sig(-1)sig(0)
  const double expected =
      -(std::log(sig(0.5) * sig(0.08)) + std::log(sig(-0.5) * 0.5) + std::log(1.0 - sig(-1.0) * 0.5)) / 3.0;
  Tape t;
  CHECK(reconstruction_loss(g, vars(t, hd, ho), neg).scalar() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(bce_oracle(g, hd, ho, neg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("reconstruction loss: gradient check on random graphs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g = testing::random_graph(9, 0.3, rng);
    std::vector<NodePair> neg = sample_non_edges(g, g.num_edges(), rng);
    for (const auto& p : neg) {
      CHECK(p.u != p.v);
      CHECK_FALSE(g.has_edge(p.u, p.v));
    }
    Matrix hd = testing::random_matrix(9, 3, rng, 0.7), ho = testing::random_matrix(9, 2, rng, 0.7);
    Tape t;
    CHECK(reconstruction_loss(g, vars(t, hd, ho), neg).scalar() ==
          doctest::Approx(bce_oracle(g, hd, ho, neg)).epsilon(1e-12));
    auto f = [&](Tape& tape, const std::vector<Var>& v) {
      (void)tape;
      return reconstruction_loss(g, EmbeddingVars{v[0], v[1]}, neg);
    };
    CHECK(testing::gradient_check(f, {hd, ho}) < 1e-6);
  }
}

TEST_CASE("sample_non_edges: complete graph has none") {
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(sample_non_edges(testing::cliques(1, 4), 3, rng), DataError);
}

TEST_CASE("reconstruction loss decreases on two cliques") {
  std::mt19937_64 rng(4);
  Graph g = testing::graph_of(4, {{0, 1}, {2, 3}});
  nn::ParameterStore store;
  auto& hd = store.add("hd", testing::random_matrix(4, 2, rng, 0.1));
  auto& ho = store.add("ho", testing::random_matrix(4, 2, rng, 0.1));
  nn::Adam adam(nn::AdamOptions{.lr = 0.05});
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    store.zero_grad();
    Tape t;
    Var loss = reconstruction_loss(g, EmbeddingVars{t.parameter(hd), t.parameter(ho)}, 1, rng);
    if (step == 0) first = loss.scalar();
    last = loss.scalar();
    t.backward(loss);
    adam.step(store);
  }
  CHECK(last < first);
  CHECK(last < 0.5 * first);
}

TEST_CASE("discrepancy metrics: hand values") {
  std::vector<double> a{1.0, 0.0}, b{0.0, 1.0}, c{2.0, 0.0};
  CHECK(discrepancy(DiscrepancyMetric::l1, a, b) == doctest::Approx(2.0));
  CHECK(discrepancy(DiscrepancyMetric::l2, a, b) == doctest::Approx(std::sqrt(2.0)));
  CHECK(discrepancy(DiscrepancyMetric::linf, a, b) == doctest::Approx(1.0));
  CHECK(discrepancy(DiscrepancyMetric::cosine, a, b) == doctest::Approx(1.0));
  CHECK(discrepancy(DiscrepancyMetric::cosine, a, c) == doctest::Approx(0.0));
  for (auto m : {DiscrepancyMetric::l1, DiscrepancyMetric::l2, DiscrepancyMetric::cosine, DiscrepancyMetric::linf}) {
    CHECK(parse_metric(to_string(m)) == m);
    CHECK(discrepancy(m, a, a) == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(parse_metric("l3"), ConfigError);
}

TEST_CASE("discrepancy loss: worked example") {
  Tape t;
  Matrix hd = Matrix::from_rows({{0.0, 0.0}, {3.0, 4.0}});
  Matrix ho = Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}});
  std::vector<NodePair> pairs{{0, 1}};
  // |ho diff| = 1, |hd diff| = 5
  CHECK(discrepancy_loss(vars(t, hd, ho), pairs, DiscrepancyMetric::l2).scalar() ==
        doctest::Approx(1.0 / (5.0 + 1e-8)).epsilon(1e-12));
  CHECK(discrepancy_loss(vars(t, hd, ho), pairs, DiscrepancyMetric::l1).scalar() ==
        doctest::Approx(1.0 / (7.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("discrepancy loss: homogeneous under joint scaling for norm metrics") {
  std::mt19937_64 rng(5);
  Matrix hd = testing::random_matrix(6, 3, rng), ho = testing::random_matrix(6, 3, rng);
  std::vector<NodePair> pairs{{0, 1}, {2, 3}, {4, 5}, {0, 5}};
  for (auto m : {DiscrepancyMetric::l1, DiscrepancyMetric::l2, DiscrepancyMetric::linf}) {
    Tape t;
    Matrix hd2 = hd, ho2 = ho;
    for (double& v : hd2.data()) v *= 3.0;
    for (double& v : ho2.data()) v *= 3.0;
    CHECK(discrepancy_loss(vars(t, hd, ho), pairs, m).scalar() ==
          doctest::Approx(discrepancy_loss(vars(t, hd2, ho2), pairs, m).scalar()).epsilon(1e-7));
  }
}

TEST_CASE("discrepancy loss: gradient check for every metric") {
  std::mt19937_64 rng(6);
  for (auto m : {DiscrepancyMetric::l1, DiscrepancyMetric::l2, DiscrepancyMetric::cosine, DiscrepancyMetric::linf}) {
    CAPTURE(to_string(m));
    for (int trial = 0; trial < 3; ++trial) {
      Matrix hd = testing::random_matrix(8, 3, rng), ho = testing::random_matrix(8, 4, rng);
      std::vector<NodePair> pairs{{0, 4}, {1, 5}, {2, 6}, {3, 7}, {0, 7}};
      auto f = [&](Tape&, const std::vector<Var>& v) { return discrepancy_loss(EmbeddingVars{v[0], v[1]}, pairs, m); };
      CHECK(testing::gradient_check(f, {hd, ho}) < 1e-5);
    }
  }
}

TEST_CASE("cross-class pairs come from distinct classes") {
  std::mt19937_64 rng(7);
  Assignment a = Assignment::from_hard({0, 0, 1, 1, 2, 2, 2}, 4);
  auto pairs = sample_cross_class_pairs(a, 256, rng);
  CHECK(pairs.size() == 256);
  for (const auto& p : pairs) CHECK(a.hard(p.u) != a.hard(p.v));
  Assignment single = Assignment::from_hard({1, 1, 1}, 3);
  CHECK_THROWS_AS(sample_cross_class_pairs(single, 4, rng), DataError);
}

TEST_CASE("rewire: three cases are exact") {
  // e^o = 0.5, 0.1 and 1 on three disjoint edges
  Graph g = testing::graph_of(6, {{0, 1}, {2, 3}, {4, 5}});
  Matrix ho = Matrix::from_rows({{0.0}, {0.0}, {1.0}, {std::log(1.0 / 9.0)}, {std::sqrt(50.0)}, {std::sqrt(50.0)}});
  const double eta = 4.0;
  Graph r = rewire(g, ho, eta).graph;
  CHECK(r.weight(0, 1) == 2.0);
  CHECK(r.weight(2, 3) == 4.0);  // cap binds
  CHECK(r.weight(4, 5) == 1.0);
  CHECK(r.num_edges() == 3);
  // weight scales with e
  std::vector<double> w{0.5, 0.2, 3.0};
  Graph r2 = rewire(g.with_weights(w), ho, eta).graph;
  CHECK(r2.weight(0, 1) == 1.0);
  CHECK(r2.weight(2, 3) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r2.weight(4, 5) == 3.0);
  CHECK(rewire(g, Matrix(6, 0), eta).graph.weight(0, 1) == 1.0);
  CHECK_THROWS_AS(rewire(g, ho, 0.0), ConfigError);
}

TEST_CASE("encoder: zero weights give zero embeddings") {
  std::mt19937_64 rng(8);
  Graph g = testing::random_graph(6, 0.4, rng);
  SparseMatrix a = normalize_adjacency(g);
  Matrix x = testing::random_matrix(6, 5, rng);
  nn::ParameterStore store;
  DecoupledEncoder enc(store, 5, 0, EncoderConfig{.hidden = 4, .dim_d = 2, .dim_o = 3}, rng);
  for (auto& p : store.all()) p.value.fill(0.0);
  EncoderInputs in{&x, &a, &a, {}};
  DecoupledEmbeddings e = enc.encode(in);
  CHECK(e.hd.cols() == 2);
  CHECK(e.ho.cols() == 3);
  for (double v : e.hd.data()) CHECK(v == 0.0);
  for (double v : e.ho.data()) CHECK(v == 0.0);
}

TEST_CASE("encoder: no_decouple drops the invariant tower") {
  std::mt19937_64 rng(9);
  SparseMatrix a = normalize_adjacency(testing::random_graph(6, 0.4, rng));
  Matrix x = testing::random_matrix(6, 3, rng);
  nn::ParameterStore store;
  DecoupledEncoder enc(store, 3, 0, EncoderConfig{.hidden = 4, .dim_d = 2, .dim_o = 3, .decouple = false}, rng);
  Tape t;
  EmbeddingVars e = enc.forward(t, EncoderInputs{&x, &a, &a, {}});
  CHECK_FALSE(e.has_invariant());
  CHECK(e.hd.cols() == 2);
}

TEST_CASE("encoder: parameter gradients match central differences") {
  std::mt19937_64 rng(10);
  Graph g = testing::random_graph(7, 0.35, rng);
  SparseMatrix a = normalize_adjacency(g), aux = normalize_adjacency(testing::random_graph(7, 0.3, rng));
  Matrix x = testing::random_matrix(7, 3, rng);
  nn::ParameterStore store;
  DecoupledEncoder enc(store, 3, 1, EncoderConfig{.hidden = 4, .dim_d = 2, .dim_o = 2}, rng);
  EncoderInputs in{&x, &a, &a, {&aux}};
  auto loss_of = [&](Tape& t) {
    EmbeddingVars e = enc.forward(t, in);
    return ad::add(ad::sum(ad::square(e.hd)), ad::sum(ad::tanh(e.ho)));
  };
  store.zero_grad();
  {
    Tape t;
    t.backward(loss_of(t));
  }
  double worst = 0.0;
  const double h = 1e-6;
  for (auto& p : store.all()) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double keep = p.value.data()[k];
      p.value.data()[k] = keep + h;
      Tape up;
      const double fu = loss_of(up).scalar();
      p.value.data()[k] = keep - h;
      Tape down;
      const double fd = loss_of(down).scalar();
      p.value.data()[k] = keep;
      worst = std::max(worst, testing::rel_err(p.grad.data()[k], (fu - fd) / (2.0 * h)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("mlp link head produces probabilities") {
  std::mt19937_64 rng(11);
  nn::ParameterStore store;
  MlpLinkHead head(store, 2, 3, 8, rng);
  Tape t;
  Matrix hd = testing::random_matrix(5, 2, rng), ho = testing::random_matrix(5, 3, rng);
  Var p = head.forward(t, t.constant(hd), t.constant(hd), t.constant(ho), t.constant(ho));
  CHECK(p.rows() == 5);
  for (double v : p.value().data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}
