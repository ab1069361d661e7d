#include "complearn/diff/checkpoint.hpp"
#include "complearn/diff/finite_diff.hpp"
#include "complearn/diff/graph.hpp"
#include "complearn/diff/mlp.hpp"
#include "complearn/diff/optim.hpp"
#include "complearn/error.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <functional>
#include <sstream>

using namespace complearn;
using namespace complearn::diff;
using complearn::testing::close;
using complearn::testing::random_matrix;

namespace {

// Compares backward() against central differences for every coordinate.
void check_gradients(Graph& graph, NodeId loss, const Feed& feed, const std::vector<Parameter*>& params,
                     double rel = 1e-4, double abs_floor = 1e-6) {
  graph.forward(feed);
  for (auto* p : params) p->zero_grad();
  graph.backward(loss);
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  auto f = [&] {
    graph.forward(feed);
    return graph.scalar(loss);
  };
  const auto numeric = finite_difference_grad(f, params, 1e-5);
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Index i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k](i);
      const double n = numeric[k](i);
      INFO(params[k]->name << "[" << i << "] analytic " << a << " numeric " << n);
      CHECK(close(a, n, rel, abs_floor));
    }
  }
}

}  // namespace

TEST_CASE("square of a scalar and its derivative") {
  Parameter x("x", 1, 1);
  x.value(0, 0) = 3.0;
  Graph g;
  const auto sq = g.sum(g.square(g.parameter(x)));
  g.forward({});
  CHECK(g.scalar(sq) == 9.0);
  g.backward(sq);
  CHECK(x.grad(0, 0) == 6.0);
}

TEST_CASE("softmax of equal logits is uniform") {
  Graph g;
  const auto in = g.input("z", 1, 3);
  const auto s = g.softmax_rows(in);
  g.forward({{"z", Matrix::Zero(1, 3)}});
  for (int j = 0; j < 3; ++j) CHECK(g.value(s)(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("zero-weight MLP with softmax head outputs the uniform distribution") {
  Mlp net("net", MlpSpec::uniform({5, 7, 4}, Activation::kRelu, OutputHead::kSoftmax));
  net.zero();
  std::mt19937_64 rng(1);
  const Matrix out = net.apply(random_matrix(6, 5, rng));
  CHECK((out.array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("cross-entropy gradient w.r.t. logits is softmax minus one-hot") {
  std::mt19937_64 rng(2);
  Parameter z("z", 3, 4);
  z.value = random_matrix(3, 4, rng);
  Matrix t = Matrix::Zero(3, 4);
  t(0, 1) = t(1, 3) = t(2, 0) = 1.0;
  Graph g;
  const auto loss = g.softmax_cross_entropy(g.parameter(z), g.constant(t));
  g.forward({});
  g.backward(loss);
  const Matrix expected = softmax_rows(z.value) - t;
  CHECK((z.grad - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("random 2-16-8-4 MLP with softmax CE matches finite differences") {
  Mlp net("net", MlpSpec::uniform({2, 16, 8, 4}, Activation::kTanh, OutputHead::kSoftmax));
  net.initialize(11);
  std::mt19937_64 rng(3);
  Graph g;
  const auto x = g.input("x", kDynamic, 2);
  const auto t = g.input("t", kDynamic, 4);
  const auto loss = g.softmax_cross_entropy(net.build(g, x).logits, t);
  Matrix targets = Matrix::Zero(5, 4);
  for (int i = 0; i < 5; ++i) targets(i, i % 4) = 0.2;
  check_gradients(g, loss, {{"x", random_matrix(5, 2, rng)}, {"t", targets}}, net.parameters());
}

TEST_CASE("every differentiable op matches finite differences") {
  std::mt19937_64 rng(4);
  Parameter a("a", 3, 4), b("b", 3, 4), w("w", 4, 2), bias("bias", 1, 4), sq("sq", 3, 3);
  a.value = random_matrix(3, 4, rng);
  b.value = random_matrix(3, 4, rng);
  w.value = random_matrix(4, 2, rng);
  bias.value = random_matrix(1, 4, rng);
  sq.value = random_matrix(3, 3, rng);
  const std::vector<Parameter*> all{&a, &b, &w, &bias, &sq};

  using Builder = std::function<NodeId(Graph&, NodeId, NodeId, NodeId, NodeId, NodeId)>;
  const std::vector<std::pair<const char*, Builder>> cases = {
      {"matmul", [](Graph& g, NodeId a, NodeId, NodeId w, NodeId, NodeId) { return g.sum(g.square(g.matmul(a, w))); }},
      {"add_bias", [](Graph& g, NodeId a, NodeId, NodeId, NodeId c, NodeId) { return g.sum(g.square(g.add_bias(a, c))); }},
      {"add/sub/mul", [](Graph& g, NodeId a, NodeId b, NodeId, NodeId, NodeId) {
         return g.sum(g.mul(g.add(a, b), g.sub(a, b)));
       }},
      {"affine", [](Graph& g, NodeId a, NodeId, NodeId, NodeId, NodeId) { return g.mean(g.square(g.affine(a, -1.5, 0.3))); }},
      {"relu", [](Graph& g, NodeId a, NodeId b, NodeId, NodeId, NodeId) { return g.sum(g.mul(g.relu(a), b)); }},
      {"leaky_relu", [](Graph& g, NodeId a, NodeId b, NodeId, NodeId, NodeId) { return g.sum(g.mul(g.leaky_relu(a, 0.2), b)); }},
      {"sigmoid", [](Graph& g, NodeId a, NodeId b, NodeId, NodeId, NodeId) { return g.sum(g.mul(g.sigmoid(a), b)); }},
      {"tanh", [](Graph& g, NodeId a, NodeId b, NodeId, NodeId, NodeId) { return g.sum(g.mul(g.tanh(a), b)); }},
      {"softmax_rows", [](Graph& g, NodeId a, NodeId b, NodeId, NodeId, NodeId) { return g.sum(g.mul(g.softmax_rows(a), b)); }},
      {"off_diagonal_softmax", [](Graph& g, NodeId, NodeId, NodeId, NodeId, NodeId s) {
         return g.sum(g.square(g.off_diagonal_softmax(s)));
       }},
      {"concat_cols", [](Graph& g, NodeId a, NodeId b, NodeId, NodeId, NodeId) { return g.sum(g.square(g.concat_cols(a, b))); }},
      {"clamped_nll", [](Graph& g, NodeId a, NodeId, NodeId, NodeId, NodeId) {
         // Target weights are treated as constants.
         return g.clamped_nll(g.softmax_rows(a), g.constant(Matrix::Constant(3, 4, 0.25)));
       }},
      {"sigmoid_bce", [](Graph& g, NodeId, NodeId, NodeId w, NodeId, NodeId) {
         Matrix t(4, 1);
         t << 1, 0, 0.7, 0.2;
         return g.sigmoid_bce(g.matmul(g.constant(Matrix::Constant(4, 4, 0.3)), g.matmul(g.constant(Matrix::Identity(4, 4)), g.matmul(w, g.constant(Matrix::Constant(2, 1, 1.0))))), g.constant(t));
       }},
  };
  for (const auto& [name, build] : cases) {
    const std::string op = name;
    CAPTURE(op);
    Graph g;
    const auto loss = build(g, g.parameter(a), g.parameter(b), g.parameter(w), g.parameter(bias), g.parameter(sq));
    check_gradients(g, loss, {}, all);
  }
}

TEST_CASE("100 random MLPs up to four layers agree with finite differences") {
  const Activation acts[] = {Activation::kRelu, Activation::kLeakyRelu, Activation::kTanh, Activation::kSigmoid,
                             Activation::kIdentity};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> width(1, 32), depth(1, 4), act(0, 4);
    const int layers = depth(rng);
    std::vector<Index> widths{width(rng)};
    std::vector<Activation> hidden;
    for (int l = 0; l < layers; ++l) widths.push_back(width(rng));
    widths.back() = std::max<Index>(widths.back(), 2);
    for (int l = 0; l + 1 < layers; ++l) hidden.push_back(acts[act(rng)]);
    Mlp net("net", MlpSpec{widths, hidden, OutputHead::kSoftmax, 0.2});
    net.initialize(seed);
    Graph g;
    const auto x = g.input("x", kDynamic, widths.front());
    const auto loss = g.softmax_cross_entropy(net.build(g, x).logits, g.input("t", kDynamic, widths.back()));
    Matrix t = Matrix::Zero(3, widths.back());
    for (int i = 0; i < 3; ++i) t(i, (i * 7) % widths.back()) = 1.0 / 3.0;
    CAPTURE(seed);
    check_gradients(g, loss, {{"x", random_matrix(3, widths.front(), rng)}, {"t", t}}, net.parameters());
  }
}

TEST_CASE("forward is pure") {
  Mlp net("net", MlpSpec::uniform({3, 8, 3}, Activation::kRelu, OutputHead::kSoftmax));
  net.initialize(5);
  Graph g;
  const auto out = net.build(g, g.input("x", kDynamic, 3)).output;
  std::mt19937_64 rng(6);
  const Feed feed{{"x", random_matrix(4, 3, rng)}};
  g.forward(feed);
  const Matrix first = g.value(out);
  g.forward(feed);
  CHECK(first == g.value(out));
  CHECK(((first.rowwise().sum().array() - 1.0).abs() < 1e-9).all());
  CHECK((first.array() >= 0.0).all());
}

TEST_CASE("graph errors are structured") {
  Graph g;
  const auto x = g.input("x", kDynamic, 3);
  const auto w = g.input("w", 4, 2);
  g.set_label(g.matmul(x, g.input("v", kDynamic, 2)), "projection");

  SUBCASE("shape mismatch at forward names the node") {
    try {
      g.forward({{"x", Matrix::Zero(2, 3)}, {"w", Matrix::Zero(4, 2)}, {"v", Matrix::Zero(2, 2)}});
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("projection") != std::string::npos);
    }
  }
  SUBCASE("missing and unknown inputs") {
    CHECK_THROWS_AS(g.forward({{"x", Matrix::Zero(2, 3)}}), Error);
    CHECK_THROWS_AS(g.forward({{"x", Matrix::Zero(2, 3)}, {"w", Matrix::Zero(4, 2)}, {"v", Matrix::Zero(3, 2)},
                               {"extra", Matrix::Zero(1, 1)}}),
                    Error);
  }
  SUBCASE("static shapes are checked at construction") { CHECK_THROWS_AS(g.matmul(x, w), ShapeError); }
  (void)w;
}

TEST_CASE("backward preconditions") {
  Parameter p("p", 2, 2);
  Graph g;
  const auto node = g.parameter(p);
  const auto loss = g.sum(node);
  CHECK_THROWS_AS(g.backward(loss), Error);
  g.forward({});
  CHECK_THROWS_AS(g.backward(node), Error);
  g.backward(loss);
  CHECK(p.grad == Matrix::Ones(2, 2));
}

TEST_CASE("backward leaves non-parameter leaves and unrelated parameters untouched") {
  Parameter p("p", 1, 2), q("q", 1, 2);
  p.value << 1, 2;
  q.value << 3, 4;
  q.grad.setConstant(7.0);
  Graph g;
  const auto loss = g.sum(g.square(g.parameter(p)));
  g.parameter(q);
  g.forward({});
  g.backward(loss);
  CHECK(q.grad == Matrix::Constant(1, 2, 7.0));
}

TEST_CASE("clamped log probabilities stay finite with zero gradient where clamped") {
  Parameter p("p", 1, 3);
  p.value << 0.0, 0.5, 0.5;
  Matrix t(1, 3);
  t << 1.0, 0.0, 0.0;
  Graph g;
  const auto loss = g.clamped_nll(g.parameter(p), g.constant(t));
  g.forward({});
  CHECK(g.scalar(loss) == doctest::Approx(-std::log(kProbabilityFloor)));
  g.backward(loss);
  CHECK(p.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sigmoid BCE is finite for saturated scores") {
  Graph g;
  const auto s = g.input("s", kDynamic, 1);
  const auto t = g.input("t", kDynamic, 1);
  const auto loss = g.sigmoid_bce(s, t);
  Matrix scores(4, 1), targets(4, 1);
  scores << 1e6, -1e6, 800, -800;
  targets << 0, 1, 0, 1;
  g.forward({{"s", scores}, {"t", targets}});
  CHECK(std::isfinite(g.scalar(loss)));
  CHECK(g.scalar(loss) == doctest::Approx(-std::log(kProbabilityFloor)).epsilon(1e-9));
}

TEST_CASE("off-diagonal softmax realizes a transition matrix") {
  std::mt19937_64 rng(8);
  Parameter l("l", 5, 5);
  l.value = random_matrix(5, 5, rng, 3.0);
  Graph g;
  const auto m = g.off_diagonal_softmax(g.parameter(l));
  g.forward({});
  const Matrix& v = g.value(m);
  CHECK(v.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK((v.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((v.array() >= 0.0).all());
}

TEST_CASE("finite differences") {
  CHECK(finite_difference([](double x) { return x * x; }, 3.0, 1e-5) == doctest::Approx(6.0).epsilon(1e-6));
  Parameter p("p", 2, 3);
  const auto grads = finite_difference_grad([] { return 4.2; }, {&p}, 1e-5);
  CHECK(grads.front().cwiseAbs().maxCoeff() == 0.0);
  // Two step sizes agree on a smooth loss.
  std::mt19937_64 rng(9);
  p.value = random_matrix(2, 3, rng);
  auto f = [&] { return (p.value.array().sin() * p.value.array()).sum(); };
  const auto g1 = finite_difference_grad(f, {&p}, 1e-4);
  const auto g2 = finite_difference_grad(f, {&p}, 1e-6);
  CHECK((g1.front() - g2.front()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("Glorot initialization bounds and zero biases") {
  Mlp net("net", MlpSpec::uniform({10, 30, 4}, Activation::kRelu, OutputHead::kLinear));
  net.initialize(3);
  const auto params = net.parameters();
  const double a0 = std::sqrt(6.0 / 40.0), a1 = std::sqrt(6.0 / 34.0);
  CHECK(params[0]->value.cwiseAbs().maxCoeff() <= a0);
  CHECK(params[0]->value.cwiseAbs().maxCoeff() > 0.5 * a0);
  for (const auto* p : params) {
    if (p->name.find("bias") != std::string::npos) CHECK(p->value.cwiseAbs().maxCoeff() == 0.0);
    if (p->name == "net/layer1/weight") CHECK(p->value.cwiseAbs().maxCoeff() <= a1);
  }
  Mlp again("net", MlpSpec::uniform({10, 30, 4}, Activation::kRelu, OutputHead::kLinear));
  again.initialize(3);
  CHECK(again.parameters()[0]->value == params[0]->value);
}

TEST_CASE("invalid MLP specs are rejected") {
  CHECK_THROWS_AS(Mlp("n", MlpSpec{{3}, {}, OutputHead::kLinear, 0.2}), InvalidArgument);
  CHECK_THROWS_AS(Mlp("n", MlpSpec{{3, 0, 2}, {Activation::kRelu}, OutputHead::kLinear, 0.2}), InvalidArgument);
  CHECK_THROWS_AS(Mlp("n", MlpSpec{{3, 4, 2}, {}, OutputHead::kLinear, 0.2}), InvalidArgument);
}

TEST_CASE("optimizer steps") {
  SUBCASE("plain SGD") {
    Parameter p("p", 1, 1);
    p.value(0, 0) = 1.0;
    p.grad(0, 0) = 1.0;
    OptimizerConfig c;
    c.learning_rate = 0.1;
    Optimizer(c, {&p}).step();
    CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-15));
  }
  SUBCASE("SGD with momentum and weight decay follows the recurrence") {
    Parameter p("p", 1, 1);
    p.value(0, 0) = 2.0;
    OptimizerConfig c = OptimizerConfig::warmup_sgd();
    Optimizer opt(c, {&p});
    double value = 2.0, buf = 0.0;
    for (int t = 0; t < 3; ++t) {
      p.grad(0, 0) = 0.5 - t;
      buf = c.momentum * buf + (0.5 - t) + c.weight_decay * value;
      value -= c.learning_rate * buf;
      opt.step();
      CHECK(p.value(0, 0) == doctest::Approx(value).epsilon(1e-14));
    }
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    for (auto c : {OptimizerConfig{}, OptimizerConfig::joint_adam()}) {
      Parameter p("p", 2, 2);
      p.value.setConstant(0.7);
      Optimizer opt(c, {&p});
      opt.step();
      opt.step();
      CHECK(p.value == Matrix::Constant(2, 2, 0.7));
    }
  }
  SUBCASE("first Adam step has magnitude lr regardless of gradient scale") {
    for (double scale : {1e-3, 1.0, 1e3}) {
      Parameter p("p", 1, 3);
      p.grad.setConstant(scale);
      OptimizerConfig c = OptimizerConfig::joint_adam();
      Optimizer(c, {&p}).step();
      // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
      const double expected = c.learning_rate * scale / (scale + c.epsilon);
      CHECK(p.value(0, 0) == doctest::Approx(-expected).epsilon(1e-12));
    }
  }
  SUBCASE("non-finite gradients abort without updating") {
    Parameter p("p", 1, 2);
    p.value << 1, 2;
    p.grad << 0.5, std::nan("");
    Optimizer opt(OptimizerConfig{}, {&p});
    CHECK_THROWS_AS(opt.step(), DivergenceError);
    CHECK(p.value(0, 0) == 1.0);
  }
  SUBCASE("config validation") {
    OptimizerConfig c;
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = OptimizerConfig::joint_adam();
    c.beta1 = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = OptimizerConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK(optimizer_kind_from_string("adam") == OptimizerKind::kAdam);
    CHECK_THROWS_AS(optimizer_kind_from_string("rmsprop"), InvalidArgument);
  }
}

TEST_CASE("SGD decreases the loss on a separable two-class problem") {
  std::mt19937_64 rng(12);
  Matrix x = random_matrix(64, 2, rng);
  Matrix t = Matrix::Zero(64, 2);
  for (Index i = 0; i < 64; ++i) {
    x(i, 0) += (i % 2 == 0) ? 2.0 : -2.0;
    t(i, i % 2) = 1.0 / 64.0;
  }
  Mlp net("net", MlpSpec::uniform({2, 8, 2}, Activation::kRelu, OutputHead::kSoftmax));
  net.initialize(1);
  Graph g;
  const auto loss = g.softmax_cross_entropy(net.build(g, g.input("x", kDynamic, 2)).logits, g.input("t", kDynamic, 2));
  OptimizerConfig c;
  c.learning_rate = 0.1;
  Optimizer opt(c, net.parameters());
  std::vector<double> trace;
  for (int step = 0; step < 100; ++step) {
    g.forward({{"x", x}, {"t", t}});
    trace.push_back(g.scalar(loss));
    opt.zero_grad();
    g.backward(loss);
    opt.step();
  }
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 10 <= trace.size(); i += 10) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) s += trace[j];
    smooth.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
  CHECK(trace.back() < 0.5 * trace.front());
}

TEST_CASE("checkpoints round-trip and report corrupt input offsets") {
  Mlp net("C", MlpSpec::uniform({3, 5, 2}, Activation::kRelu, OutputHead::kSoftmax));
  net.initialize(4);
  std::vector<const Parameter*> params(std::as_const(net).parameters());
  std::stringstream buf;
  write_checkpoint(buf, params);
  const std::string bytes = buf.str();

  std::stringstream in(bytes);
  const auto tensors = read_checkpoint(in);
  REQUIRE(tensors.size() == params.size());
  Mlp copy("C", net.spec());
  restore(tensors, copy.parameters());
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(copy.parameters()[i]->value == params[i]->value);

  SUBCASE("bad magic") {
    std::stringstream bad("XXXX" + bytes.substr(4));
    try {
      read_checkpoint(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("truncated payload") {
    std::stringstream cut(bytes.substr(0, bytes.size() - 3));
    try {
      read_checkpoint(cut);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() > 8);
      CHECK(e.offset() <= bytes.size());
    }
  }
  SUBCASE("restore rejects missing or reshaped tensors") {
    Mlp other("C", MlpSpec::uniform({3, 6, 2}, Activation::kRelu, OutputHead::kSoftmax));
    CHECK_THROWS_AS(restore(tensors, other.parameters()), Error);
    Mlp renamed("D", net.spec());
    CHECK_THROWS_AS(restore(tensors, renamed.parameters()), Error);
  }
}
