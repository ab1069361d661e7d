#include "complearn/dcl/risk.hpp"
#include "complearn/diff/finite_diff.hpp"
#include "complearn/error.hpp"
#include "complearn/gan/ccgan.hpp"
#include "complearn/harness/mixture.hpp"
#include "complearn/priors/qp.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <cmath>

using namespace complearn;
using namespace complearn::gan;
using complearn::testing::close;
using complearn::testing::random_matrix;
using labels::uniform_transition;

namespace {

void check_gradients(diff::Graph& graph, diff::NodeId loss, const diff::Feed& feed,
                     const std::vector<diff::Parameter*>& params) {
  graph.forward(feed);
  for (auto* p : params) p->zero_grad();
  graph.backward(loss);
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  const auto numeric = diff::finite_difference_grad(
      [&] {
        graph.forward(feed);
        return graph.scalar(loss);
      },
      params, 1e-6);
  for (std::size_t k = 0; k < params.size(); ++k)
    for (Eigen::Index i = 0; i < analytic[k].size(); ++i) {
      INFO(params[k]->name << "[" << i << "] " << analytic[k](i) << " vs " << numeric[k](i));
      CHECK(close(analytic[k](i), numeric[k](i), 1e-4, 1e-7));
    }
}

std::vector<diff::Parameter*> concat(std::vector<diff::Parameter*> a, const std::vector<diff::Parameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

double clamp_log(double p) { return std::log(std::min(std::max(p, 1e-12), 1.0 - 1e-12)); }

double chi2_critical_01(int df) {
  const double z = 2.3263478740;
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3);
}

struct Toy {
  harness::LabeledData train;
  harness::LabeledData test;
  labels::ComplementaryDataset ds;
};

Toy ring_toy(int k, long n, double r_l, std::uint64_t seed) {
  const auto spec = harness::GaussianMixtureSpec::ring(k, 2.0, 0.3);
  auto train = harness::gen_ring_mixture(spec, n, seed);
  auto test = harness::gen_ring_mixture(spec, 500, seed + 1);
  auto ds = labels::split_dataset(train.features, train.labels, k, r_l, 1.0, uniform_transition(k), 1, seed + 2);
  return {std::move(train), std::move(test), std::move(ds)};
}

ScheduleConfig small_schedule(int warmup, int joint) {
  ScheduleConfig s;
  s.warmup_epochs = warmup;
  s.joint_epochs = joint;
  s.warmup.batch_size = 64;
  s.joint.batch_size = 64;
  return s;
}

BundleSpec small_bundle() {
  BundleSpec b;
  b.noise_dim = 4;
  b.generator_hidden = {16};
  b.discriminator_hidden = {16};
  b.classifier_hidden = {16};
  return b;
}

}  // namespace

TEST_CASE("sample_labels") {
  for (int v : sample_labels(SimplexVector::one_hot(3, 0), 1000, 1)) CHECK(v == 0);

  const auto draws = sample_labels(SimplexVector::uniform(4), 100000, 2);
  std::vector<double> counts(4, 0.0);
  for (int v : draws) counts[static_cast<std::size_t>(v)] += 1;
  const double sigma = std::sqrt(100000 * 0.25 * 0.75);
  for (double c : counts) CHECK(std::abs(c - 25000.0) <= 3.0 * sigma);

  // Prior produced by the QP from a random complementary distribution.
  const auto m = labels::random_transition(5, 4);
  Eigen::VectorXd truth(5);
  truth << 0.1, 0.3, 0.2, 0.25, 0.15;
  const auto prior = priors::estimate_prior_qp(SimplexVector(m.entries().transpose() * truth), m).estimate;
  const int n = 50000;
  const auto y = sample_labels(prior, n, 5);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(5);
  for (int v : y) obs(v) += 1;
  const Eigen::VectorXd expected = n * prior.values();
  const double stat = ((obs - expected).array().square() / expected.array()).sum();
  CHECK(stat < chi2_critical_01(4));

  CHECK(sample_labels(prior, 100, 9) == sample_labels(prior, 100, 9));
}

TEST_CASE("generator") {
  GeneratorModel g(3, 4, 2, {8, 8});
  g.zero();
  std::mt19937_64 rng(1);
  const Matrix z = random_matrix(10, 3, rng);
  const std::vector<int> y{0, 1, 2, 3, 0, 1, 2, 3, 0, 1};
  const Matrix out = generator_forward(g, z, y);
  CHECK(out.cols() == 2);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);

  g.initialize(4);
  const Matrix a = generator_forward(g, z.topRows(1), {0});
  const Matrix b = generator_forward(g, z.topRows(1), {2});
  CHECK((a - b).cwiseAbs().maxCoeff() > 0.0);
  CHECK(generator_forward(g, z, y) == generator_forward(g, z, y));

  CHECK_THROWS_AS(generator_forward(g, z.topRows(1), {4}), InvalidArgument);
  CHECK_THROWS_AS(generator_forward(g, z.topRows(1), {-1}), InvalidArgument);
  CHECK_THROWS_AS(generator_forward(g, random_matrix(1, 2, rng), {0}), ShapeError);

  const auto samples = generate_samples(g, 5, 7);
  CHECK(samples.features.rows() == 20);
  CHECK(samples.features.cols() == 2);
  CHECK(samples.labels[0] == 0);
  CHECK(samples.labels[19] == 3);
}

TEST_CASE("component a") {
  std::mt19937_64 rng(2);
  SUBCASE("D = 0.5 everywhere") {
    auto d = make_discriminator(2, {4});
    d.zero();
    const auto loss = loss_component_a(d, random_matrix(5, 2, rng), random_matrix(7, 2, rng), {});
    CHECK(loss.d_loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(loss.g_loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    const auto hinge = loss_component_a(d, random_matrix(5, 2, rng), random_matrix(7, 2, rng), {Phi::kHinge, 0.0});
    CHECK(hinge.d_loss == 2.0);
    CHECK(hinge.g_loss == 0.0);
  }
  SUBCASE("perfect separation drives d_loss to the clamp floor") {
    auto d = make_discriminator(1, {});
    d.zero();
    d.parameters()[0]->value(0, 0) = 1e6;
    Matrix real = Matrix::Constant(3, 1, 1.0), fake = Matrix::Constant(3, 1, -1.0);
    CHECK(loss_component_a(d, real, fake, {}).d_loss < 1e-11);
  }
  SUBCASE("hand-summed oracle") {
    auto d = make_discriminator(3, {6});
    d.initialize(3);
    const Matrix real = random_matrix(4, 3, rng), fake = random_matrix(6, 3, rng);
    for (double smoothing : {0.0, 0.1}) {
      const Matrix sr = d.apply(real), sf = d.apply(fake);
      double dr = 0.0, df = 0.0, gf = 0.0;
      const double t = 1.0 - smoothing;
      for (Eigen::Index i = 0; i < sr.rows(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-sr(i, 0)));
        dr += -(t * clamp_log(p) + (1 - t) * clamp_log(1 - p));
      }
      for (Eigen::Index i = 0; i < sf.rows(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-sf(i, 0)));
        df += -clamp_log(1 - p);
        gf += -clamp_log(p);
      }
      const auto loss = loss_component_a(d, real, fake, {Phi::kLog, smoothing});
      CHECK(std::abs(loss.d_loss - (dr / 4.0 + df / 6.0)) < 1e-10);
      CHECK(std::abs(loss.g_loss - gf / 6.0) < 1e-10);
    }
  }
  SUBCASE("spec validation") {
    CHECK_THROWS_AS((GanLossSpec{Phi::kLog, 0.4}.validate()), InvalidArgument);
    CHECK(phi_from_string("hinge") == Phi::kHinge);
    CHECK_THROWS_AS(phi_from_string("wasserstein"), InvalidArgument);
  }
}

TEST_CASE("component b delegates to the corrected loss") {
  dcl::ClassifierModel c(dcl::ClassifierModel::default_spec(2, 3, {5}));
  c.initialize(8);
  std::mt19937_64 rng(3);
  const auto m = labels::random_transition(3, 2);
  const Matrix x = random_matrix(1, 2, rng);
  const double direct = dcl::complementary_ce_loss(SimplexVector(c.probabilities(x).row(0).transpose()), 1, m);
  CHECK(loss_component_b(c, m, x, {1}) == direct);

  c.network().zero();
  CHECK(loss_component_b(c, uniform_transition(3), random_matrix(6, 2, rng), {0, 1, 2, 0, 1, 2}) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("component c") {
  std::mt19937_64 rng(4);
  dcl::ClassifierModel c(dcl::ClassifierModel::default_spec(2, 3, {5}));
  GeneratorModel g(2, 3, 2, {6});
  g.initialize(5);
  const Matrix z = random_matrix(8, 2, rng);
  const std::vector<int> y{0, 1, 2, 2, 1, 0, 0, 1};

  c.network().zero();
  CHECK(loss_component_c(c, g, z, y) == doctest::Approx(std::log(3.0)).epsilon(1e-14));

  c.initialize(6);
  const Matrix p = c.probabilities(generator_forward(g, z, y));
  double oracle = 0.0;
  for (int i = 0; i < 8; ++i) oracle -= std::log(p(i, y[static_cast<std::size_t>(i)]));
  CHECK(std::abs(loss_component_c(c, g, z, y) - oracle / 8.0) < 1e-10);

  // One SGD step on C with G frozen lowers the value.
  diff::Graph graph;
  const auto zn = graph.input("z", diff::kDynamic, 2);
  const auto yn = graph.input("y", diff::kDynamic, 3);
  const auto loss = build_component_c(graph, c.network().build(graph, g.build(graph, zn, yn)).logits,
                                      graph.affine(yn, 1.0 / 8.0));
  graph.forward({{"z", z}, {"y", one_hot_rows(y, 3)}});
  const double before = graph.scalar(loss);
  diff::OptimizerConfig sgd;
  sgd.learning_rate = 0.05;
  diff::Optimizer opt(sgd, c.network().parameters());
  opt.zero_grad();
  graph.backward(loss);
  opt.step();
  CHECK(loss_component_c(c, g, z, y) < before);
}

TEST_CASE("all loss components match finite differences on tiny networks") {
  std::mt19937_64 rng(5);
  const int k = 3, d = 2, noise = 2;
  auto bundle = CcganBundle::make(d, k, dcl::TransitionModel::trainable(k),
                                  BundleSpec{noise, {5}, {5}, {5}});
  bundle.classifier.initialize(1);
  bundle.generator.initialize(2);
  bundle.discriminator.initialize(3);
  bundle.transition.parameter()->value = random_matrix(k, k, rng);
  const Matrix x = random_matrix(4, d, rng), z = random_matrix(4, noise, rng);
  const Matrix y_hot = one_hot_rows({0, 2, 1, 2}, k);

  for (auto spec : {GanLossSpec{Phi::kLog, 0.0}, GanLossSpec{Phi::kLog, 0.2}, GanLossSpec{Phi::kHinge, 0.0}}) {
    diff::Graph graph;
    const auto xr = graph.input("x", diff::kDynamic, d);
    const auto fake = bundle.generator.build(graph, graph.input("z", diff::kDynamic, noise),
                                             graph.input("y", diff::kDynamic, k));
    const auto adv = build_component_a(graph, bundle.discriminator.build(graph, xr).output,
                                       bundle.discriminator.build(graph, fake).output, spec);
    diff::Feed feed{{"x", x}, {"z", z}, {"y", y_hot}};
    feed_targets(feed, 4, 4, spec);
    const auto params = concat(bundle.discriminator.parameters(), bundle.generator.network().parameters());
    check_gradients(graph, adv.d_loss, feed, params);
    check_gradients(graph, adv.g_loss, feed, params);
  }
  {
    diff::Graph graph;
    const auto loss = dcl::build_corrected_objective(
        graph, bundle.classifier.network().build(graph, graph.input("x", diff::kDynamic, d)).logits,
        bundle.transition.build(graph), graph.constant(Matrix::Zero(4, k)),
        graph.constant(Matrix(one_hot_rows({1, 0, 0, 2}, k) / 4.0)));
    auto params = bundle.classifier.network().parameters();
    params.push_back(bundle.transition.parameter());
    check_gradients(graph, loss, {{"x", x}}, params);
  }
  {
    diff::Graph graph;
    const auto yn = graph.input("y", diff::kDynamic, k);
    const auto fake = bundle.generator.build(graph, graph.input("z", diff::kDynamic, noise), yn);
    const auto loss = build_component_c(graph, bundle.classifier.network().build(graph, fake).logits,
                                        graph.affine(yn, 0.25));
    check_gradients(graph, loss, {{"z", z}, {"y", y_hot}},
                    concat(bundle.classifier.network().parameters(), bundle.generator.network().parameters()));
  }
}

TEST_CASE("no loss evaluation produces NaN or Inf over 10^6 fuzzed inputs") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> expo(-300.0, 300.0);
  std::uniform_int_distribution<int> coin(0, 1);
  auto wild = [&] { return (coin(rng) ? 1.0 : -1.0) * std::pow(10.0, expo(rng) / 100.0 * (coin(rng) ? 1 : 3)); };

  diff::Graph graph;
  const auto sr = graph.input("sr", diff::kDynamic, 1);
  const auto sf = graph.input("sf", diff::kDynamic, 1);
  const auto adv = build_component_a(graph, sr, sf, {Phi::kLog, 0.1});
  const auto probs = graph.input("p", diff::kDynamic, 4);
  const auto targets = graph.input("t", diff::kDynamic, 4);
  const auto nll = graph.clamped_nll(graph.matmul(probs, graph.constant(uniform_transition(4).entries())), targets);
  const auto ce = graph.softmax_cross_entropy(graph.input("logits", diff::kDynamic, 4), targets);

  const int rows = 1000;
  long evaluations = 0;
  bool all_finite = true;
  for (int round = 0; round < 1000; ++round) {
    Matrix s1(rows, 1), s2(rows, 1), logits(rows, 4), p(rows, 4), t = Matrix::Zero(rows, 4);
    for (int i = 0; i < rows; ++i) {
      s1(i, 0) = wild();
      s2(i, 0) = wild();
      for (int j = 0; j < 4; ++j) logits(i, j) = wild();
      p.row(i) = Eigen::RowVector4d::Zero();
      p(i, i % 4) = 1.0;  // extreme posteriors with exact zeros
      t(i, (i + round) % 4) = 1.0 / rows;
    }
    diff::Feed feed{{"sr", s1}, {"sf", s2}, {"p", p}, {"t", t}, {"logits", logits}};
    feed_targets(feed, rows, rows, {Phi::kLog, 0.1});
    graph.forward(feed);
    for (auto node : {adv.d_loss, adv.g_loss, nll, ce}) all_finite = all_finite && std::isfinite(graph.scalar(node));
    graph.backward(adv.d_loss);
    evaluations += rows;
  }
  CHECK(evaluations == 1000000);
  CHECK(all_finite);
}

TEST_CASE("warm-up only equals train_dcl bit for bit") {
  const auto toy = ring_toy(4, 400, 1.0, 10);
  const auto bspec = small_bundle();
  const auto sched = small_schedule(4, 0);
  const dcl::EvalSet eval{toy.test.features, toy.test.labels, std::nullopt};
  const auto bundle = CcganBundle::make(2, 4, dcl::TransitionModel(uniform_transition(4)), bspec);
  const auto gan = train_ccgan(toy.ds, bundle, sched, 77, &eval);
  const auto base = dcl::train_dcl(toy.ds, dcl::TransitionModel(uniform_transition(4)),
                                   dcl::DclConfig{sched.warmup, sched.warmup_epochs}, 77, &eval, bspec.classifier_hidden);
  const auto a = gan.bundle.classifier.network().parameters();
  const auto b = base.model.network().parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  REQUIRE(gan.report.epochs.size() == base.report.epochs.size());
  for (std::size_t e = 0; e < a.size() && e < gan.report.epochs.size(); ++e) {
    CHECK(gan.report.epochs[e].train_loss == base.report.epochs[e].train_loss);
    CHECK(gan.report.epochs[e].test_accuracy == base.report.epochs[e].test_accuracy);
  }
  CHECK(gan.gan_epochs.empty());
}

TEST_CASE("joint training is deterministic and keeps M valid") {
  const auto toy = ring_toy(3, 300, 1.0, 20);
  const auto sched = small_schedule(2, 2);
  const dcl::EvalSet eval{toy.test.features, toy.test.labels, uniform_transition(3)};
  const auto bundle = CcganBundle::make(2, 3, dcl::TransitionModel::trainable(3), small_bundle());
  const auto r1 = train_ccgan(toy.ds, bundle, sched, 5, &eval);
  const auto r2 = train_ccgan(toy.ds, bundle, sched, 5, &eval);
  REQUIRE(r1.gan_epochs.size() == 2);
  for (std::size_t e = 0; e < r1.gan_epochs.size(); ++e) {
    CHECK(r1.gan_epochs[e].d_loss == r2.gan_epochs[e].d_loss);
    CHECK(r1.gan_epochs[e].g_loss == r2.gan_epochs[e].g_loss);
    CHECK(r1.gan_epochs[e].c_loss == r2.gan_epochs[e].c_loss);
  }
  REQUIRE(r1.report.epochs.size() == 4);
  for (std::size_t e = 0; e < r1.report.epochs.size(); ++e) {
    CHECK(r1.report.epochs[e].train_loss == r2.report.epochs[e].train_loss);
    CHECK(r1.report.epochs[e].m_error == r2.report.epochs[e].m_error);
  }
  const Eigen::MatrixXd mm = r1.bundle.transition.current().entries();
  CHECK(mm.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK((mm.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(r1.report.has_m_error());

  const auto other = train_ccgan(toy.ds, bundle, sched, 6, &eval);
  CHECK(other.gan_epochs[0].d_loss != r1.gan_epochs[0].d_loss);
}

TEST_CASE("plain CCGAN ignores unlabeled features; SCCGAN falls back without them") {
  const auto toy = ring_toy(3, 300, 0.5, 30);
  const auto sched = small_schedule(1, 2);
  const auto bundle = CcganBundle::make(2, 3, dcl::TransitionModel(uniform_transition(3)), small_bundle());

  auto perturbed = toy.train.features;
  for (auto i : toy.ds.unlabeled_indices()) perturbed.row(i).setConstant(50.0);
  const labels::ComplementaryDataset moved(perturbed, toy.ds.evidence(), toy.train.labels, 3, 0.5, 1.0, 0);
  const auto a = train_ccgan(toy.ds, bundle, sched, 3);
  const auto b = train_ccgan(moved, bundle, sched, 3);
  CHECK(a.gan_epochs.back().c_loss == b.gan_epochs.back().c_loss);
  CHECK(a.gan_epochs.back().d_loss == b.gan_epochs.back().d_loss);
  // The semi-supervised variant does see them, through D only.
  const auto s = train_sccgan(moved, bundle, sched, 3);
  CHECK(s.gan_epochs.back().d_loss != b.gan_epochs.back().d_loss);
  CHECK(s.report.warnings.empty());

  const auto full = ring_toy(3, 300, 1.0, 31);
  const auto plain = train_ccgan(full.ds, bundle, sched, 4);
  const auto fallback = train_sccgan(full.ds, bundle, sched, 4);
  REQUIRE(fallback.report.warnings.size() == 1);
  CHECK(fallback.report.warnings[0].find("unlabeled") != std::string::npos);
  for (std::size_t e = 0; e < plain.gan_epochs.size(); ++e) {
    CHECK(plain.gan_epochs[e].d_loss == fallback.gan_epochs[e].d_loss);
    CHECK(plain.gan_epochs[e].c_loss == fallback.gan_epochs[e].c_loss);
  }
}

TEST_CASE("class prior estimate and override") {
  const auto toy = ring_toy(4, 4000, 1.0, 40);
  const auto est = estimate_class_prior(toy.ds, uniform_transition(4));
  const auto qp = priors::estimate_prior_qp(priors::empirical_complementary_prior(toy.ds), uniform_transition(4));
  CHECK(est.values() == qp.estimate.values());
  // Inverting uniform M scales the sampling noise of each frequency by K-1.
  CHECK((est.values().array() - 0.25).abs().maxCoeff() < 4.0 * 3.0 * std::sqrt(0.25 * 0.75 / 4000.0));

  std::vector<labels::LabelEvidence> ordinary;
  for (int i = 0; i < 10; ++i) ordinary.emplace_back(labels::Ordinary{i < 7 ? 0 : 3});
  const labels::ComplementaryDataset ord(Eigen::MatrixXd::Zero(10, 2), ordinary, std::vector<int>(10, 0), 4, 1.0, 0.0, 0);
  CHECK(estimate_class_prior(ord, uniform_transition(4)).values() == Eigen::Vector4d(0.7, 0, 0, 0.3));

  auto sched = small_schedule(1, 1);
  sched.prior_override = SimplexVector::one_hot(4, 2);
  const auto bundle = CcganBundle::make(2, 4, dcl::TransitionModel(uniform_transition(4)), small_bundle());
  CHECK(train_ccgan(toy.ds, bundle, sched, 1).prior.values() == SimplexVector::one_hot(4, 2).values());
  sched.prior_override = SimplexVector::uniform(3);
  CHECK_THROWS_AS(train_ccgan(toy.ds, bundle, sched, 1), InvalidArgument);
}

TEST_CASE("schedule and bundle validation") {
  ScheduleConfig s;
  s.d_steps = 0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = ScheduleConfig{};
  s.weights.generated = -1.0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  auto bundle = CcganBundle::make(2, 3, dcl::TransitionModel(uniform_transition(3)));
  CHECK_NOTHROW(bundle.validate());
  bundle.generator = GeneratorModel(4, 3, 5);
  CHECK_THROWS_AS(bundle.validate(), InvalidArgument);
}

TEST_CASE("M recovery error") {
  const auto u = uniform_transition(3);
  CHECK(m_recovery_error(u, u) == 0.0);
  Eigen::MatrixXd cycle(3, 3);
  cycle << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  CHECK(m_recovery_error(u, labels::TransitionMatrix(cycle)) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));
  CHECK(m_recovery_error(u, labels::TransitionMatrix(cycle)) == doctest::Approx(1.2247).epsilon(1e-4));
  CHECK_THROWS_AS(m_recovery_error(u, uniform_transition(4)), InvalidArgument);
}
