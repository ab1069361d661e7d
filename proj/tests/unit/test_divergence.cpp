#include "complearn/divergence/divergence.hpp"
#include "complearn/error.hpp"

#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

#include <cmath>
#include <limits>

using namespace complearn;
using namespace complearn::divergence;
using complearn::testing::random_simplex;

namespace {

Eigen::VectorXd v(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("divergences on hand-computed pairs") {
  CHECK(tv(v({1, 0}), v({0, 1})) == 1.0);
  const Eigen::VectorXd p = v({0.2, 0.5, 0.3});
  CHECK(kl(p, p) == 0.0);
  CHECK(js(p, p) == 0.0);
  CHECK(tv(v({1, 0}), v({.5, .5})) == 0.5);
  CHECK(kl(v({1, 0}), v({.5, .5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(0.5 <= std::sqrt(kl(v({1, 0}), v({.5, .5})) / 2.0));
  CHECK(std::sqrt(std::log(2.0) / 2.0) == doctest::Approx(0.5887).epsilon(1e-4));
  CHECK(std::isinf(kl(v({.5, .5}), v({1, 0}))));
  CHECK(js(v({1, 0}), v({0, 1})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(tv(v({1, 0}), v({1, 0, 0})), ShapeError);
  CHECK_THROWS_AS(kl(v({1}), v({.5, .5})), ShapeError);
  CHECK_THROWS_AS(js(v({1}), v({.5, .5})), ShapeError);
}

TEST_CASE("divergence properties over 10^4 random pairs") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(2, 8);
  for (int i = 0; i < 10000; ++i) {
    const int k = dim(rng);
    Eigen::VectorXd p = random_simplex(k, rng), q = random_simplex(k, rng);
    if (i % 7 == 0) p(0) = 0.0, p /= p.sum();
    if (i % 11 == 0) q(1) = 0.0, q /= q.sum();
    const double t = tv(p, q), j = js(p, q), d = kl(p, q);
    REQUIRE(t >= 0.0);
    REQUIRE(t <= 1.0);
    REQUIRE(t == tv(q, p));
    REQUIRE(j == doctest::Approx(js(q, p)).epsilon(1e-14));
    REQUIRE(j <= std::log(2.0) + 1e-15);
    REQUIRE(j >= 0.0);
    if (std::isfinite(d)) REQUIRE(t <= std::sqrt(d / 2.0) + 1e-12);
    REQUIRE(t <= std::sqrt(2.0 * j) + 1e-12);
  }
}

TEST_CASE("conditional tables") {
  SUBCASE("independent joint") {
    const Eigen::VectorXd px = v({0.2, 0.5, 0.3}), py = v({0.6, 0.4});
    const auto c = conditional_tables(DiscreteJoint(px * py.transpose()));
    for (int x = 0; x < 3; ++x) CHECK((c.conditional.row(x).transpose() - py).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((c.marginal - px).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(c.zero_mass_rows.empty());
  }
  SUBCASE("deterministic joint") {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(3, 2);
    t(0, 1) = 0.3;
    t(1, 0) = 0.3;
    t(2, 1) = 0.4;
    const auto c = conditional_tables(DiscreteJoint(t));
    CHECK(c.conditional(0, 1) == 1.0);
    CHECK(c.conditional(1, 0) == 1.0);
    CHECK(c.conditional(2, 0) == 0.0);
  }
  SUBCASE("random joints reconstruct within 1e-12") {
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto j = DiscreteJoint::random(1 + static_cast<int>(s % 6), 2 + static_cast<int>(s % 3), s);
      const auto c = conditional_tables(j);
      CHECK(((c.conditional.rowwise().sum().array() - 1.0).abs() < 1e-12).all());
      const Eigen::MatrixXd back = c.marginal.asDiagonal() * c.conditional;
      CHECK((back - j.table()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("zero-mass rows are uniform and flagged") {
    Eigen::MatrixXd t(2, 4);
    t << 0.1, 0.2, 0.3, 0.4, 0, 0, 0, 0;
    const auto c = conditional_tables(DiscreteJoint(t));
    CHECK(c.zero_mass_rows == std::vector<int>{1});
    CHECK((c.conditional.row(1).array() - 0.25).abs().maxCoeff() == 0.0);
  }
  SUBCASE("invalid tables") {
    CHECK_THROWS_AS(DiscreteJoint(Eigen::MatrixXd::Constant(2, 2, 0.3)), InvalidArgument);
    Eigen::MatrixXd neg(1, 2);
    neg << 1.5, -0.5;
    CHECK_THROWS_AS(DiscreteJoint{neg}, InvalidArgument);
  }
}

TEST_CASE("infinity norm of the inverse") {
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(4, 4);
  perm(0, 2) = perm(1, 0) = perm(2, 3) = perm(3, 1) = 1.0;
  CHECK(inf_norm_inverse(perm) == doctest::Approx(1.0).epsilon(1e-14));
  for (int k = 3; k <= 10; ++k) {
    CAPTURE(k);
    CHECK(inf_norm_inverse(labels::uniform_transition(k).entries()) == doctest::Approx(2.0 * k - 3.0).epsilon(1e-12));
  }
  CHECK(inf_norm_inverse(labels::uniform_transition(10).entries()) == doctest::Approx(17.0).epsilon(1e-12));
  CHECK_THROWS_AS(inf_norm_inverse(Eigen::MatrixXd::Ones(3, 3)), InvalidArgument);
  Eigen::MatrixXd near(2, 2);
  near << 1, 1, 1, 1 + 1e-14;
  CHECK(inf_norm_inverse_checked(near).ill_conditioned);
}

TEST_CASE("identifiability: exact complementary conditionals recover the ordinary ones") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const int k = 2 + static_cast<int>(s % 9);
    const auto m = labels::random_transition(k, s);
    const Eigen::MatrixXd p = random_conditional(1 + static_cast<int>(s % 6), k, s + 1000);
    const Eigen::MatrixXd bar = p * m.entries();
    CHECK((recover_conditional(bar, m.entries()) - p).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("bound chain on coincident distributions") {
  const auto p = DiscreteJoint::random(4, 3, 5);
  const auto report = verify_theorem1_chain(p, p, conditional_tables(p).conditional, labels::uniform_transition(3));
  CHECK(report.all_hold());
  CHECK(report.min_slack() >= -kSlackTolerance);
  for (const auto& s : report.steps) {
    CAPTURE(s.name);
    CHECK(std::abs(s.lhs) < 1e-12);
  }
  CHECK(report.c1 == 1.0);
  CHECK(report.c2 == 1.0);
  CHECK(report.m_inverse_norm == doctest::Approx(3.0));
}

TEST_CASE("K=2 label flip with the exact inverse classifier") {
  const auto m = labels::uniform_transition(2);
  const auto p = DiscreteJoint::random(5, 2, 8);
  const auto q = DiscreteJoint::random(5, 2, 9);
  const Eigen::MatrixXd bar = conditional_tables(p).conditional * m.entries();
  const Eigen::MatrixXd q_prime = recover_conditional(bar, m.entries());
  const auto report = verify_theorem1_chain(p, q, q_prime, m);
  CHECK(report.step("inversion").lhs < 1e-15);
  CHECK(report.all_hold());
  CHECK_THROWS_AS(report.step("no-such-step"), InvalidArgument);
}

TEST_CASE("1000 random instances satisfy every step") {
  double worst = std::numeric_limits<double>::infinity();
  int vacuous = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto inst = random_bound_instance(6, 4, s);
    const auto report = verify_theorem1_chain(inst.p_xy, inst.q_xy, inst.q_prime, inst.m);
    CAPTURE(s);
    CHECK(report.all_hold());
    CHECK(report.step("inversion").slack() >= -kSlackTolerance);
    CHECK(report.marginal_identity_gap < 1e-12);
    worst = std::min(worst, report.min_slack());
    for (const auto& st : report.steps) vacuous += st.vacuous;
  }
  CHECK(worst >= -kSlackTolerance);
  MESSAGE("minimum slack " << worst << ", vacuous steps " << vacuous);
}

TEST_CASE("infinite KL marks a step vacuous") {
  Eigen::MatrixXd pt(1, 2), qt(1, 2), qp(1, 2);
  pt << 0.5, 0.5;
  qt << 1.0, 0.0;
  qp << 0.5, 0.5;
  const auto report =
      verify_theorem1_chain(DiscreteJoint(pt), DiscreteJoint(qt), qp, labels::uniform_transition(2));
  const auto& st = report.step("pinsker-classifier");
  CHECK(st.vacuous);
  CHECK(st.holds);
  CHECK(report.all_hold());
  const auto j = nlohmann::json::parse(report.to_json());
  bool found = false;
  for (const auto& s : j["steps"])
    if (s["name"] == "pinsker-classifier") {
      found = true;
      CHECK(s["vacuous"] == true);
      CHECK(s["rhs"].is_null());
    }
  CHECK(found);
}

TEST_CASE("report serialization and preconditions") {
  const auto inst = random_bound_instance(3, 3, 42);
  const auto report = verify_theorem1_chain(inst.p_xy, inst.q_xy, inst.q_prime, inst.m);
  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["steps"].size() == report.steps.size());
  CHECK(j.contains("c1"));
  CHECK(j.contains("m_inverse_norm"));

  const auto other = DiscreteJoint::random(inst.p_xy.support() + 1, inst.p_xy.classes(), 1);
  CHECK_THROWS_AS(verify_theorem1_chain(inst.p_xy, other, inst.q_prime, inst.m), ShapeError);
}
