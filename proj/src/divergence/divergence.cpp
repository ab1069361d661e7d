#include "complearn/divergence/divergence.hpp"

#include "complearn/error.hpp"
#include "complearn/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace complearn::divergence {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const char* what) {
  if (p.size() != q.size()) {
    throw ShapeError(std::string(what) + ": supports differ (" + std::to_string(p.size()) + " vs " +
                     std::to_string(q.size()) + ")");
  }
  if (p.size() == 0) throw ShapeError(std::string(what) + ": empty support");
}

// Sum of p log(p / q) over cells with p > 0.
double kl_unchecked(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) return kInf;
    total += p(i) * std::log(p(i) / q(i));
  }
  // Rounding can leave a tiny negative value for near-identical inputs.
  return std::max(total, 0.0);
}

Eigen::VectorXd dirichlet_ones(Eigen::Index n, Rng& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = gamma(rng);
  return v / v.sum();
}

double max_row_tv(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < a.rows(); ++x) worst = std::max(worst, tv(a.row(x).transpose(), b.row(x).transpose()));
  return worst;
}

double max_row_kl(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < a.rows(); ++x) worst = std::max(worst, kl(a.row(x).transpose(), b.row(x).transpose()));
  return worst;
}

BoundStep make_step(std::string name, double lhs, double rhs) {
  BoundStep s{std::move(name), lhs, rhs, false, false};
  s.vacuous = std::isinf(rhs) && !std::isinf(lhs);
  s.holds = s.vacuous || rhs - lhs >= -kSlackTolerance;
  return s;
}

}  // namespace

double tv(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  check_pair(p, q, "tv");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  check_pair(p, q, "kl");
  return kl_unchecked(p, q);
}

double js(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  check_pair(p, q, "js");
  const Eigen::VectorXd mid = 0.5 * (p + q);
  return 0.5 * kl_unchecked(p, mid) + 0.5 * kl_unchecked(q, mid);
}

DiscreteJoint::DiscreteJoint(Eigen::MatrixXd table) : table_(std::move(table)) {
  if (table_.rows() < 1 || table_.cols() < 1) throw ShapeError("joint table must be nonempty");
  if (!table_.allFinite() || (table_.array() < 0.0).any()) {
    throw InvalidArgument("joint table entries must be finite and nonnegative");
  }
  const double mass = table_.sum();
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw InvalidArgument("joint table mass is " + std::to_string(mass) + ", expected 1");
  }
}

DiscreteJoint DiscreteJoint::random(int support, int classes, std::uint64_t seed) {
  if (support < 1 || classes < 1) throw InvalidArgument("joint needs a nonempty support");
  Rng rng(seed);
  const Eigen::VectorXd cells = dirichlet_ones(static_cast<Eigen::Index>(support) * classes, rng);
  Eigen::MatrixXd table(support, classes);
  for (int x = 0; x < support; ++x) {
    for (int y = 0; y < classes; ++y) table(x, y) = cells(x * classes + y);
  }
  table /= table.sum();
  return DiscreteJoint(std::move(table));
}

DiscreteJoint DiscreteJoint::compose(const Eigen::VectorXd& marginal, const Eigen::MatrixXd& conditional) {
  if (marginal.size() != conditional.rows()) throw ShapeError("marginal and conditional differ in support");
  Eigen::MatrixXd table = conditional.array().colwise() * marginal.array();
  const double mass = table.sum();
  if (mass > 0.0) table /= mass;
  return DiscreteJoint(std::move(table));
}

Eigen::VectorXd DiscreteJoint::flat() const {
  Eigen::VectorXd out(table_.size());
  for (Eigen::Index x = 0; x < table_.rows(); ++x) out.segment(x * table_.cols(), table_.cols()) = table_.row(x);
  return out;
}

ConditionalTables conditional_tables(const DiscreteJoint& joint) {
  ConditionalTables out{Eigen::MatrixXd(joint.support(), joint.classes()), joint.marginal_x(), {}};
  for (int x = 0; x < joint.support(); ++x) {
    const double px = out.marginal(x);
    if (px > 0.0) {
      out.conditional.row(x) = joint.table().row(x) / px;
    } else {
      out.conditional.row(x).setConstant(1.0 / joint.classes());
      out.zero_mass_rows.push_back(x);
    }
  }
  return out;
}

Eigen::MatrixXd random_conditional(int support, int classes, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd out(support, classes);
  for (int x = 0; x < support; ++x) out.row(x) = dirichlet_ones(classes, rng).transpose();
  return out;
}

InverseNorm inf_norm_inverse_checked(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ShapeError("inf_norm_inverse needs a nonempty square matrix");
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double scale = m.cwiseAbs().maxCoeff();
  if (pivots.minCoeff() <= scale * static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon()) {
    throw InvalidArgument("matrix is singular; the bound requires a full-rank transition matrix");
  }
  const Eigen::MatrixXd inverse = lu.inverse();
  if (!inverse.allFinite()) throw InvalidArgument("matrix is singular; inverse is not finite");
  InverseNorm out;
  out.value = inverse.cwiseAbs().rowwise().sum().maxCoeff();
  out.condition = out.value * m.cwiseAbs().rowwise().sum().maxCoeff();
  out.ill_conditioned = out.condition > kConditionWarning;
  return out;
}

Eigen::MatrixXd recover_conditional(const Eigen::MatrixXd& complementary_conditional, const Eigen::MatrixXd& m) {
  if (complementary_conditional.cols() != m.rows()) throw ShapeError("conditional width differs from M");
  inf_norm_inverse_checked(m);
  // Row form: barP = P M, so P^T = M^-T barP^T.
  return m.transpose().partialPivLu().solve(complementary_conditional.transpose()).transpose();
}

bool BoundCheckReport::all_hold() const {
  return std::all_of(steps.begin(), steps.end(), [](const BoundStep& s) { return s.holds; });
}

double BoundCheckReport::min_slack() const {
  double worst = kInf;
  for (const auto& s : steps) {
    if (!s.vacuous) worst = std::min(worst, s.slack());
  }
  return worst;
}

const BoundStep& BoundCheckReport::step(const std::string& name) const {
  for (const auto& s : steps) {
    if (s.name == name) return s;
  }
  throw InvalidArgument("no bound step named '" + name + "'");
}

std::string BoundCheckReport::to_json(int indent) const {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["c1"] = c1;
  j["c2"] = c2;
  j["m_inverse_norm"] = m_inverse_norm;
  j["ill_conditioned"] = ill_conditioned;
  j["marginal_identity_gap"] = marginal_identity_gap;
  j["p_zero_mass_rows"] = p_zero_mass_rows;
  j["q_zero_mass_rows"] = q_zero_mass_rows;
  j["all_hold"] = all_hold();
  j["steps"] = nlohmann::json::array();
  for (const auto& s : steps) {
    j["steps"].push_back({{"name", s.name},
                          {"lhs", finite_or_null(s.lhs)},
                          {"rhs", finite_or_null(s.rhs)},
                          {"slack", finite_or_null(s.slack())},
                          {"holds", s.holds},
                          {"vacuous", s.vacuous}});
  }
  return j.dump(indent);
}

BoundCheckReport verify_theorem1_chain(const DiscreteJoint& p_xy, const DiscreteJoint& q_xy,
                                       const Eigen::MatrixXd& q_prime, const labels::TransitionMatrix& m) {
  const int k = p_xy.classes();
  if (q_xy.support() != p_xy.support() || q_xy.classes() != k) throw ShapeError("P_XY and Q_XY supports differ");
  if (q_prime.rows() != p_xy.support() || q_prime.cols() != k) throw ShapeError("Q'_Y|X has the wrong shape");
  if (m.classes() != k) throw ShapeError("transition matrix size differs from K");
  for (Eigen::Index x = 0; x < q_prime.rows(); ++x) {
    if (!SimplexVector::is_valid(q_prime.row(x).transpose())) {
      throw InvalidArgument("Q'_Y|X row " + std::to_string(x) + " is not a distribution");
    }
  }

  BoundCheckReport report;
  const InverseNorm inv = inf_norm_inverse_checked(m.entries());
  report.m_inverse_norm = inv.value;
  report.ill_conditioned = inv.ill_conditioned;

  const ConditionalTables p = conditional_tables(p_xy);
  const ConditionalTables q = conditional_tables(q_xy);
  report.p_zero_mass_rows = p.zero_mass_rows;
  report.q_zero_mass_rows = q.zero_mass_rows;
  const double c1 = report.c1;
  const double c2 = report.c2;

  // P_Y|X Q_X: the data conditional under the model's marginal.
  const DiscreteJoint hybrid = DiscreteJoint::compose(q.marginal, p.conditional);
  const DiscreteJoint p_relabeled = DiscreteJoint::compose(p.marginal, p.conditional);

  const double tv_joint = tv(p_xy.flat(), q_xy.flat());
  const double tv_p_hybrid = tv(p_xy.flat(), hybrid.flat());
  const double tv_hybrid_q = tv(hybrid.flat(), q_xy.flat());
  const double tv_marginal = tv(p.marginal, q.marginal);
  const double js_marginal = js(p.marginal, q.marginal);

  const Eigen::MatrixXd p_bar = p.conditional * m.entries();
  const Eigen::MatrixXd q_prime_bar = q_prime * m.entries();
  const double tv_cond_pq = max_row_tv(p.conditional, q.conditional);
  const double tv_cond_pq_prime = max_row_tv(p.conditional, q_prime);
  const double tv_cond_qprime_q = max_row_tv(q_prime, q.conditional);
  const double tv_cond_bar = max_row_tv(p_bar, q_prime_bar);
  const double kl_cond_bar = max_row_kl(p_bar, q_prime_bar);
  const double kl_cond_qprime_q = max_row_kl(q_prime, q.conditional);

  const double combined = c1 * tv_marginal + c2 * tv_cond_pq;
  const double split = c1 * tv_marginal + c2 * tv_cond_pq_prime + c2 * tv_cond_qprime_q;
  const double rhs6 = c1 * tv_marginal + c2 * inv.value * tv_cond_bar + c2 * tv_cond_qprime_q;
  const double rhs7 = 2.0 * c1 * std::sqrt(js_marginal) + c2 * inv.value * std::sqrt(kl_cond_bar) +
                      c2 * std::sqrt(kl_cond_qprime_q);

  const double lhs2 = tv(p_relabeled.flat(), hybrid.flat());
  report.marginal_identity_gap = std::abs(lhs2 - tv_marginal);

  // Pointwise forms of the inversion and Pinsker steps; record the tightest x.
  BoundStep inversion_pointwise = make_step("inversion-pointwise", 0.0, 0.0);
  BoundStep pinsker_bar = make_step("pinsker-complementary", 0.0, 0.0);
  BoundStep pinsker_qprime = make_step("pinsker-classifier", 0.0, 0.0);
  bool first = true;
  for (int x = 0; x < p_xy.support(); ++x) {
    const Eigen::VectorXd px = p.conditional.row(x).transpose();
    const Eigen::VectorXd qx = q.conditional.row(x).transpose();
    const Eigen::VectorXd qpx = q_prime.row(x).transpose();
    const Eigen::VectorXd pbx = p_bar.row(x).transpose();
    const Eigen::VectorXd qbx = q_prime_bar.row(x).transpose();
    const BoundStep inv_x = make_step("inversion-pointwise", tv(px, qpx), inv.value * tv(pbx, qbx));
    const BoundStep pb_x = make_step("pinsker-complementary", tv(pbx, qbx), std::sqrt(kl(pbx, qbx) / 2.0));
    const BoundStep pq_x = make_step("pinsker-classifier", tv(qpx, qx), std::sqrt(kl(qpx, qx) / 2.0));
    auto keep_tighter = [first](BoundStep& acc, const BoundStep& cand) {
      if (first || (!cand.vacuous && (acc.vacuous || cand.slack() < acc.slack()))) acc = cand;
    };
    keep_tighter(inversion_pointwise, inv_x);
    keep_tighter(pinsker_bar, pb_x);
    keep_tighter(pinsker_qprime, pq_x);
    first = false;
  }

  auto& s = report.steps;
  s.push_back(make_step("triangle", tv_joint, tv_p_hybrid + tv_hybrid_q));
  s.push_back(make_step("marginal-factor", lhs2, c1 * tv_marginal));
  s.push_back(make_step("conditional-factor", tv_hybrid_q, c2 * tv_cond_pq));
  s.push_back(make_step("combined", tv_joint, combined));
  s.push_back(make_step("conditional-triangle", combined, split));
  s.push_back(make_step("inversion", tv_cond_pq_prime, inv.value * tv_cond_bar));
  s.push_back(inversion_pointwise);
  s.push_back(make_step("composite-tv", tv_joint, rhs6));
  s.push_back(make_step("pinsker-marginal", tv_marginal, std::sqrt(2.0 * js_marginal)));
  s.push_back(pinsker_bar);
  s.push_back(pinsker_qprime);
  s.push_back(make_step("pinsker-relaxation", rhs6, rhs7));
  s.push_back(make_step("composite-bound", tv_joint, rhs7));
  return report;
}

BoundInstance random_bound_instance(int max_support, int max_classes, std::uint64_t seed) {
  if (max_support < 1 || max_classes < 2) throw InvalidArgument("random instance needs |X| >= 1 and K >= 2");
  Rng rng(seed);
  const int support = std::uniform_int_distribution<int>(1, max_support)(rng);
  const int k = std::uniform_int_distribution<int>(2, max_classes)(rng);
  Eigen::MatrixXd p = DiscreteJoint::random(support, k, rng()).table();
  Eigen::MatrixXd q = DiscreteJoint::random(support, k, rng()).table();
  // Occasionally drop an x from one side to exercise the zero-mass convention.
  std::bernoulli_distribution drop(0.2);
  std::uniform_int_distribution<int> row(0, support - 1);
  if (support > 1 && drop(rng)) {
    p.row(row(rng)).setZero();
    p /= p.sum();
  }
  if (support > 1 && drop(rng)) {
    q.row(row(rng)).setZero();
    q /= q.sum();
  }
  Eigen::MatrixXd q_prime = random_conditional(support, k, rng());
  labels::TransitionMatrix m = labels::random_transition(k, rng());
  return {DiscreteJoint(std::move(p)), DiscreteJoint(std::move(q)), std::move(q_prime), std::move(m)};
}

}  // namespace complearn::divergence
