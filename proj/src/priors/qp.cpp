#include "complearn/priors/qp.hpp"

#include "complearn/error.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>

namespace complearn::priors {

using Eigen::MatrixXd;
using Eigen::VectorXd;

SimplexVector empirical_complementary_prior(const labels::ComplementaryDataset& ds) {
  VectorXd counts = VectorXd::Zero(ds.classes());
  for (const auto& ev : ds.evidence()) {
    if (const auto* c = std::get_if<labels::Complementary>(&ev)) {
      for (int j : c->labels) counts(j) += 1.0;
    }
  }
  const double total = counts.sum();
  if (total == 0.0) throw InvalidArgument("dataset carries no complementary labels");
  return SimplexVector(counts / total);
}

SimplexVector simplex_project(const VectorXd& v) {
  if (v.size() == 0 || !v.allFinite()) throw InvalidArgument("simplex_project needs a finite, nonempty vector");
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) tau = candidate;
  }
  VectorXd p = (v.array() - tau).cwiseMax(0.0);
  p /= p.sum();
  return SimplexVector(std::move(p));
}

double prior_objective(const VectorXd& comp_prior, const labels::TransitionMatrix& m, const VectorXd& prior) {
  return (comp_prior - m.entries().transpose() * prior).squaredNorm();
}

namespace {

// Minimize ||b - A p||^2 subject to sum(p) = 1, p_i = 0 off `support`.
VectorXd solve_on_support(const MatrixXd& a, const VectorXd& b, const std::vector<int>& support) {
  const auto s = static_cast<Eigen::Index>(support.size());
  MatrixXd kkt = MatrixXd::Zero(s + 1, s + 1);
  VectorXd rhs(s + 1);
  MatrixXd as(a.rows(), s);
  for (Eigen::Index i = 0; i < s; ++i) as.col(i) = a.col(support[static_cast<std::size_t>(i)]);
  kkt.topLeftCorner(s, s) = 2.0 * as.transpose() * as;
  kkt.block(0, s, s, 1).setOnes();
  kkt.block(s, 0, 1, s).setOnes();
  rhs.head(s) = 2.0 * as.transpose() * b;
  rhs(s) = 1.0;
  const VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  VectorXd p = VectorXd::Zero(a.cols());
  for (Eigen::Index i = 0; i < s; ++i) p(support[static_cast<std::size_t>(i)]) = sol(i);
  return p;
}

// Primal active-set refinement started from the support of `start`.
std::optional<VectorXd> active_set_polish(const MatrixXd& a, const VectorXd& b, const VectorXd& start) {
  const auto k = static_cast<int>(start.size());
  std::vector<char> in(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < k; ++i) in[static_cast<std::size_t>(i)] = start(i) > 1e-12;
  for (int round = 0; round < 4 * k; ++round) {
    std::vector<int> support;
    for (int i = 0; i < k; ++i) {
      if (in[static_cast<std::size_t>(i)]) support.push_back(i);
    }
    if (support.empty()) return std::nullopt;
    const VectorXd p = solve_on_support(a, b, support);
    int most_negative = -1;
    for (int i : support) {
      if (p(i) < 0.0 && (most_negative < 0 || p(i) < p(most_negative))) most_negative = i;
    }
    if (most_negative >= 0) {
      in[static_cast<std::size_t>(most_negative)] = 0;
      continue;
    }
    // Optimality: gradient on inactive coordinates must not undercut the support's common value.
    const VectorXd grad = -2.0 * a.transpose() * (b - a * p);
    double level = 0.0;
    for (int i : support) level += grad(i);
    level /= static_cast<double>(support.size());
    int entering = -1;
    for (int i = 0; i < k; ++i) {
      if (in[static_cast<std::size_t>(i)]) continue;
      if (grad(i) < level - 1e-12 && (entering < 0 || grad(i) < grad(entering))) entering = i;
    }
    if (entering < 0) return p;
    in[static_cast<std::size_t>(entering)] = 1;
  }
  return std::nullopt;
}

}  // namespace

QpSolution estimate_prior_qp(const SimplexVector& comp_prior, const labels::TransitionMatrix& m,
                             const QpOptions& options) {
  const int k = m.classes();
  if (comp_prior.size() != k) throw InvalidArgument("estimate_prior_qp: dimension mismatch");
  const MatrixXd a = m.entries().transpose();
  const VectorXd& b = comp_prior.values();

  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m.entries() * m.entries().transpose(), Eigen::EigenvaluesOnly);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  const double step = 1.0 / (2.0 * lambda_max);

  QpSolution sol;
  sol.rank_deficient = !m.is_full_rank();
  VectorXd p = VectorXd::Constant(k, 1.0 / k);
  double f = (b - a * p).squaredNorm();
  if (options.record_trace) sol.objective_trace.push_back(f);

  for (long it = 0; it < options.max_iterations; ++it) {
    const VectorXd grad = -2.0 * a.transpose() * (b - a * p);
    VectorXd next = simplex_project(p - step * grad).values();
    const double f_next = (b - a * next).squaredNorm();
    sol.iterations = it + 1;
    const double improvement = f - f_next;
    if (f_next <= f) {
      p = std::move(next);
      f = f_next;
    }
    if (options.record_trace) sol.objective_trace.push_back(f);
    if (improvement < options.tolerance) {
      sol.converged = true;
      break;
    }
  }

  if (auto polished = active_set_polish(a, b, p)) {
    VectorXd candidate = simplex_project(*polished).values();
    const double f_candidate = (b - a * candidate).squaredNorm();
    if (f_candidate <= f) {
      p = std::move(candidate);
      f = f_candidate;
      sol.converged = true;
      if (options.record_trace) sol.objective_trace.push_back(f);
    }
  }
  sol.estimate = SimplexVector(std::move(p));
  sol.residual = f;
  return sol;
}

}  // namespace complearn::priors
