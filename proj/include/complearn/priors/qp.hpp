#pragma once

#include "complearn/labels/dataset.hpp"
#include "complearn/labels/transition.hpp"
#include "complearn/priors/simplex.hpp"

#include <vector>

namespace complearn::priors {

// Normalized complementary-label counts; each label of a multi-label example counts once.
SimplexVector empirical_complementary_prior(const labels::ComplementaryDataset& ds);

// Euclidean projection onto the probability simplex (sort and threshold).
SimplexVector simplex_project(const Eigen::VectorXd& v);

// ||comp_prior - M^T prior||^2
double prior_objective(const Eigen::VectorXd& comp_prior, const labels::TransitionMatrix& m,
                       const Eigen::VectorXd& prior);

struct QpOptions {
  double tolerance = 1e-12;     // stop once an iteration improves the objective by less
  long max_iterations = 100000;
  bool record_trace = false;    // keep the objective after every iteration
};

struct QpSolution {
  SimplexVector estimate;
  double residual = 0.0;
  long iterations = 0;
  bool converged = false;
  // M is numerically singular; the estimate is a minimizer but need not be unique.
  bool rank_deficient = false;
  std::vector<double> objective_trace;
};

/// Estimate the class prior P_Y from complementary-label frequencies by
/// minimizing ||comp_prior - M^T P_Y||^2 over the simplex.
///
/// Projected gradient descent from the uniform prior with fixed step
/// 1 / (2 lambda_max(M M^T)), followed by an active-set solve of the KKT
/// system on the detected support. The active-set result replaces the iterate
/// only if it is feasible and no worse, so the trace stays non-increasing.
QpSolution estimate_prior_qp(const SimplexVector& comp_prior, const labels::TransitionMatrix& m,
                             const QpOptions& options = {});

}  // namespace complearn::priors
