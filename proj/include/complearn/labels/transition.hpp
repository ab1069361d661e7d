#pragma once

#include "complearn/priors/simplex.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace complearn::labels {

/// M[i][j] = P(complementary label j | true class i). Row-stochastic with a
/// zero diagonal; construction rejects anything else.
class TransitionMatrix {
 public:
  static constexpr double kRowTolerance = 1e-9;

  explicit TransitionMatrix(Eigen::MatrixXd entries);

  int classes() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& entries() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  // Ratio of extreme singular values; +inf when singular.
  double condition_number() const;
  bool is_full_rank() const;
  // Number of nonzero entries in row i.
  int support(int row) const;

 private:
  Eigen::MatrixXd m_;
};

// Off-diagonal entries 1/(K-1).
TransitionMatrix uniform_transition(int k);

// Each row: m off-diagonal columns drawn at random share mass 1/m.
TransitionMatrix restricted_uniform_transition(int k, int m, std::uint64_t seed);

// Each row: flat-Dirichlet draw over the off-diagonal slots. Redrawn until
// the condition number is below kMaxRandomCondition.
inline constexpr double kMaxRandomCondition = 1e6;
TransitionMatrix random_transition(int k, std::uint64_t seed);

// M^T g: class posterior -> complementary-label posterior.
SimplexVector forward_correct(const TransitionMatrix& m, const SimplexVector& g);
// Row-batched form: rows of `probs` are posteriors; returns probs * M.
Eigen::MatrixXd forward_correct(const TransitionMatrix& m, const Eigen::MatrixXd& probs);

// n / (K - 1): ordinary-label sample size carrying the same information.
double effective_sample_size(double n, int k);

}  // namespace complearn::labels
