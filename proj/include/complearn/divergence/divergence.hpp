#pragma once

#include "complearn/labels/transition.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace complearn::divergence {

// Total variation: half the L1 distance.
double tv(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
// Natural-log KL with 0 log 0 = 0. Returns +infinity when q_i = 0 < p_i.
double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
// Jensen-Shannon against the midpoint; bounded by ln 2.
double js(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// Joint table p(x, y) over a finite support: rows are x, columns are y.
class DiscreteJoint {
 public:
  static constexpr double kMassTolerance = 1e-12;

  explicit DiscreteJoint(Eigen::MatrixXd table);
  // Dirichlet(1) over all |X| * K cells.
  static DiscreteJoint random(int support, int classes, std::uint64_t seed);
  // Joint from a marginal over x and a row-stochastic conditional table.
  static DiscreteJoint compose(const Eigen::VectorXd& marginal, const Eigen::MatrixXd& conditional);

  int support() const { return static_cast<int>(table_.rows()); }
  int classes() const { return static_cast<int>(table_.cols()); }
  const Eigen::MatrixXd& table() const { return table_; }
  Eigen::VectorXd marginal_x() const { return table_.rowwise().sum(); }
  // Flattened cell probabilities, row-major.
  Eigen::VectorXd flat() const;

 private:
  Eigen::MatrixXd table_;
};

struct ConditionalTables {
  Eigen::MatrixXd conditional;  // |X| x K, rows on the simplex
  Eigen::VectorXd marginal;     // p(x)
  std::vector<int> zero_mass_rows;  // rows set to uniform by convention
};

ConditionalTables conditional_tables(const DiscreteJoint& joint);

// Random row-stochastic |X| x K table (Dirichlet(1) rows).
Eigen::MatrixXd random_conditional(int support, int classes, std::uint64_t seed);

struct InverseNorm {
  double value = 0.0;      // max absolute row sum of M^-1
  double condition = 0.0;  // infinity-norm condition number
  bool ill_conditioned = false;
};
inline constexpr double kConditionWarning = 1e12;

// LU with partial pivoting. Throws InvalidArgument when M is singular.
InverseNorm inf_norm_inverse_checked(const Eigen::MatrixXd& m);
inline double inf_norm_inverse(const Eigen::MatrixXd& m) { return inf_norm_inverse_checked(m).value; }

// Solve barP_x = M^T P_x for every row x, i.e. P = barP M^-1 in row form.
Eigen::MatrixXd recover_conditional(const Eigen::MatrixXd& complementary_conditional, const Eigen::MatrixXd& m);

struct BoundStep {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  // An infinite KL made the right side infinite; the step holds trivially.
  bool vacuous = false;

  double slack() const { return rhs - lhs; }
};

inline constexpr double kSlackTolerance = 1e-9;

/// Every inequality of the bound's proof, specialized to finite supports.
/// Conditional divergences are worst cases over x, which makes c1 = c2 = 1.
struct BoundCheckReport {
  std::vector<BoundStep> steps;
  double c1 = 1.0;
  double c2 = 1.0;
  double m_inverse_norm = 0.0;
  bool ill_conditioned = false;
  std::vector<int> p_zero_mass_rows;
  std::vector<int> q_zero_mass_rows;
  // Gap between the two sides of the marginal identity d_TV(P_Y|X P_X, P_Y|X Q_X) = d_TV(P_X, Q_X).
  double marginal_identity_gap = 0.0;

  bool all_hold() const;
  double min_slack() const;
  const BoundStep& step(const std::string& name) const;
  std::string to_json(int indent = 2) const;
};

/// `q_prime` is the classifier's conditional Q'_Y|X (|X| x K, rows on the
/// simplex). Complementary conditionals are P_Y|X M and Q'_Y|X M in row form.
BoundCheckReport verify_theorem1_chain(const DiscreteJoint& p_xy, const DiscreteJoint& q_xy,
                                       const Eigen::MatrixXd& q_prime, const labels::TransitionMatrix& m);

struct BoundInstance {
  DiscreteJoint p_xy;
  DiscreteJoint q_xy;
  Eigen::MatrixXd q_prime;
  labels::TransitionMatrix m;
};

// Random instance with |X| in [1, max_support] and K in [2, max_classes].
BoundInstance random_bound_instance(int max_support, int max_classes, std::uint64_t seed);

}  // namespace complearn::divergence
