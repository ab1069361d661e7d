#include "complearn/priors/simplex.hpp"

#include "complearn/error.hpp"

#include <cmath>

namespace complearn {

bool SimplexVector::is_valid(const Eigen::VectorXd& p) {
  if (p.size() == 0 || !p.allFinite()) return false;
  if ((p.array() < 0.0).any() || (p.array() > 1.0 + kSumTolerance).any()) return false;
  return std::abs(p.sum() - 1.0) <= kSumTolerance;
}

SimplexVector::SimplexVector(Eigen::VectorXd p) : p_(std::move(p)) {
  if (!is_valid(p_)) throw InvalidArgument("vector is not on the probability simplex");
}

SimplexVector SimplexVector::uniform(int k) {
  if (k < 1) throw InvalidArgument("simplex dimension must be >= 1");
  return SimplexVector(Eigen::VectorXd::Constant(k, 1.0 / k));
}

SimplexVector SimplexVector::one_hot(int k, int index) {
  if (index < 0 || index >= k) throw InvalidArgument("one-hot index out of range");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(k);
  p(index) = 1.0;
  return SimplexVector(std::move(p));
}

}  // namespace complearn
