#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace complearn {

/// A probability vector: nonnegative coordinates summing to one (within 1e-9).
class SimplexVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  SimplexVector() = default;
  // Throws InvalidArgument when `p` is not on the simplex.
  explicit SimplexVector(Eigen::VectorXd p);

  static SimplexVector uniform(int k);
  static SimplexVector one_hot(int k, int index);
  static bool is_valid(const Eigen::VectorXd& p);

  const Eigen::VectorXd& values() const { return p_; }
  int size() const { return static_cast<int>(p_.size()); }
  double operator[](int i) const { return p_(i); }

 private:
  Eigen::VectorXd p_;
};

}  // namespace complearn
