#pragma once

#include "complearn/priors/simplex.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace complearn::harness {

struct LabeledData {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

/// K isotropic Gaussians with a shared standard deviation.
struct GaussianMixtureSpec {
  Eigen::MatrixXd means;  // K x d
  double sigma = 0.35;
  SimplexVector prior;

  int classes() const { return static_cast<int>(means.rows()); }
  Eigen::Index dim() const { return means.cols(); }
  // Coincident means are allowed when scoring, never when sampling.
  void validate(bool distinct_means = true) const;

  // Means evenly spaced on a circle in the first two coordinates; uniform prior.
  static GaussianMixtureSpec ring(int classes = 8, double radius = 2.0, double sigma = 0.35, Eigen::Index dim = 2);
};

LabeledData gen_ring_mixture(const GaussianMixtureSpec& spec, Eigen::Index n, std::uint64_t seed);

// argmax_y prior_y N(x; mean_y, sigma^2 I), ties toward the lowest class.
std::vector<int> bayes_predict(const GaussianMixtureSpec& spec, const Eigen::MatrixXd& x);
double bayes_accuracy_oracle(const GaussianMixtureSpec& spec, const LabeledData& test);

// Index of the nearest mean for every row.
std::vector<int> nearest_mean(const Eigen::MatrixXd& means, const Eigen::MatrixXd& x);

}  // namespace complearn::harness
