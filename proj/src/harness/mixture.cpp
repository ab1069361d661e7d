#include "complearn/harness/mixture.hpp"

#include "complearn/error.hpp"
#include "complearn/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace complearn::harness {

void GaussianMixtureSpec::validate(bool distinct_means) const {
  if (means.rows() < 2) throw InvalidArgument("mixture needs K >= 2 components");
  if (means.cols() < 1) throw InvalidArgument("mixture needs dimension >= 1");
  if (!means.allFinite()) throw InvalidArgument("mixture means must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("mixture sigma must be > 0");
  if (prior.size() != means.rows()) throw InvalidArgument("mixture prior length differs from K");
  if (!distinct_means) return;
  for (Eigen::Index i = 0; i < means.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < means.rows(); ++j) {
      if (means.row(i) == means.row(j)) {
        throw InvalidArgument("mixture means " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      }
    }
  }
}

GaussianMixtureSpec GaussianMixtureSpec::ring(int classes, double radius, double sigma, Eigen::Index dim) {
  if (classes < 2) throw InvalidArgument("ring mixture needs K >= 2");
  if (dim < 2) throw InvalidArgument("ring mixture needs dimension >= 2");
  if (!(radius > 0.0)) throw InvalidArgument("ring radius must be > 0");
  GaussianMixtureSpec spec{Eigen::MatrixXd::Zero(classes, dim), sigma, SimplexVector::uniform(classes)};
  for (int k = 0; k < classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / classes;
    spec.means(k, 0) = radius * std::cos(angle);
    spec.means(k, 1) = radius * std::sin(angle);
  }
  spec.validate();
  return spec;
}

LabeledData gen_ring_mixture(const GaussianMixtureSpec& spec, Eigen::Index n, std::uint64_t seed) {
  spec.validate();
  if (n < spec.classes()) throw InvalidArgument("need n >= K samples, got " + std::to_string(n));
  Rng rng(seed);
  const auto& p = spec.prior.values();
  std::discrete_distribution<int> pick(p.data(), p.data() + p.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  LabeledData out{Eigen::MatrixXd(n, spec.dim()), std::vector<int>(static_cast<std::size_t>(n))};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = pick(rng);
    out.labels[static_cast<std::size_t>(i)] = y;
    for (Eigen::Index j = 0; j < spec.dim(); ++j) out.features(i, j) = spec.means(y, j) + spec.sigma * noise(rng);
  }
  return out;
}

std::vector<int> bayes_predict(const GaussianMixtureSpec& spec, const Eigen::MatrixXd& x) {
  spec.validate(false);
  if (x.cols() != spec.dim()) throw ShapeError("features have the wrong dimension for this mixture");
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  const double inv_two_var = 1.0 / (2.0 * spec.sigma * spec.sigma);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int k = 0; k < spec.classes(); ++k) {
      const double score = std::log(spec.prior[k]) - (x.row(i) - spec.means.row(k)).squaredNorm() * inv_two_var;
      if (score > best) {
        best = score;
        arg = k;
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

double bayes_accuracy_oracle(const GaussianMixtureSpec& spec, const LabeledData& test) {
  if (test.labels.empty()) throw InvalidArgument("empty test set");
  const auto pred = bayes_predict(spec, test.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == test.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<int> nearest_mean(const Eigen::MatrixXd& means, const Eigen::MatrixXd& x) {
  if (x.cols() != means.cols()) throw ShapeError("points and means differ in dimension");
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index arg = 0;
    (means.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace complearn::harness
