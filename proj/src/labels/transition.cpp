#include "complearn/labels/transition.hpp"

#include "complearn/error.hpp"
#include "complearn/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace complearn::labels {

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd entries) : m_(std::move(entries)) {
  if (m_.rows() < 2 || m_.rows() != m_.cols()) throw InvalidArgument("transition matrix must be K x K with K >= 2");
  if (!m_.allFinite()) throw InvalidArgument("transition matrix has non-finite entries");
  for (Eigen::Index i = 0; i < m_.rows(); ++i) {
    if (m_(i, i) != 0.0) throw InvalidArgument("transition matrix diagonal must be zero");
    if ((m_.row(i).array() < 0.0).any()) throw InvalidArgument("transition matrix entries must be >= 0");
    if (std::abs(m_.row(i).sum() - 1.0) > kRowTolerance) {
      throw InvalidArgument("transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

double TransitionMatrix::condition_number() const {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_);
  const auto& s = svd.singularValues();
  const double smallest = s(s.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smallest;
}

bool TransitionMatrix::is_full_rank() const {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_);
  const auto& s = svd.singularValues();
  return s(s.size() - 1) > s(0) * 1e-12;
}

int TransitionMatrix::support(int row) const {
  return static_cast<int>((m_.row(row).array() > 0.0).count());
}

TransitionMatrix uniform_transition(int k) {
  if (k < 2) throw InvalidArgument("uniform_transition needs K >= 2");
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(k, k, 1.0 / (k - 1));
  m.diagonal().setZero();
  return TransitionMatrix(std::move(m));
}

TransitionMatrix restricted_uniform_transition(int k, int m, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("restricted_uniform_transition needs K >= 2");
  if (m < 1 || m > k - 1) throw InvalidArgument("candidate count m must lie in [1, K-1]");
  Rng rng(seed);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, k);
  std::vector<int> cols;
  for (int i = 0; i < k; ++i) {
    cols.clear();
    for (int j = 0; j < k; ++j) {
      if (j != i) cols.push_back(j);
    }
    std::shuffle(cols.begin(), cols.end(), rng);
    for (int t = 0; t < m; ++t) out(i, cols[static_cast<std::size_t>(t)]) = 1.0 / m;
  }
  return TransitionMatrix(std::move(out));
}

TransitionMatrix random_transition(int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("random_transition needs K >= 2");
  Rng rng(seed);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (;;) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      double total = 0.0;
      for (int j = 0; j < k; ++j) {
        if (j == i) continue;
        out(i, j) = gamma(rng);
        total += out(i, j);
      }
      out.row(i) /= total;
    }
    TransitionMatrix m(std::move(out));
    if (m.condition_number() < kMaxRandomCondition) return m;
  }
}

SimplexVector forward_correct(const TransitionMatrix& m, const SimplexVector& g) {
  if (g.size() != m.classes()) throw InvalidArgument("forward_correct: posterior has the wrong dimension");
  Eigen::VectorXd out = m.entries().transpose() * g.values();
  return SimplexVector(std::move(out));
}

Eigen::MatrixXd forward_correct(const TransitionMatrix& m, const Eigen::MatrixXd& probs) {
  if (probs.cols() != m.classes()) throw InvalidArgument("forward_correct: posterior has the wrong dimension");
  return probs * m.entries();
}

double effective_sample_size(double n, int k) {
  if (k < 2) throw InvalidArgument("effective_sample_size needs K >= 2");
  return n / (k - 1);
}

}  // namespace complearn::labels
