#pragma once

#include "complearn/labels/transition.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace complearn::labels {

struct Unlabeled {
  friend bool operator==(const Unlabeled&, const Unlabeled&) = default;
};
struct Ordinary {
  int label = 0;
  friend bool operator==(const Ordinary&, const Ordinary&) = default;
};
// 1..K-1 distinct classes the example does not belong to, in draw order.
struct Complementary {
  std::vector<int> labels;
  friend bool operator==(const Complementary&, const Complementary&) = default;
};

using LabelEvidence = std::variant<Unlabeled, Ordinary, Complementary>;

void validate_evidence(const LabelEvidence& ev, int k);
bool is_labeled(const LabelEvidence& ev);

/// Tag required to read hidden ground-truth labels. Only evaluation code constructs one.
struct EvaluationKey {
  explicit EvaluationKey() = default;
};

/// Features with per-example label evidence. True labels are carried for
/// scoring but only reachable through an EvaluationKey.
class ComplementaryDataset {
 public:
  ComplementaryDataset(Eigen::MatrixXd features, std::vector<LabelEvidence> evidence,
                       std::vector<int> ground_truth, int k, double labeled_ratio,
                       double complementary_ratio, std::uint64_t seed);

  Eigen::Index size() const { return features_.rows(); }
  Eigen::Index dim() const { return features_.cols(); }
  int classes() const { return k_; }
  double labeled_ratio() const { return labeled_ratio_; }
  double complementary_ratio() const { return complementary_ratio_; }
  std::uint64_t seed() const { return seed_; }
  int labels_per_example() const { return labels_per_example_; }
  void set_labels_per_example(int c) { labels_per_example_ = c; }

  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<LabelEvidence>& evidence() const { return evidence_; }
  const LabelEvidence& evidence(Eigen::Index i) const { return evidence_.at(static_cast<std::size_t>(i)); }

  const std::optional<TransitionMatrix>& transition() const { return transition_; }
  void set_transition(TransitionMatrix m) { transition_ = std::move(m); }

  const std::vector<int>& ground_truth(EvaluationKey) const { return ground_truth_; }

  std::vector<Eigen::Index> labeled_indices() const;
  std::vector<Eigen::Index> unlabeled_indices() const;
  std::vector<Eigen::Index> ordinary_indices() const;
  std::vector<Eigen::Index> complementary_indices() const;

  // Copy with the evidence replaced; features and hidden labels are shared.
  ComplementaryDataset with_evidence(std::vector<LabelEvidence> evidence) const;

 private:
  Eigen::MatrixXd features_;
  std::vector<LabelEvidence> evidence_;
  std::vector<int> ground_truth_;
  int k_;
  double labeled_ratio_;
  double complementary_ratio_;
  std::uint64_t seed_;
  int labels_per_example_ = 1;
  std::optional<TransitionMatrix> transition_;
};

/// Draw `per_example` distinct complementary labels for each true label, from
/// row y of M, without replacement (the row is renormalized after each draw).
std::vector<Complementary> generate_complementary(const std::vector<int>& labels, const TransitionMatrix& m,
                                                  int per_example, std::uint64_t seed);

/// floor(n * r_l) examples get labels; of those floor(labeled * r_c) get
/// complementary evidence and the rest ordinary labels. Labeled sets are nested
/// across r_l for a fixed seed.
ComplementaryDataset split_dataset(const Eigen::MatrixXd& features, const std::vector<int>& labels, int k,
                                   double labeled_ratio, double complementary_ratio,
                                   const TransitionMatrix& m, int per_example, std::uint64_t seed);

// floor(x) that forgives representation error just below an integer.
Eigen::Index floor_count(double x);

}  // namespace complearn::labels
