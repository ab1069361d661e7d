#include "complearn/labels/dataset.hpp"

#include "complearn/error.hpp"
#include "complearn/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace complearn::labels {

void validate_evidence(const LabelEvidence& ev, int k) {
  if (const auto* o = std::get_if<Ordinary>(&ev)) {
    if (o->label < 0 || o->label >= k) throw InvalidArgument("ordinary label out of range");
  } else if (const auto* c = std::get_if<Complementary>(&ev)) {
    if (c->labels.empty() || static_cast<int>(c->labels.size()) > k - 1) {
      throw InvalidArgument("complementary evidence must carry 1..K-1 labels");
    }
    std::vector<int> sorted = c->labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidArgument("complementary labels must be distinct");
    }
    if (sorted.front() < 0 || sorted.back() >= k) throw InvalidArgument("complementary label out of range");
  }
}

bool is_labeled(const LabelEvidence& ev) { return !std::holds_alternative<Unlabeled>(ev); }

ComplementaryDataset::ComplementaryDataset(Eigen::MatrixXd features, std::vector<LabelEvidence> evidence,
                                           std::vector<int> ground_truth, int k, double labeled_ratio,
                                           double complementary_ratio, std::uint64_t seed)
    : features_(std::move(features)),
      evidence_(std::move(evidence)),
      ground_truth_(std::move(ground_truth)),
      k_(k),
      labeled_ratio_(labeled_ratio),
      complementary_ratio_(complementary_ratio),
      seed_(seed) {
  if (k_ < 2) throw InvalidArgument("dataset needs K >= 2");
  const auto n = static_cast<std::size_t>(features_.rows());
  if (evidence_.size() != n || ground_truth_.size() != n) {
    throw InvalidArgument("dataset features, evidence and labels differ in length");
  }
  for (const auto& ev : evidence_) validate_evidence(ev, k_);
  for (std::size_t i = 0; i < n; ++i) {
    if (ground_truth_[i] < 0 || ground_truth_[i] >= k_) throw InvalidArgument("ground-truth label out of range");
    if (const auto* c = std::get_if<Complementary>(&evidence_[i])) {
      labels_per_example_ = std::max(labels_per_example_, static_cast<int>(c->labels.size()));
    }
  }
}

namespace {
template <typename Pred>
std::vector<Eigen::Index> indices_where(const std::vector<LabelEvidence>& ev, Pred pred) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (pred(ev[i])) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}
}  // namespace

std::vector<Eigen::Index> ComplementaryDataset::labeled_indices() const {
  return indices_where(evidence_, [](const LabelEvidence& e) { return is_labeled(e); });
}
std::vector<Eigen::Index> ComplementaryDataset::unlabeled_indices() const {
  return indices_where(evidence_, [](const LabelEvidence& e) { return !is_labeled(e); });
}
std::vector<Eigen::Index> ComplementaryDataset::ordinary_indices() const {
  return indices_where(evidence_, [](const LabelEvidence& e) { return std::holds_alternative<Ordinary>(e); });
}
std::vector<Eigen::Index> ComplementaryDataset::complementary_indices() const {
  return indices_where(evidence_, [](const LabelEvidence& e) { return std::holds_alternative<Complementary>(e); });
}

ComplementaryDataset ComplementaryDataset::with_evidence(std::vector<LabelEvidence> evidence) const {
  ComplementaryDataset out(features_, std::move(evidence), ground_truth_, k_, labeled_ratio_,
                           complementary_ratio_, seed_);
  out.transition_ = transition_;
  return out;
}

std::vector<Complementary> generate_complementary(const std::vector<int>& labels, const TransitionMatrix& m,
                                                  int per_example, std::uint64_t seed) {
  const int k = m.classes();
  if (per_example < 1 || per_example > k - 1) throw InvalidArgument("labels per example must lie in [1, K-1]");
  for (int row = 0; row < k; ++row) {
    if (m.support(row) < per_example) {
      throw InvalidArgument("row " + std::to_string(row) + " of M has fewer than " + std::to_string(per_example) +
                            " nonzero entries");
    }
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Complementary> out;
  out.reserve(labels.size());
  Eigen::VectorXd weights(k);
  for (int y : labels) {
    if (y < 0 || y >= k) throw InvalidArgument("true label out of range");
    weights = m.entries().row(y).transpose();
    Complementary ev;
    ev.labels.reserve(static_cast<std::size_t>(per_example));
    for (int draw = 0; draw < per_example; ++draw) {
      const double total = weights.sum();
      const double u = unit(rng) * total;
      double acc = 0.0;
      int pick = -1;
      for (int j = 0; j < k; ++j) {
        if (weights(j) <= 0.0) continue;
        pick = j;  // last positive slot absorbs round-off
        acc += weights(j);
        if (u < acc) break;
      }
      ev.labels.push_back(pick);
      weights(pick) = 0.0;
    }
    out.push_back(std::move(ev));
  }
  return out;
}

Eigen::Index floor_count(double x) { return static_cast<Eigen::Index>(std::floor(x + 1e-9)); }

ComplementaryDataset split_dataset(const Eigen::MatrixXd& features, const std::vector<int>& labels, int k,
                                   double labeled_ratio, double complementary_ratio,
                                   const TransitionMatrix& m, int per_example, std::uint64_t seed) {
  if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) throw InvalidArgument("r_l must lie in (0, 1]");
  if (!(complementary_ratio >= 0.0 && complementary_ratio <= 1.0)) throw InvalidArgument("r_c must lie in [0, 1]");
  if (m.classes() != k) throw InvalidArgument("transition matrix size differs from K");
  const Eigen::Index n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw InvalidArgument("features and labels differ in length");

  const Eigen::Index n_labeled = floor_count(static_cast<double>(n) * labeled_ratio);
  if (n_labeled == 0) throw InvalidArgument("split leaves no labeled examples");
  const Eigen::Index n_comp = floor_count(static_cast<double>(n_labeled) * complementary_ratio);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> permuted(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) permuted[p] = labels[static_cast<std::size_t>(order[p])];
  const auto drawn = generate_complementary(permuted, m, per_example, derive_seed(seed, "complementary"));

  std::vector<LabelEvidence> evidence(static_cast<std::size_t>(n), Unlabeled{});
  for (Eigen::Index p = 0; p < n_labeled; ++p) {
    const auto i = static_cast<std::size_t>(order[static_cast<std::size_t>(p)]);
    if (p < n_comp) {
      evidence[i] = drawn[static_cast<std::size_t>(p)];
    } else {
      evidence[i] = Ordinary{labels[i]};
    }
  }
  ComplementaryDataset ds(features, std::move(evidence), labels, k, labeled_ratio, complementary_ratio, seed);
  ds.set_labels_per_example(per_example);
  ds.set_transition(m);
  return ds;
}

}  // namespace complearn::labels
