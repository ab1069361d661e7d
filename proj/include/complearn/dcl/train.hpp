#pragma once

#include "complearn/dcl/classifier.hpp"
#include "complearn/diff/optim.hpp"
#include "complearn/labels/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace complearn::dcl {

/// Held-out data for per-epoch scoring. `reference` is the true transition
/// matrix, used only to report the recovery error of a trainable M.
struct EvalSet {
  Matrix features;
  std::vector<int> labels;
  std::optional<labels::TransitionMatrix> reference;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;  // NaN without an EvalSet
  double m_error = 0.0;        // NaN unless M is trainable and a reference is known
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> warnings;

  bool has_m_error() const;
  double final_accuracy() const;
  // epoch,train_loss,test_acc[,m_error]
  void write_csv(std::ostream& out) const;
};

struct DclConfig {
  diff::OptimizerConfig optimizer = diff::OptimizerConfig::warmup_sgd();
  int epochs = 40;
};

/// Rows of `batch` are dataset indices. Ordinary examples weigh 1/B each
/// through `ordinary`; complementary examples share (n_comp/B) spread evenly
/// over all of their labels through `complementary`.
struct BatchTargets {
  Matrix ordinary;
  Matrix complementary;
};
BatchTargets make_targets(const labels::ComplementaryDataset& ds, const std::vector<Eigen::Index>& batch);

// Loss graph for one labeled batch: ordinary CE on softmax logits plus corrected CE through M.
diff::NodeId build_corrected_objective(diff::Graph& graph, diff::NodeId logits, diff::NodeId transition,
                                       diff::NodeId ordinary_targets, diff::NodeId complementary_targets);

Matrix gather_rows(const Matrix& x, const std::vector<Eigen::Index>& rows);

// Seeds shared with the classifier warm-up of the generative trainer.
std::uint64_t classifier_init_seed(std::uint64_t seed);
std::uint64_t classifier_epoch_seed(std::uint64_t seed, int epoch);

/// Train `model` (already initialized) on every labeled example of `ds`,
/// updating a trainable `transition` alongside it with the same optimizer.
/// Each epoch reshuffles from classifier_epoch_seed(seed, epoch).
/// `first_epoch` offsets the recorded epoch numbers.
TrainReport train_classifier(ClassifierModel& model, TransitionModel& transition,
                             const labels::ComplementaryDataset& ds, const DclConfig& config, std::uint64_t seed,
                             const EvalSet* eval = nullptr, int first_epoch = 0);

struct DclResult {
  ClassifierModel model;
  TransitionModel transition;
  TrainReport report;
};

/// Discriminative baseline: default-architecture classifier initialized from
/// classifier_init_seed(seed), trained by train_classifier.
DclResult train_dcl(const labels::ComplementaryDataset& ds, TransitionModel transition, const DclConfig& config,
                    std::uint64_t seed, const EvalSet* eval = nullptr,
                    std::vector<diff::Index> hidden = {64, 64});

}  // namespace complearn::dcl
