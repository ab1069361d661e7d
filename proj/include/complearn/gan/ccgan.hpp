#pragma once

#include "complearn/dcl/classifier.hpp"
#include "complearn/dcl/train.hpp"
#include "complearn/diff/mlp.hpp"
#include "complearn/diff/optim.hpp"
#include "complearn/labels/dataset.hpp"
#include "complearn/priors/simplex.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace complearn::gan {

using diff::Matrix;

enum class Phi { kLog, kHinge };

std::string to_string(Phi phi);
Phi phi_from_string(const std::string& name);

struct GanLossSpec {
  Phi phi = Phi::kLog;
  // Real-sample target for D becomes 1 - label_smoothing (log form only).
  double label_smoothing = 0.0;

  void validate() const;
};

/// G(z, y): an MLP over [z, onehot(y)].
class GeneratorModel {
 public:
  GeneratorModel() = default;
  GeneratorModel(int noise_dim, int classes, diff::Index data_dim, std::vector<diff::Index> hidden = {64, 64});

  int noise_dim() const { return noise_dim_; }
  int classes() const { return classes_; }
  diff::Index data_dim() const { return net_.spec().output_width(); }

  void initialize(std::uint64_t seed) { net_.initialize(seed); }
  void zero() { net_.zero(); }

  // Graph inputs: z (n x noise_dim), y_onehot (n x K). Returns the sample node.
  diff::NodeId build(diff::Graph& graph, diff::NodeId z, diff::NodeId y_onehot);

  diff::Mlp& network() { return net_; }
  const diff::Mlp& network() const { return net_; }

 private:
  int noise_dim_ = 0;
  int classes_ = 0;
  diff::Mlp net_;
};

// Unconditional critic D(x): {d, hidden..., 1} with leaky rectifiers and a raw score output.
diff::Mlp make_discriminator(diff::Index data_dim, std::vector<diff::Index> hidden = {64, 64});

struct BundleSpec {
  int noise_dim = 16;
  std::vector<diff::Index> generator_hidden = {64, 64};
  std::vector<diff::Index> discriminator_hidden = {64, 64};
  std::vector<diff::Index> classifier_hidden = {64, 64};
};

struct CcganBundle {
  GeneratorModel generator;
  diff::Mlp discriminator;
  dcl::ClassifierModel classifier;
  dcl::TransitionModel transition;
  std::optional<SimplexVector> prior;

  static CcganBundle make(diff::Index data_dim, int classes, dcl::TransitionModel transition,
                          const BundleSpec& spec = {});
  // Throws InvalidArgument on mismatched widths or class counts.
  void validate() const;
};

struct LossWeights {
  double adversarial = 1.0;
  double complementary = 1.0;
  double generated = 1.0;
};

struct ScheduleConfig {
  int warmup_epochs = 40;
  int joint_epochs = 20;
  int d_steps = 1;
  diff::OptimizerConfig warmup = diff::OptimizerConfig::warmup_sgd();
  diff::OptimizerConfig joint = diff::OptimizerConfig::joint_adam();
  bool use_unlabeled = false;
  LossWeights weights;
  GanLossSpec loss;
  // Replaces the estimated class prior used for sampling y.
  std::optional<SimplexVector> prior_override;
  // Re-initialize every network from the run seed before training.
  bool initialize = true;

  void validate() const;
};

std::vector<int> sample_labels(const SimplexVector& prior, std::size_t batch, std::uint64_t seed);
Matrix one_hot_rows(const std::vector<int>& labels, int classes);

Matrix generator_forward(const GeneratorModel& g, const Matrix& z, const std::vector<int>& y);

struct AdversarialLoss {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// Graph pieces for the adversarial term. Log form reads two inputs named
/// "<prefix>target_real" and "<prefix>target_fake" (n x 1) filled by feed_targets().
struct AdversarialNodes {
  diff::NodeId d_loss;
  diff::NodeId g_loss;
};
AdversarialNodes build_component_a(diff::Graph& graph, diff::NodeId real_scores, diff::NodeId fake_scores,
                                   const GanLossSpec& spec, const std::string& prefix = {});
void feed_targets(diff::Feed& feed, diff::Index real_rows, diff::Index fake_rows, const GanLossSpec& spec,
                  const std::string& prefix = {});

// Mean ordinary CE of the classifier on generated rows against their conditioning labels.
diff::NodeId build_component_c(diff::Graph& graph, diff::NodeId classifier_logits, diff::NodeId y_onehot);

AdversarialLoss loss_component_a(diff::Mlp& d, const Matrix& real, const Matrix& fake, const GanLossSpec& spec);
// Mean over the batch of dcl::complementary_ce_loss(C(x_i), ybar_i, M).
double loss_component_b(const dcl::ClassifierModel& c, const labels::TransitionMatrix& m, const Matrix& x,
                        const std::vector<int>& complementary);
double loss_component_c(dcl::ClassifierModel& c, GeneratorModel& g, const Matrix& z, const std::vector<int>& y);

struct GanEpochRecord {
  int epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double c_loss = 0.0;
};

struct CcganResult {
  CcganBundle bundle;
  dcl::TrainReport report;
  std::vector<GanEpochRecord> gan_epochs;
  SimplexVector prior;  // the prior y was sampled from
};

/// Class prior for sampling y: the QP estimate from complementary labels
/// under the current transition, or ordinary-label frequencies when the
/// dataset has no complementary labels.
SimplexVector estimate_class_prior(const labels::ComplementaryDataset& ds, const labels::TransitionMatrix& m);

/// Stage 1 trains C (and a trainable M) exactly as train_dcl does. Stage 2
/// alternates, per labeled batch: D on the adversarial term, G on its
/// adversarial part plus the generated-sample CE, then C (and M) on the
/// corrected loss plus the generated-sample CE. Networks are initialized
/// from `seed` unless schedule.initialize is false.
CcganResult train_ccgan(const labels::ComplementaryDataset& ds, CcganBundle bundle, const ScheduleConfig& schedule,
                        std::uint64_t seed, const dcl::EvalSet* eval = nullptr);

/// train_ccgan whose adversarial real pool also holds the unlabeled features.
CcganResult train_sccgan(const labels::ComplementaryDataset& ds, CcganBundle bundle, ScheduleConfig schedule,
                         std::uint64_t seed, const dcl::EvalSet* eval = nullptr);

struct GeneratedSamples {
  Matrix features;
  std::vector<int> labels;
};
// `per_class` samples for every class, grouped by class.
GeneratedSamples generate_samples(const GeneratorModel& g, int per_class, std::uint64_t seed);

double m_recovery_error(const labels::TransitionMatrix& estimated, const labels::TransitionMatrix& truth);

}  // namespace complearn::gan
