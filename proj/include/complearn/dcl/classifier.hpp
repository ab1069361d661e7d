#pragma once

#include "complearn/diff/mlp.hpp"
#include "complearn/labels/transition.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace complearn::dcl {

using diff::Matrix;

/// Softmax classifier g(x); row i of probabilities() estimates P(Y | x_i).
class ClassifierModel {
 public:
  ClassifierModel() = default;
  explicit ClassifierModel(diff::MlpSpec spec);

  // {d, hidden..., K} with rectifier hidden layers and a softmax head.
  static diff::MlpSpec default_spec(diff::Index input_dim, int classes, std::vector<diff::Index> hidden = {64, 64});

  void initialize(std::uint64_t seed) { net_.initialize(seed); }

  int classes() const { return static_cast<int>(net_.spec().output_width()); }
  diff::Index input_dim() const { return net_.spec().input_width(); }

  Matrix probabilities(const Matrix& x) const { return net_.apply(x); }
  // argmax with ties resolved toward the lowest class index.
  std::vector<int> predict(const Matrix& x) const;

  diff::Mlp& network() { return net_; }
  const diff::Mlp& network() const { return net_; }

 private:
  diff::Mlp net_;
};

std::vector<int> argmax_rows(const Matrix& probs);

double evaluate_accuracy(const ClassifierModel& model, const Matrix& x, const std::vector<int>& y);

/// Transition matrix used by the corrected loss: either fixed, or learned
/// through per-row logits over the K-1 off-diagonal slots (softmax keeps every
/// realization row-stochastic with a zero diagonal). Trainable logits start at
/// zero, i.e. at the uniform transition.
class TransitionModel {
 public:
  explicit TransitionModel(labels::TransitionMatrix fixed);
  static TransitionModel trainable(int classes);

  bool is_trainable() const { return trainable_; }
  int classes() const { return static_cast<int>(logits_.value.rows()); }
  labels::TransitionMatrix current() const;

  diff::NodeId build(diff::Graph& graph);
  // Null for a fixed matrix.
  diff::Parameter* parameter() { return trainable_ ? &logits_ : nullptr; }
  const diff::Parameter& logits() const { return logits_; }

 private:
  TransitionModel() = default;

  bool trainable_ = false;
  std::optional<labels::TransitionMatrix> fixed_;
  diff::Parameter logits_;
};

}  // namespace complearn::dcl
