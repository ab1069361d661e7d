#include "complearn/dcl/classifier.hpp"

#include "complearn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace complearn::dcl {

ClassifierModel::ClassifierModel(diff::MlpSpec spec) : net_("C", std::move(spec)) {
  if (net_.spec().head != diff::OutputHead::kSoftmax) throw InvalidArgument("classifier needs a softmax head");
  if (net_.spec().output_width() < 2) throw InvalidArgument("classifier needs K >= 2 outputs");
}

diff::MlpSpec ClassifierModel::default_spec(diff::Index input_dim, int classes, std::vector<diff::Index> hidden) {
  std::vector<diff::Index> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(classes);
  return diff::MlpSpec::uniform(std::move(widths), diff::Activation::kRelu, diff::OutputHead::kSoftmax);
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (diff::Index i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (diff::Index j = 1; j < probs.cols(); ++j) {
      if (probs(i, j) > probs(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

std::vector<int> ClassifierModel::predict(const Matrix& x) const { return argmax_rows(probabilities(x)); }

double evaluate_accuracy(const ClassifierModel& model, const Matrix& x, const std::vector<int>& y) {
  if (x.rows() == 0) throw InvalidArgument("evaluate_accuracy needs a nonempty test set");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InvalidArgument("test features and labels differ in length");
  const auto pred = model.predict(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

TransitionModel::TransitionModel(labels::TransitionMatrix fixed)
    : fixed_(std::move(fixed)), logits_("M/logits", fixed_->classes(), fixed_->classes()) {}

TransitionModel TransitionModel::trainable(int classes) {
  if (classes < 2) throw InvalidArgument("trainable transition needs K >= 2");
  TransitionModel t;
  t.trainable_ = true;
  t.logits_ = diff::Parameter("M/logits", classes, classes);
  return t;
}

labels::TransitionMatrix TransitionModel::current() const {
  if (!trainable_) return *fixed_;
  const auto k = logits_.value.rows();
  Matrix m = Matrix::Zero(k, k);
  for (diff::Index r = 0; r < k; ++r) {
    double hi = -std::numeric_limits<double>::infinity();
    for (diff::Index c = 0; c < k; ++c) {
      if (c != r) hi = std::max(hi, logits_.value(r, c));
    }
    double total = 0.0;
    for (diff::Index c = 0; c < k; ++c) {
      if (c == r) continue;
      m(r, c) = std::exp(logits_.value(r, c) - hi);
      total += m(r, c);
    }
    m.row(r) /= total;
  }
  return labels::TransitionMatrix(std::move(m));
}

diff::NodeId TransitionModel::build(diff::Graph& graph) {
  if (!trainable_) return graph.constant(fixed_->entries(), "M");
  return graph.off_diagonal_softmax(graph.parameter(logits_));
}

}  // namespace complearn::dcl
