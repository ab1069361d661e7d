#include "complearn/dcl/risk.hpp"

#include "complearn/diff/graph.hpp"
#include "complearn/error.hpp"

#include <cmath>

namespace complearn::dcl {

using labels::Complementary;

double ordinary_ce_loss(const SimplexVector& g, int y) {
  if (y < 0 || y >= g.size()) throw InvalidArgument("label out of range");
  return -std::log(std::max(g[y], diff::kProbabilityFloor));
}

double complementary_ce_loss(const SimplexVector& g, int complementary_label, const labels::TransitionMatrix& m) {
  const SimplexVector corrected = labels::forward_correct(m, g);
  if (complementary_label < 0 || complementary_label >= corrected.size()) {
    throw InvalidArgument("complementary label out of range");
  }
  return -std::log(std::max(corrected[complementary_label], diff::kProbabilityFloor));
}

double ordinary_ce_risk(const ClassifierModel& model, const Matrix& x, const std::vector<int>& y) {
  if (x.rows() == 0) throw InvalidArgument("ordinary_ce_risk of an empty batch");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InvalidArgument("features and labels differ in length");
  const Matrix probs = model.probabilities(x);
  double total = 0.0;
  for (diff::Index i = 0; i < probs.rows(); ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    if (yi < 0 || yi >= probs.cols()) throw InvalidArgument("label out of range");
    total -= std::log(std::max(probs(i, yi), diff::kProbabilityFloor));
  }
  return total / static_cast<double>(probs.rows());
}

namespace {

double corrected_nll(const Matrix& corrected, diff::Index row, int label) {
  return -std::log(std::max(corrected(row, label), diff::kProbabilityFloor));
}

}  // namespace

double complementary_risk(const Matrix& probs, const std::vector<labels::LabelEvidence>& evidence,
                          const labels::TransitionMatrix& m) {
  if (static_cast<std::size_t>(probs.rows()) != evidence.size()) throw InvalidArgument("posterior/evidence length mismatch");
  const Matrix corrected = labels::forward_correct(m, probs);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (const auto* c = std::get_if<Complementary>(&evidence[i])) {
      total += corrected_nll(corrected, static_cast<diff::Index>(i), c->labels.front());
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("complementary_risk: no complementary examples");
  return total / static_cast<double>(count);
}

double multi_complementary_risk(const Matrix& probs, const std::vector<labels::LabelEvidence>& evidence,
                                const labels::TransitionMatrix& m) {
  if (static_cast<std::size_t>(probs.rows()) != evidence.size()) throw InvalidArgument("posterior/evidence length mismatch");
  const Matrix corrected = labels::forward_correct(m, probs);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (const auto* c = std::get_if<Complementary>(&evidence[i])) {
      for (int label : c->labels) total += corrected_nll(corrected, static_cast<diff::Index>(i), label);
      count += c->labels.size();
    }
  }
  if (count == 0) throw InvalidArgument("multi_complementary_risk: no complementary labels");
  return total / static_cast<double>(count);
}

double complementary_risk(const ClassifierModel& model, const labels::ComplementaryDataset& ds,
                          const labels::TransitionMatrix& m) {
  return complementary_risk(model.probabilities(ds.features()), ds.evidence(), m);
}

double multi_complementary_risk(const ClassifierModel& model, const labels::ComplementaryDataset& ds,
                                const labels::TransitionMatrix& m) {
  return multi_complementary_risk(model.probabilities(ds.features()), ds.evidence(), m);
}

}  // namespace complearn::dcl
