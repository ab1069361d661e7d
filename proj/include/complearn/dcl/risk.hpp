#pragma once

#include "complearn/dcl/classifier.hpp"
#include "complearn/labels/dataset.hpp"
#include "complearn/priors/simplex.hpp"

#include <vector>

namespace complearn::dcl {

// -log max(g_y, floor)
double ordinary_ce_loss(const SimplexVector& g, int y);
// -log max((M^T g)_ybar, floor)
double complementary_ce_loss(const SimplexVector& g, int complementary_label, const labels::TransitionMatrix& m);

// Mean ordinary cross-entropy of the model on (x, y).
double ordinary_ce_risk(const ClassifierModel& model, const Matrix& x, const std::vector<int>& y);

// Mean corrected loss over complementary examples, using each example's first label.
double complementary_risk(const ClassifierModel& model, const labels::ComplementaryDataset& ds,
                          const labels::TransitionMatrix& m);
// Sum of corrected losses over every complementary label, divided by the total label count.
double multi_complementary_risk(const ClassifierModel& model, const labels::ComplementaryDataset& ds,
                                const labels::TransitionMatrix& m);

// Same estimators on precomputed posteriors (row i belongs to example i).
double complementary_risk(const Matrix& probs, const std::vector<labels::LabelEvidence>& evidence,
                          const labels::TransitionMatrix& m);
double multi_complementary_risk(const Matrix& probs, const std::vector<labels::LabelEvidence>& evidence,
                                const labels::TransitionMatrix& m);

}  // namespace complearn::dcl
