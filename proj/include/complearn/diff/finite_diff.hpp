#pragma once

#include "complearn/diff/graph.hpp"

#include <functional>
#include <vector>

namespace complearn::diff {

/// Central differences (f(p + h) - f(p - h)) / 2h, one coordinate at a time.
/// Every parameter is restored to its original value afterwards.
std::vector<Matrix> finite_difference_grad(const std::function<double()>& loss,
                                           const std::vector<Parameter*>& params, double step);

double finite_difference(const std::function<double(double)>& f, double x, double step);

}  // namespace complearn::diff
