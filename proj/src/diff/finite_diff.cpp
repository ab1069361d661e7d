#include "complearn/diff/finite_diff.hpp"

#include "complearn/error.hpp"

namespace complearn::diff {

std::vector<Matrix> finite_difference_grad(const std::function<double()>& loss,
                                           const std::vector<Parameter*>& params, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    Matrix g(p->value.rows(), p->value.cols());
    for (Index r = 0; r < p->value.rows(); ++r) {
      for (Index c = 0; c < p->value.cols(); ++c) {
        const double original = p->value(r, c);
        p->value(r, c) = original + step;
        const double up = loss();
        p->value(r, c) = original - step;
        const double down = loss();
        p->value(r, c) = original;
        g(r, c) = (up - down) / (2.0 * step);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double finite_difference(const std::function<double(double)>& f, double x, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

}  // namespace complearn::diff
