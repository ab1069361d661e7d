#include "complearn/diff/mlp.hpp"

#include "complearn/error.hpp"
#include "complearn/random.hpp"

#include <cmath>

namespace complearn::diff {

void MlpSpec::validate() const {
  if (widths.size() < 2) throw InvalidArgument("MlpSpec needs at least one layer (two widths)");
  for (Index w : widths) {
    if (w <= 0) throw InvalidArgument("MlpSpec widths must be positive");
  }
  if (hidden_activations.size() != widths.size() - 2) {
    throw InvalidArgument("MlpSpec needs one activation per hidden layer");
  }
}

MlpSpec MlpSpec::uniform(std::vector<Index> widths, Activation hidden, OutputHead head) {
  MlpSpec spec;
  const std::size_t hidden_layers = widths.size() >= 2 ? widths.size() - 2 : 0;
  spec.widths = std::move(widths);
  spec.hidden_activations.assign(hidden_layers, hidden);
  spec.head = head;
  return spec;
}

Mlp::Mlp(std::string name, MlpSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    const std::string prefix = name_ + "/layer" + std::to_string(l);
    weights_.emplace_back(prefix + "/weight", spec_.widths[l], spec_.widths[l + 1]);
    biases_.emplace_back(prefix + "/bias", 1, spec_.widths[l + 1]);
  }
}

void Mlp::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double fan_in = static_cast<double>(spec_.widths[l]);
    const double fan_out = static_cast<double>(spec_.widths[l + 1]);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix& w = weights_[l].value;
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    biases_[l].value.setZero();
  }
}

void Mlp::zero() {
  for (auto& w : weights_) w.value.setZero();
  for (auto& b : biases_) b.value.setZero();
}

namespace {

NodeId activate(Graph& g, NodeId x, Activation act, double slope) {
  switch (act) {
    case Activation::kRelu: return g.relu(x);
    case Activation::kLeakyRelu: return g.leaky_relu(x, slope);
    case Activation::kTanh: return g.tanh(x);
    case Activation::kSigmoid: return g.sigmoid(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

Matrix activate(const Matrix& x, Activation act, double slope) {
  switch (act) {
    case Activation::kRelu: return x.cwiseMax(0.0);
    case Activation::kLeakyRelu: return x.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
    case Activation::kTanh: return x.array().tanh().matrix();
    case Activation::kSigmoid: return (1.0 / (1.0 + (-x.array()).exp())).matrix();
    case Activation::kIdentity: return x;
  }
  return x;
}

}  // namespace

Mlp::Nodes Mlp::build(Graph& graph, NodeId input) {
  NodeId h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const NodeId w = graph.parameter(weights_[l]);
    const NodeId b = graph.parameter(biases_[l]);
    h = graph.add_bias(graph.matmul(h, w), b);
    graph.set_label(h, name_ + "/layer" + std::to_string(l));
    if (l + 1 < weights_.size()) h = activate(graph, h, spec_.hidden_activations[l], spec_.leaky_slope);
  }
  switch (spec_.head) {
    case OutputHead::kSoftmax: return {h, graph.softmax_rows(h)};
    case OutputHead::kSigmoid: return {h, graph.sigmoid(h)};
    case OutputHead::kLinear: break;
  }
  return {h, h};
}

Matrix Mlp::logits(const Matrix& x) const {
  if (x.cols() != spec_.input_width()) {
    throw ShapeError(name_ + ": input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(spec_.input_width()));
  }
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = h * weights_[l].value;
    z.rowwise() += biases_[l].value.row(0);
    h = (l + 1 < weights_.size()) ? activate(z, spec_.hidden_activations[l], spec_.leaky_slope) : std::move(z);
  }
  return h;
}

Matrix Mlp::apply(const Matrix& x) const {
  Matrix z = logits(x);
  switch (spec_.head) {
    case OutputHead::kSoftmax: return softmax_rows(z);
    case OutputHead::kSigmoid: return activate(z, Activation::kSigmoid, 0.0);
    case OutputHead::kLinear: break;
  }
  return z;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace complearn::diff
