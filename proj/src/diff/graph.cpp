#include "complearn/diff/graph.hpp"

#include "complearn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace complearn::diff {

namespace {

bool dims_conflict(Index a, Index b) { return a != kDynamic && b != kDynamic && a != b; }

Index merge_dim(Index a, Index b) { return a == kDynamic ? b : a; }

std::string shape_str(Index rows, Index cols) {
  auto dim = [](Index d) { return d == kDynamic ? std::string("?") : std::to_string(d); };
  return "(" + dim(rows) + " x " + dim(cols) + ")";
}

std::string shape_str(const Matrix& m) { return shape_str(m.rows(), m.cols()); }

const double kLogFloor = std::log(kProbabilityFloor);
const double kLogCeil = std::log1p(-kProbabilityFloor);

// log(sigmoid(s)) without overflow.
double log_sigmoid(double s) { return s >= 0 ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s)); }

double stable_sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

Matrix row_softmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAffine: return "affine";
    case OpKind::kRelu: return "relu";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSquare: return "square";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kOffDiagonalSoftmax: return "off_diagonal_softmax";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kClampedNll: return "clamped_nll";
    case OpKind::kSigmoidBinaryCrossEntropy: return "sigmoid_bce";
  }
  return "unknown";
}

std::string Graph::describe(std::size_t index) const {
  const Node& n = nodes_[index];
  std::ostringstream os;
  os << "node " << index << " (" << op_name(n.kind);
  if (!n.label.empty()) os << " '" << n.label << "'";
  os << ")";
  return os.str();
}

void Graph::shape_error(std::size_t index, const std::string& detail) const {
  throw ShapeError(describe(index) + ": " + detail);
}

void Graph::check_node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw InvalidArgument("graph node " + std::to_string(id.index) + " does not exist");
  }
}

NodeId Graph::push(Node node) {
  for (NodeId p : node.parents) check_node(p);
  nodes_.push_back(std::move(node));
  evaluated_ = false;
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::input(std::string name, Index rows, Index cols) {
  if (inputs_.contains(name)) throw InvalidArgument("duplicate graph input '" + name + "'");
  Node n{OpKind::kInput};
  n.label = name;
  n.rows = rows;
  n.cols = cols;
  const NodeId id = push(std::move(n));
  inputs_.emplace(std::move(name), id.index);
  return id;
}

NodeId Graph::parameter(Parameter& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  Node n{OpKind::kParameter};
  n.label = p.name;
  n.rows = p.value.rows();
  n.cols = p.value.cols();
  n.param = &p;
  return push(std::move(n));
}

NodeId Graph::constant(Matrix value, std::string label) {
  Node n{OpKind::kConstant};
  n.label = std::move(label);
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  const Node& na = nodes_[a.index];
  const Node& nb = nodes_[b.index];
  Node n{OpKind::kMatMul};
  n.parents = {a, b};
  n.rows = na.rows;
  n.cols = nb.cols;
  const bool bad = dims_conflict(na.cols, nb.rows);
  const std::string detail = "inner dimensions differ " + shape_str(na.rows, na.cols) + " * " +
                             shape_str(nb.rows, nb.cols);
  const NodeId id = push(std::move(n));
  if (bad) shape_error(id.index, detail);
  return id;
}

NodeId Graph::add_bias(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  const Node& na = nodes_[a.index];
  const Node& nb = nodes_[b.index];
  Node n{OpKind::kAddBias};
  n.parents = {a, b};
  n.rows = na.rows;
  n.cols = merge_dim(na.cols, nb.cols);
  const bool bad = dims_conflict(nb.rows, 1) || dims_conflict(na.cols, nb.cols);
  const NodeId id = push(std::move(n));
  if (bad) shape_error(id.index, "bias must be 1 x cols(a)");
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  const Node& na = nodes_[a.index];
  const Node& nb = nodes_[b.index];
  Node n{OpKind::kAdd};
  n.parents = {a, b};
  n.rows = merge_dim(na.rows, nb.rows);
  n.cols = merge_dim(na.cols, nb.cols);
  const bool bad = dims_conflict(na.rows, nb.rows) || dims_conflict(na.cols, nb.cols);
  const NodeId id = push(std::move(n));
  if (bad) shape_error(id.index, "operands must have equal shapes");
  return id;
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const NodeId id = add(a, b);
  nodes_[id.index].kind = OpKind::kSub;
  return id;
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const NodeId id = add(a, b);
  nodes_[id.index].kind = OpKind::kMul;
  return id;
}

NodeId Graph::affine(NodeId a, double scale, double shift) {
  check_node(a);
  Node n{OpKind::kAffine};
  n.parents = {a};
  n.rows = nodes_[a.index].rows;
  n.cols = nodes_[a.index].cols;
  n.alpha = scale;
  n.beta = shift;
  return push(std::move(n));
}

#define COMPLEARN_UNARY(method, opkind)       \
  NodeId Graph::method(NodeId a) {            \
    check_node(a);                            \
    Node n{opkind};                           \
    n.parents = {a};                          \
    n.rows = nodes_[a.index].rows;            \
    n.cols = nodes_[a.index].cols;            \
    return push(std::move(n));                \
  }

COMPLEARN_UNARY(relu, OpKind::kRelu)
COMPLEARN_UNARY(sigmoid, OpKind::kSigmoid)
COMPLEARN_UNARY(tanh, OpKind::kTanh)
COMPLEARN_UNARY(square, OpKind::kSquare)
COMPLEARN_UNARY(softmax_rows, OpKind::kSoftmaxRows)

#undef COMPLEARN_UNARY

NodeId Graph::leaky_relu(NodeId a, double slope) {
  check_node(a);
  Node n{OpKind::kLeakyRelu};
  n.parents = {a};
  n.rows = nodes_[a.index].rows;
  n.cols = nodes_[a.index].cols;
  n.alpha = slope;
  return push(std::move(n));
}

NodeId Graph::off_diagonal_softmax(NodeId logits) {
  check_node(logits);
  const Node& nl = nodes_[logits.index];
  Node n{OpKind::kOffDiagonalSoftmax};
  n.parents = {logits};
  n.rows = nl.rows;
  n.cols = nl.cols;
  const bool bad = dims_conflict(nl.rows, nl.cols) || (nl.cols != kDynamic && nl.cols < 2);
  const NodeId id = push(std::move(n));
  if (bad) shape_error(id.index, "logits must be square with at least 2 columns");
  return id;
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  const Node& na = nodes_[a.index];
  const Node& nb = nodes_[b.index];
  Node n{OpKind::kConcatCols};
  n.parents = {a, b};
  n.rows = merge_dim(na.rows, nb.rows);
  n.cols = (na.cols == kDynamic || nb.cols == kDynamic) ? kDynamic : na.cols + nb.cols;
  const bool bad = dims_conflict(na.rows, nb.rows);
  const NodeId id = push(std::move(n));
  if (bad) shape_error(id.index, "operands must have equal row counts");
  return id;
}

NodeId Graph::sum(NodeId a) {
  check_node(a);
  Node n{OpKind::kSum};
  n.parents = {a};
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

NodeId Graph::mean(NodeId a) {
  const NodeId id = sum(a);
  nodes_[id.index].kind = OpKind::kMean;
  return id;
}

NodeId Graph::softmax_cross_entropy(NodeId logits, NodeId target_weights) {
  const NodeId id = add(logits, target_weights);
  Node& n = nodes_[id.index];
  n.kind = OpKind::kSoftmaxCrossEntropy;
  n.rows = 1;
  n.cols = 1;
  return id;
}

NodeId Graph::clamped_nll(NodeId probs, NodeId target_weights) {
  const NodeId id = add(probs, target_weights);
  Node& n = nodes_[id.index];
  n.kind = OpKind::kClampedNll;
  n.rows = 1;
  n.cols = 1;
  return id;
}

NodeId Graph::sigmoid_bce(NodeId logits, NodeId targets) {
  const NodeId id = add(logits, targets);
  Node& n = nodes_[id.index];
  const Index cols = n.cols;
  n.kind = OpKind::kSigmoidBinaryCrossEntropy;
  n.rows = 1;
  n.cols = 1;
  if (dims_conflict(cols, 1)) shape_error(id.index, "expects n x 1 logits and targets");
  return id;
}

void Graph::set_label(NodeId id, std::string label) {
  check_node(id);
  nodes_[id.index].label = std::move(label);
}

void Graph::mark_output(std::string name, NodeId id) {
  check_node(id);
  outputs_[std::move(name)] = id;
}

void Graph::forward(const Feed& feed) {
  evaluated_ = false;
  for (const auto& [name, _] : feed) {
    if (!inputs_.contains(name)) throw InvalidArgument("feed names unknown graph input '" + name + "'");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.kind == OpKind::kInput) {
      const auto it = feed.find(n.label);
      if (it == feed.end()) shape_error(i, "no value fed for input");
      const Matrix& v = it->second;
      if (dims_conflict(n.rows, v.rows()) || dims_conflict(n.cols, v.cols())) {
        shape_error(i, "fed " + shape_str(v) + ", declared " + shape_str(n.rows, n.cols));
      }
      n.value = v;
    } else {
      evaluate(i);
    }
  }
  evaluated_ = true;
}

void Graph::evaluate(std::size_t i) {
  Node& n = nodes_[i];
  auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.parents[k].index].value; };
  auto same_shape = [&](const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      shape_error(i, "operand shapes differ " + shape_str(a) + " vs " + shape_str(b));
    }
  };

  switch (n.kind) {
    case OpKind::kInput:
      break;
    case OpKind::kParameter:
      n.value = n.param->value;
      break;
    case OpKind::kConstant:
      break;
    case OpKind::kMatMul:
      if (in(0).cols() != in(1).rows()) {
        shape_error(i, "inner dimensions differ " + shape_str(in(0)) + " * " + shape_str(in(1)));
      }
      n.value.noalias() = in(0) * in(1);
      break;
    case OpKind::kAddBias:
      if (in(1).rows() != 1 || in(1).cols() != in(0).cols()) {
        shape_error(i, "bias " + shape_str(in(1)) + " does not match " + shape_str(in(0)));
      }
      n.value = in(0).rowwise() + in(1).row(0);
      break;
    case OpKind::kAdd:
      same_shape(in(0), in(1));
      n.value = in(0) + in(1);
      break;
    case OpKind::kSub:
      same_shape(in(0), in(1));
      n.value = in(0) - in(1);
      break;
    case OpKind::kMul:
      same_shape(in(0), in(1));
      n.value = in(0).cwiseProduct(in(1));
      break;
    case OpKind::kAffine:
      n.value = (n.alpha * in(0).array() + n.beta).matrix();
      break;
    case OpKind::kRelu:
      n.value = in(0).cwiseMax(0.0);
      break;
    case OpKind::kLeakyRelu:
      n.value = in(0).unaryExpr([s = n.alpha](double v) { return v > 0 ? v : s * v; });
      break;
    case OpKind::kSigmoid:
      n.value = in(0).unaryExpr([](double v) { return stable_sigmoid(v); });
      break;
    case OpKind::kTanh:
      n.value = in(0).array().tanh().matrix();
      break;
    case OpKind::kSquare:
      n.value = in(0).array().square().matrix();
      break;
    case OpKind::kSoftmaxRows:
      n.value = row_softmax(in(0));
      break;
    case OpKind::kOffDiagonalSoftmax: {
      const Matrix& z = in(0);
      if (z.rows() != z.cols()) shape_error(i, "logits must be square, got " + shape_str(z));
      n.value.setZero(z.rows(), z.cols());
      for (Index r = 0; r < z.rows(); ++r) {
        double m = -std::numeric_limits<double>::infinity();
        for (Index c = 0; c < z.cols(); ++c) {
          if (c != r) m = std::max(m, z(r, c));
        }
        double total = 0.0;
        for (Index c = 0; c < z.cols(); ++c) {
          if (c == r) continue;
          n.value(r, c) = std::exp(z(r, c) - m);
          total += n.value(r, c);
        }
        n.value.row(r) /= total;
      }
      break;
    }
    case OpKind::kConcatCols:
      if (in(0).rows() != in(1).rows()) {
        shape_error(i, "row counts differ " + shape_str(in(0)) + " vs " + shape_str(in(1)));
      }
      n.value.resize(in(0).rows(), in(0).cols() + in(1).cols());
      n.value << in(0), in(1);
      break;
    case OpKind::kSum:
      n.value = Matrix::Constant(1, 1, in(0).sum());
      break;
    case OpKind::kMean:
      if (in(0).size() == 0) shape_error(i, "mean of an empty tensor");
      n.value = Matrix::Constant(1, 1, in(0).mean());
      break;
    case OpKind::kSoftmaxCrossEntropy: {
      const Matrix& z = in(0);
      const Matrix& t = in(1);
      same_shape(z, t);
      double loss = 0.0;
      for (Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        const double lse = m + std::log((z.row(r).array() - m).exp().sum());
        for (Index c = 0; c < z.cols(); ++c) {
          if (t(r, c) != 0.0) loss -= t(r, c) * (z(r, c) - lse);
        }
      }
      n.value = Matrix::Constant(1, 1, loss);
      break;
    }
    case OpKind::kClampedNll: {
      const Matrix& p = in(0);
      const Matrix& t = in(1);
      same_shape(p, t);
      double loss = 0.0;
      for (Index r = 0; r < p.rows(); ++r) {
        for (Index c = 0; c < p.cols(); ++c) {
          if (t(r, c) != 0.0) loss -= t(r, c) * std::log(std::max(p(r, c), kProbabilityFloor));
        }
      }
      n.value = Matrix::Constant(1, 1, loss);
      break;
    }
    case OpKind::kSigmoidBinaryCrossEntropy: {
      const Matrix& s = in(0);
      const Matrix& t = in(1);
      same_shape(s, t);
      if (s.cols() != 1 || s.rows() == 0) shape_error(i, "expects nonempty n x 1 logits, got " + shape_str(s));
      double loss = 0.0;
      for (Index r = 0; r < s.rows(); ++r) {
        const double log_d = std::clamp(log_sigmoid(s(r, 0)), kLogFloor, kLogCeil);
        const double log_not_d = std::clamp(log_sigmoid(-s(r, 0)), kLogFloor, kLogCeil);
        loss -= t(r, 0) * log_d + (1.0 - t(r, 0)) * log_not_d;
      }
      n.value = Matrix::Constant(1, 1, loss / static_cast<double>(s.rows()));
      break;
    }
  }
}

std::map<std::string, Matrix> Graph::outputs() const {
  if (!evaluated_) throw InvalidArgument("graph outputs requested before forward()");
  std::map<std::string, Matrix> out;
  for (const auto& [name, id] : outputs_) out.emplace(name, nodes_[id.index].value);
  return out;
}

void Graph::backward(NodeId loss) {
  check_node(loss);
  if (!evaluated_) throw InvalidArgument("backward() called before forward() on " + describe(loss.index));
  const Matrix& lv = nodes_[loss.index].value;
  if (lv.rows() != 1 || lv.cols() != 1) shape_error(loss.index, "backward() needs a scalar loss, got " + shape_str(lv));

  std::vector<char> live(nodes_.size(), 0);
  live[loss.index] = 1;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (!live[i]) continue;
    for (NodeId p : nodes_[i].parents) live[p.index] = 1;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    nodes_[i].grad.setZero(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  nodes_[loss.index].grad(0, 0) = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (live[i]) propagate(i);
  }
}

void Graph::propagate(std::size_t i) {
  Node& n = nodes_[i];
  const Matrix& g = n.grad;
  auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.parents[k].index].value; };
  auto acc = [&](std::size_t k) -> Matrix& { return nodes_[n.parents[k].index].grad; };

  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kConstant:
      break;
    case OpKind::kParameter:
      n.param->grad += g;
      break;
    case OpKind::kMatMul:
      acc(0).noalias() += g * in(1).transpose();
      acc(1).noalias() += in(0).transpose() * g;
      break;
    case OpKind::kAddBias:
      acc(0) += g;
      acc(1) += g.colwise().sum();
      break;
    case OpKind::kAdd:
      acc(0) += g;
      acc(1) += g;
      break;
    case OpKind::kSub:
      acc(0) += g;
      acc(1) -= g;
      break;
    case OpKind::kMul:
      acc(0) += g.cwiseProduct(in(1));
      acc(1) += g.cwiseProduct(in(0));
      break;
    case OpKind::kAffine:
      acc(0) += n.alpha * g;
      break;
    case OpKind::kRelu:
      acc(0).array() += g.array() * (in(0).array() > 0.0).cast<double>();
      break;
    case OpKind::kLeakyRelu:
      acc(0).array() += g.array() * in(0).unaryExpr([s = n.alpha](double v) { return v > 0 ? 1.0 : s; }).array();
      break;
    case OpKind::kSigmoid:
      acc(0).array() += g.array() * n.value.array() * (1.0 - n.value.array());
      break;
    case OpKind::kTanh:
      acc(0).array() += g.array() * (1.0 - n.value.array().square());
      break;
    case OpKind::kSquare:
      acc(0).array() += 2.0 * g.array() * in(0).array();
      break;
    case OpKind::kSoftmaxRows:
    case OpKind::kOffDiagonalSoftmax: {
      // dz_rc = s_rc * (g_rc - sum_k g_rk s_rk); the zero diagonal drops out.
      const Matrix& s = n.value;
      for (Index r = 0; r < s.rows(); ++r) {
        const double dot = g.row(r).dot(s.row(r));
        acc(0).row(r).array() += s.row(r).array() * (g.row(r).array() - dot);
      }
      break;
    }
    case OpKind::kConcatCols: {
      const Index left = in(0).cols();
      acc(0) += g.leftCols(left);
      acc(1) += g.rightCols(g.cols() - left);
      break;
    }
    case OpKind::kSum:
      acc(0).array() += g(0, 0);
      break;
    case OpKind::kMean:
      acc(0).array() += g(0, 0) / static_cast<double>(in(0).size());
      break;
    case OpKind::kSoftmaxCrossEntropy: {
      const Matrix& t = in(1);
      const Matrix s = row_softmax(in(0));
      const Vector row_mass = t.rowwise().sum();
      acc(0) += g(0, 0) * (s.array().colwise() * row_mass.array() - t.array()).matrix();
      // Target weights are data; no gradient flows into them.
      break;
    }
    case OpKind::kClampedNll: {
      const Matrix& p = in(0);
      const Matrix& t = in(1);
      Matrix& dp = acc(0);
      for (Index r = 0; r < p.rows(); ++r) {
        for (Index c = 0; c < p.cols(); ++c) {
          if (t(r, c) != 0.0 && p(r, c) > kProbabilityFloor) dp(r, c) -= g(0, 0) * t(r, c) / p(r, c);
        }
      }
      break;
    }
    case OpKind::kSigmoidBinaryCrossEntropy: {
      const Matrix& s = in(0);
      const Matrix& t = in(1);
      const double scale = g(0, 0) / static_cast<double>(s.rows());
      Matrix& ds = acc(0);
      for (Index r = 0; r < s.rows(); ++r) {
        const double d = stable_sigmoid(s(r, 0));
        const double log_d = log_sigmoid(s(r, 0));
        const double log_not_d = log_sigmoid(-s(r, 0));
        // d/ds[-log D] = D - 1 and d/ds[-log(1-D)] = D, each zero where clamped.
        double grad = 0.0;
        if (log_d > kLogFloor && log_d < kLogCeil) grad += t(r, 0) * (d - 1.0);
        if (log_not_d > kLogFloor && log_not_d < kLogCeil) grad += (1.0 - t(r, 0)) * d;
        ds(r, 0) += scale * grad;
      }
      break;
    }
  }
}

const Matrix& Graph::value(NodeId id) const {
  check_node(id);
  if (!evaluated_) throw InvalidArgument("value of " + describe(id.index) + " requested before forward()");
  return nodes_[id.index].value;
}

const Matrix& Graph::grad(NodeId id) const {
  check_node(id);
  return nodes_[id.index].grad;
}

double Graph::scalar(NodeId id) const {
  const Matrix& v = value(id);
  if (v.size() != 1) shape_error(id.index, "not a scalar: " + shape_str(v));
  return v(0, 0);
}

std::vector<Parameter*> Graph::parameters() const {
  std::vector<Parameter*> out;
  for (const Node& n : nodes_) {
    if (n.kind == OpKind::kParameter &&
        std::find(out.begin(), out.end(), n.param) == out.end()) {
      out.push_back(n.param);
    }
  }
  return out;
}

}  // namespace complearn::diff
