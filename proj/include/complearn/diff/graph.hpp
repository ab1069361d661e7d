#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace complearn::diff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Rows (or cols) left open until the first forward pass; used for batch axes.
inline constexpr Index kDynamic = -1;

// Probability floor applied inside every log of a probability.
inline constexpr double kProbabilityFloor = 1e-12;

/// A named trainable tensor. `grad` always has the shape of `value`;
/// backward() accumulates into it and optimizers consume it.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Index rows, Index cols)
      : name(std::move(name)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

enum class OpKind {
  kInput,
  kParameter,
  kConstant,
  kMatMul,
  kAddBias,
  kAdd,
  kSub,
  kMul,
  kAffine,
  kRelu,
  kLeakyRelu,
  kSigmoid,
  kTanh,
  kSquare,
  kSoftmaxRows,
  kOffDiagonalSoftmax,
  kConcatCols,
  kSum,
  kMean,
  kSoftmaxCrossEntropy,
  kClampedNll,
  kSigmoidBinaryCrossEntropy,
};

const char* op_name(OpKind kind);

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

using Feed = std::map<std::string, Matrix, std::less<>>;

/// Define-then-run computation graph over dense double matrices.
///
/// Nodes are appended in construction order, so the node list is itself a
/// topological order: every parent index is smaller than its child's. Shapes
/// are checked when an op is added (where both sides are known) and again
/// during forward(), where a mismatch raises ShapeError naming the node.
///
/// Parameter nodes hold non-owning pointers; the owning models must outlive
/// the graph.
class Graph {
 public:
  NodeId input(std::string name, Index rows, Index cols);
  NodeId parameter(Parameter& p);
  NodeId constant(Matrix value, std::string label = {});

  NodeId matmul(NodeId a, NodeId b);
  // a (n x m) plus row vector b (1 x m) broadcast over rows.
  NodeId add_bias(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  // Elementwise scale * a + shift.
  NodeId affine(NodeId a, double scale, double shift = 0.0);
  NodeId relu(NodeId a);
  NodeId leaky_relu(NodeId a, double slope);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId square(NodeId a);
  NodeId softmax_rows(NodeId a);
  // Square logits -> row-stochastic matrix with zero diagonal. Diagonal logits are ignored.
  NodeId off_diagonal_softmax(NodeId logits);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);

  // -sum_ij T_ij * log_softmax(z)_ij. Weights T carry any normalization.
  NodeId softmax_cross_entropy(NodeId logits, NodeId target_weights);
  // -sum_ij T_ij * log(max(P_ij, kProbabilityFloor)).
  NodeId clamped_nll(NodeId probs, NodeId target_weights);
  // Mean over rows of -[t log D + (1-t) log(1-D)], D = sigmoid(s) clamped to
  // [kProbabilityFloor, 1 - kProbabilityFloor]. `logits` and `targets` are n x 1.
  NodeId sigmoid_bce(NodeId logits, NodeId targets);

  void set_label(NodeId id, std::string label);
  void mark_output(std::string name, NodeId id);

  /// Evaluate every node. All declared inputs must be present in `feed`.
  void forward(const Feed& feed);

  /// Named outputs registered through mark_output(), copied from the last forward().
  std::map<std::string, Matrix> outputs() const;

  /// Reverse sweep from a scalar node; accumulates into Parameter::grad.
  /// Throws if no forward() has run since the graph last changed.
  void backward(NodeId loss);

  const Matrix& value(NodeId id) const;
  // Gradient of the last backward() loss w.r.t. this node.
  const Matrix& grad(NodeId id) const;
  double scalar(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id.index).kind; }
  const std::vector<NodeId>& parents(NodeId id) const { return nodes_.at(id.index).parents; }
  std::vector<Parameter*> parameters() const;

 private:
  struct Node {
    OpKind kind;
    std::string label;
    std::vector<NodeId> parents;
    Index rows = kDynamic;
    Index cols = kDynamic;
    double alpha = 0.0;
    double beta = 0.0;
    Parameter* param = nullptr;
    Matrix value;
    Matrix grad;
  };

  NodeId push(Node node);
  std::string describe(std::size_t index) const;
  [[noreturn]] void shape_error(std::size_t index, const std::string& detail) const;
  void check_node(NodeId id) const;
  void evaluate(std::size_t index);
  void propagate(std::size_t index);

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> inputs_;
  std::map<std::string, NodeId, std::less<>> outputs_;
  bool evaluated_ = false;
};

}  // namespace complearn::diff
