#pragma once

#include "complearn/diff/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace complearn::diff {

enum class Activation { kRelu, kLeakyRelu, kTanh, kSigmoid, kIdentity };
enum class OutputHead { kSoftmax, kLinear, kSigmoid };

/// Layer widths include the input width: {in, hidden..., out}.
struct MlpSpec {
  std::vector<Index> widths;
  std::vector<Activation> hidden_activations;  // one per hidden layer
  OutputHead head = OutputHead::kLinear;
  double leaky_slope = 0.2;

  Index input_width() const { return widths.front(); }
  Index output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }

  void validate() const;

  static MlpSpec uniform(std::vector<Index> widths, Activation hidden, OutputHead head);
};

/// Fully connected network. Owns its parameters by value; copies are deep.
class Mlp {
 public:
  struct Nodes {
    NodeId logits;  // pre-head activations
    NodeId output;  // after the head (same node as logits for a linear head)
  };

  Mlp() = default;
  Mlp(std::string name, MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

  // Glorot-uniform weights, zero biases.
  void initialize(std::uint64_t seed);
  void zero();

  Nodes build(Graph& graph, NodeId input);

  // Direct evaluation without a graph, for inference.
  Matrix logits(const Matrix& x) const;
  Matrix apply(const Matrix& x) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  std::string name_;
  MlpSpec spec_;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

Matrix softmax_rows(const Matrix& logits);

}  // namespace complearn::diff
