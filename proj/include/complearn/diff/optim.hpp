#pragma once

#include "complearn/diff/graph.hpp"

#include <string>
#include <vector>

namespace complearn::diff {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-2;
  double momentum = 0.0;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;

  void validate() const;

  // Warm-up stage: SGD, batch 128, weight decay 5e-4, momentum 0.9, lr 1e-2.
  static OptimizerConfig warmup_sgd();
  // Joint stage: Adam, lr 2e-4, beta1 0.5, beta2 0.999.
  static OptimizerConfig joint_adam();
};

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

/// First-order optimizer over a fixed list of parameters.
///
/// SGD: v <- momentum * v + (g + wd * p); p <- p - lr * v.
/// Adam: bias-corrected moments of (g + wd * p).
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Parameter*> params);

  // Throws DivergenceError if any gradient is non-finite; nothing is updated then.
  void step();
  void zero_grad();

  const OptimizerConfig& config() const { return config_; }
  long steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  std::vector<Parameter*> params_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  long t_ = 0;
};

}  // namespace complearn::diff
