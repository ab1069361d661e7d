#include "complearn/diff/optim.hpp"

#include "complearn/error.hpp"

#include <cmath>

namespace complearn::diff {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (momentum < 0.0 || weight_decay < 0.0 || epsilon <= 0.0) {
    throw InvalidArgument("momentum and weight decay must be >= 0, epsilon > 0");
  }
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
}

OptimizerConfig OptimizerConfig::warmup_sgd() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kSgd;
  c.learning_rate = 1e-2;
  c.momentum = 0.9;
  c.weight_decay = 5e-4;
  c.batch_size = 128;
  return c;
}

OptimizerConfig OptimizerConfig::joint_adam() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdam;
  c.learning_rate = 2e-4;
  c.beta1 = 0.5;
  c.beta2 = 0.999;
  c.batch_size = 128;
  return c;
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw InvalidArgument("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Parameter*> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  for (Parameter* p : params_) {
    first_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    second_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Optimizer::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Optimizer::step() {
  for (Parameter* p : params_) {
    if (!p->grad.allFinite()) throw DivergenceError("non-finite gradient in parameter '" + p->name + "'");
  }
  ++t_;
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Matrix g = p.grad;
    if (config_.weight_decay != 0.0) g += config_.weight_decay * p.value;
    if (config_.kind == OptimizerKind::kSgd) {
      if (config_.momentum != 0.0) {
        first_[i] = config_.momentum * first_[i] + g;
        p.value -= lr * first_[i];
      } else {
        p.value -= lr * g;
      }
    } else {
      first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * g;
      second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
      p.value.array() -= lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + config_.epsilon);
    }
  }
}

}  // namespace complearn::diff
