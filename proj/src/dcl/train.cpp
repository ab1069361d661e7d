#include "complearn/dcl/train.hpp"

#include "complearn/error.hpp"
#include "complearn/labels/transition.hpp"
#include "complearn/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

namespace complearn::dcl {

using labels::Complementary;
using labels::Ordinary;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

bool TrainReport::has_m_error() const {
  return std::any_of(epochs.begin(), epochs.end(), [](const EpochRecord& r) { return !std::isnan(r.m_error); });
}

double TrainReport::final_accuracy() const { return epochs.empty() ? kNaN : epochs.back().test_accuracy; }

void TrainReport::write_csv(std::ostream& out) const {
  const bool with_m = has_m_error();
  out << "epoch,train_loss,test_acc" << (with_m ? ",m_error" : "") << '\n';
  for (const auto& r : epochs) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.test_accuracy);
    if (with_m) out << ',' << format_double(r.m_error);
    out << '\n';
  }
}

BatchTargets make_targets(const labels::ComplementaryDataset& ds, const std::vector<Eigen::Index>& batch) {
  const int k = ds.classes();
  const auto b = static_cast<Eigen::Index>(batch.size());
  BatchTargets t{Matrix::Zero(b, k), Matrix::Zero(b, k)};
  if (batch.empty()) return t;
  std::size_t comp_examples = 0;
  std::size_t comp_labels = 0;
  for (Eigen::Index i : batch) {
    if (const auto* c = std::get_if<Complementary>(&ds.evidence(i))) {
      ++comp_examples;
      comp_labels += c->labels.size();
    }
  }
  const double per_example = 1.0 / static_cast<double>(b);
  const double per_label = comp_labels == 0 ? 0.0
                                            : (static_cast<double>(comp_examples) / static_cast<double>(b)) /
                                                  static_cast<double>(comp_labels);
  for (Eigen::Index r = 0; r < b; ++r) {
    const auto& ev = ds.evidence(batch[static_cast<std::size_t>(r)]);
    if (const auto* o = std::get_if<Ordinary>(&ev)) {
      t.ordinary(r, o->label) = per_example;
    } else if (const auto* c = std::get_if<Complementary>(&ev)) {
      for (int label : c->labels) t.complementary(r, label) += per_label;
    } else {
      throw InvalidArgument("make_targets: batch contains an unlabeled example");
    }
  }
  return t;
}

diff::NodeId build_corrected_objective(diff::Graph& graph, diff::NodeId logits, diff::NodeId transition,
                                       diff::NodeId ordinary_targets, diff::NodeId complementary_targets) {
  const diff::NodeId ordinary = graph.softmax_cross_entropy(logits, ordinary_targets);
  const diff::NodeId corrected = graph.matmul(graph.softmax_rows(logits), transition);
  graph.set_label(corrected, "M^T g");
  const diff::NodeId complementary = graph.clamped_nll(corrected, complementary_targets);
  return graph.add(ordinary, complementary);
}

Matrix gather_rows(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

std::uint64_t classifier_init_seed(std::uint64_t seed) { return derive_seed(seed, "classifier-init"); }

std::uint64_t classifier_epoch_seed(std::uint64_t seed, int epoch) {
  return derive_seed(seed, "classifier-epoch", static_cast<std::uint64_t>(epoch));
}

TrainReport train_classifier(ClassifierModel& model, TransitionModel& transition,
                             const labels::ComplementaryDataset& ds, const DclConfig& config, std::uint64_t seed,
                             const EvalSet* eval, int first_epoch) {
  config.optimizer.validate();
  if (config.epochs < 0) throw InvalidArgument("epoch count must be >= 0");
  if (model.classes() != ds.classes() || transition.classes() != ds.classes()) {
    throw InvalidArgument("classifier, transition and dataset disagree on K");
  }
  if (model.input_dim() != ds.dim()) throw InvalidArgument("classifier input width differs from feature dimension");
  const auto labeled = ds.labeled_indices();
  if (labeled.empty()) throw InvalidArgument("train_classifier: dataset has no labeled examples");

  const auto start = std::chrono::steady_clock::now();
  diff::Graph graph;
  const auto x = graph.input("x", diff::kDynamic, ds.dim());
  const auto t_ord = graph.input("ordinary", diff::kDynamic, ds.classes());
  const auto t_comp = graph.input("complementary", diff::kDynamic, ds.classes());
  const auto nodes = model.network().build(graph, x);
  const auto m = transition.build(graph);
  const auto loss = build_corrected_objective(graph, nodes.logits, m, t_ord, t_comp);

  auto params = model.network().parameters();
  if (auto* p = transition.parameter()) params.push_back(p);
  diff::Optimizer opt(config.optimizer, params);

  TrainReport report;
  report.seed = seed;
  std::vector<Eigen::Index> order = labeled;
  const auto batch_size = static_cast<std::size_t>(config.optimizer.batch_size);
  diff::Feed feed;
  for (int e = 0; e < config.epochs; ++e) {
    order = labeled;
    Rng rng(classifier_epoch_seed(seed, first_epoch + e));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      const std::vector<Eigen::Index> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                            order.begin() + static_cast<std::ptrdiff_t>(end));
      auto targets = make_targets(ds, batch);
      feed["x"] = gather_rows(ds.features(), batch);
      feed["ordinary"] = std::move(targets.ordinary);
      feed["complementary"] = std::move(targets.complementary);
      graph.forward(feed);
      const double value = graph.scalar(loss);
      if (!std::isfinite(value)) {
        throw DivergenceError("classifier loss became non-finite at epoch " + std::to_string(first_epoch + e) +
                              ", batch starting at " + std::to_string(begin));
      }
      opt.zero_grad();
      graph.backward(loss);
      opt.step();
      epoch_loss += value * static_cast<double>(batch.size());
    }
    EpochRecord rec;
    rec.epoch = first_epoch + e;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.test_accuracy = eval ? evaluate_accuracy(model, eval->features, eval->labels) : kNaN;
    rec.m_error = (eval && eval->reference && transition.is_trainable())
                      ? (transition.current().entries() - eval->reference->entries()).norm()
                      : kNaN;
    report.epochs.push_back(rec);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

DclResult train_dcl(const labels::ComplementaryDataset& ds, TransitionModel transition, const DclConfig& config,
                    std::uint64_t seed, const EvalSet* eval, std::vector<diff::Index> hidden) {
  ClassifierModel model(ClassifierModel::default_spec(ds.dim(), ds.classes(), std::move(hidden)));
  model.initialize(classifier_init_seed(seed));
  TrainReport report = train_classifier(model, transition, ds, config, seed, eval);
  return {std::move(model), std::move(transition), std::move(report)};
}

}  // namespace complearn::dcl
