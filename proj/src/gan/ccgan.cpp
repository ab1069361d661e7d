#include "complearn/gan/ccgan.hpp"

#include "complearn/dcl/risk.hpp"
#include "complearn/error.hpp"
#include "complearn/priors/qp.hpp"
#include "complearn/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace complearn::gan {

using dcl::classifier_epoch_seed;
using dcl::classifier_init_seed;
using dcl::gather_rows;

std::string to_string(Phi phi) { return phi == Phi::kLog ? "log" : "hinge"; }

Phi phi_from_string(const std::string& name) {
  if (name == "log") return Phi::kLog;
  if (name == "hinge") return Phi::kHinge;
  throw InvalidArgument("unknown phi '" + name + "' (expected log or hinge)");
}

void GanLossSpec::validate() const {
  if (!(label_smoothing >= 0.0 && label_smoothing <= 0.3)) {
    throw InvalidArgument("label smoothing must lie in [0, 0.3], got " + std::to_string(label_smoothing));
  }
}

GeneratorModel::GeneratorModel(int noise_dim, int classes, diff::Index data_dim, std::vector<diff::Index> hidden)
    : noise_dim_(noise_dim), classes_(classes) {
  if (noise_dim < 1) throw InvalidArgument("generator noise dimension must be >= 1");
  if (classes < 2) throw InvalidArgument("generator needs K >= 2");
  std::vector<diff::Index> widths{noise_dim + classes};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(data_dim);
  net_ = diff::Mlp("G", diff::MlpSpec::uniform(std::move(widths), diff::Activation::kRelu, diff::OutputHead::kLinear));
}

diff::NodeId GeneratorModel::build(diff::Graph& graph, diff::NodeId z, diff::NodeId y_onehot) {
  return net_.build(graph, graph.concat_cols(z, y_onehot)).output;
}

diff::Mlp make_discriminator(diff::Index data_dim, std::vector<diff::Index> hidden) {
  std::vector<diff::Index> widths{data_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return diff::Mlp("D", diff::MlpSpec::uniform(std::move(widths), diff::Activation::kLeakyRelu,
                                               diff::OutputHead::kLinear));
}

CcganBundle CcganBundle::make(diff::Index data_dim, int classes, dcl::TransitionModel transition,
                              const BundleSpec& spec) {
  CcganBundle b{GeneratorModel(spec.noise_dim, classes, data_dim, spec.generator_hidden),
                make_discriminator(data_dim, spec.discriminator_hidden),
                dcl::ClassifierModel(dcl::ClassifierModel::default_spec(data_dim, classes, spec.classifier_hidden)),
                std::move(transition), std::nullopt};
  b.validate();
  return b;
}

void CcganBundle::validate() const {
  const int k = classifier.classes();
  const diff::Index d = classifier.input_dim();
  if (generator.classes() != k) throw InvalidArgument("generator and classifier disagree on K");
  if (transition.classes() != k) throw InvalidArgument("transition and classifier disagree on K");
  if (generator.data_dim() != d) throw InvalidArgument("generator output width differs from data dimension");
  if (discriminator.spec().input_width() != d || discriminator.spec().output_width() != 1) {
    throw InvalidArgument("discriminator must map the data dimension to one score");
  }
  if (prior && prior->size() != k) throw InvalidArgument("prior length differs from K");
}

void ScheduleConfig::validate() const {
  if (warmup_epochs < 0) throw InvalidArgument("warm-up epochs must be >= 0");
  if (joint_epochs < 0) throw InvalidArgument("joint epochs must be >= 0");
  if (d_steps < 1) throw InvalidArgument("D steps per G step must be >= 1");
  warmup.validate();
  joint.validate();
  loss.validate();
  for (double w : {weights.adversarial, weights.complementary, weights.generated}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("loss weights must be finite and >= 0");
  }
}

std::vector<int> sample_labels(const SimplexVector& prior, std::size_t batch, std::uint64_t seed) {
  Rng rng(seed);
  const auto& p = prior.values();
  std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
  std::vector<int> out(batch);
  for (auto& y : out) y = dist(rng);
  return out;
}

Matrix one_hot_rows(const std::vector<int>& labels, int classes) {
  Matrix out = Matrix::Zero(static_cast<diff::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw InvalidArgument("label " + std::to_string(labels[i]) + " out of range for K=" + std::to_string(classes));
    }
    out(static_cast<diff::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

Matrix generator_forward(const GeneratorModel& g, const Matrix& z, const std::vector<int>& y) {
  if (z.cols() != g.noise_dim()) throw ShapeError("noise has " + std::to_string(z.cols()) + " columns, expected " +
                                                  std::to_string(g.noise_dim()));
  if (static_cast<std::size_t>(z.rows()) != y.size()) throw ShapeError("noise and label batches differ in length");
  Matrix input(z.rows(), z.cols() + g.classes());
  input << z, one_hot_rows(y, g.classes());
  return g.network().apply(input);
}

AdversarialNodes build_component_a(diff::Graph& graph, diff::NodeId real_scores, diff::NodeId fake_scores,
                                   const GanLossSpec& spec, const std::string& prefix) {
  if (spec.phi == Phi::kHinge) {
    const auto real_term = graph.mean(graph.relu(graph.affine(real_scores, -1.0, 1.0)));
    const auto fake_term = graph.mean(graph.relu(graph.affine(fake_scores, 1.0, 1.0)));
    return {graph.add(real_term, fake_term), graph.affine(graph.mean(fake_scores), -1.0)};
  }
  const auto t_real = graph.input(prefix + "target_real", diff::kDynamic, 1);
  const auto t_fake = graph.input(prefix + "target_fake", diff::kDynamic, 1);
  const auto d_loss = graph.add(graph.sigmoid_bce(real_scores, t_real), graph.sigmoid_bce(fake_scores, t_fake));
  // Non-saturating generator form: -mean log D(G(z)), i.e. fake rows scored against target 1.
  const auto g_loss = graph.sigmoid_bce(fake_scores, graph.affine(t_fake, 0.0, 1.0));
  return {d_loss, g_loss};
}

void feed_targets(diff::Feed& feed, diff::Index real_rows, diff::Index fake_rows, const GanLossSpec& spec,
                  const std::string& prefix) {
  if (spec.phi == Phi::kHinge) return;
  feed[prefix + "target_real"] = Matrix::Constant(real_rows, 1, 1.0 - spec.label_smoothing);
  feed[prefix + "target_fake"] = Matrix::Zero(fake_rows, 1);
}

diff::NodeId build_component_c(diff::Graph& graph, diff::NodeId classifier_logits, diff::NodeId y_onehot) {
  // softmax_cross_entropy sums; dividing the one-hot weights by n gives the batch mean.
  return graph.softmax_cross_entropy(classifier_logits, y_onehot);
}

AdversarialLoss loss_component_a(diff::Mlp& d, const Matrix& real, const Matrix& fake, const GanLossSpec& spec) {
  spec.validate();
  if (real.rows() == 0 || fake.rows() == 0) throw InvalidArgument("adversarial loss needs nonempty batches");
  diff::Graph graph;
  const auto xr = graph.input("real", diff::kDynamic, real.cols());
  const auto xf = graph.input("fake", diff::kDynamic, fake.cols());
  const auto nodes = build_component_a(graph, d.build(graph, xr).output, d.build(graph, xf).output, spec);
  diff::Feed feed{{"real", real}, {"fake", fake}};
  feed_targets(feed, real.rows(), fake.rows(), spec);
  graph.forward(feed);
  return {graph.scalar(nodes.d_loss), graph.scalar(nodes.g_loss)};
}

double loss_component_b(const dcl::ClassifierModel& c, const labels::TransitionMatrix& m, const Matrix& x,
                        const std::vector<int>& complementary) {
  if (x.rows() == 0) throw InvalidArgument("component b of an empty batch");
  if (static_cast<std::size_t>(x.rows()) != complementary.size()) {
    throw InvalidArgument("features and complementary labels differ in length");
  }
  const Matrix probs = c.probabilities(x);
  double total = 0.0;
  for (diff::Index i = 0; i < probs.rows(); ++i) {
    total += dcl::complementary_ce_loss(SimplexVector(probs.row(i).transpose()),
                                        complementary[static_cast<std::size_t>(i)], m);
  }
  return total / static_cast<double>(probs.rows());
}

double loss_component_c(dcl::ClassifierModel& c, GeneratorModel& g, const Matrix& z, const std::vector<int>& y) {
  if (z.rows() == 0) throw InvalidArgument("component c of an empty batch");
  if (static_cast<std::size_t>(z.rows()) != y.size()) throw ShapeError("noise and label batches differ in length");
  diff::Graph graph;
  const auto zn = graph.input("z", diff::kDynamic, g.noise_dim());
  const auto yn = graph.input("y", diff::kDynamic, g.classes());
  const auto fake = g.build(graph, zn, yn);
  const auto logits = c.network().build(graph, fake).logits;
  const auto loss = build_component_c(graph, logits, graph.affine(yn, 1.0 / static_cast<double>(z.rows())));
  graph.forward({{"z", z}, {"y", one_hot_rows(y, g.classes())}});
  return graph.scalar(loss);
}

SimplexVector estimate_class_prior(const labels::ComplementaryDataset& ds, const labels::TransitionMatrix& m) {
  if (!ds.complementary_indices().empty()) {
    return priors::estimate_prior_qp(priors::empirical_complementary_prior(ds), m).estimate;
  }
  const auto ordinary = ds.ordinary_indices();
  if (ordinary.empty()) throw InvalidArgument("cannot estimate the class prior without labeled examples");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(ds.classes());
  for (auto i : ordinary) counts(std::get<labels::Ordinary>(ds.evidence(i)).label) += 1.0;
  return SimplexVector(counts / counts.sum());
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix standard_normal(diff::Index rows, diff::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (diff::Index r = 0; r < rows; ++r) {
    for (diff::Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  }
  return out;
}

void check_finite(double value, const char* what, int epoch, std::size_t step) {
  if (!std::isfinite(value)) {
    throw DivergenceError(std::string(what) + " became non-finite in the joint stage at epoch " +
                          std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

void step_or_report(diff::Optimizer& opt, const char* what, int epoch, std::size_t step) {
  try {
    opt.step();
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(what) + " update at joint epoch " + std::to_string(epoch) + ", step " +
                          std::to_string(step) + ": " + e.what());
  }
}

CcganResult run(const labels::ComplementaryDataset& ds, CcganBundle bundle, const ScheduleConfig& schedule,
                std::uint64_t seed, const dcl::EvalSet* eval, std::vector<std::string> warnings) {
  schedule.validate();
  bundle.validate();
  if (bundle.classifier.classes() != ds.classes()) throw InvalidArgument("bundle and dataset disagree on K");
  if (bundle.classifier.input_dim() != ds.dim()) throw InvalidArgument("bundle and dataset disagree on dimension");
  const auto labeled = ds.labeled_indices();
  if (labeled.empty()) throw InvalidArgument("train_ccgan: dataset has no labeled examples");

  const auto start = std::chrono::steady_clock::now();
  if (schedule.initialize) {
    bundle.classifier.initialize(classifier_init_seed(seed));
    bundle.generator.initialize(derive_seed(seed, "generator-init"));
    bundle.discriminator.initialize(derive_seed(seed, "discriminator-init"));
  }

  auto& c_model = bundle.classifier;
  auto& transition = bundle.transition;
  dcl::TrainReport report =
      dcl::train_classifier(c_model, transition, ds, dcl::DclConfig{schedule.warmup, schedule.warmup_epochs}, seed,
                            eval, 0);
  report.warnings = std::move(warnings);

  SimplexVector prior = schedule.prior_override ? *schedule.prior_override
                                                : estimate_class_prior(ds, transition.current());
  if (prior.size() != ds.classes()) throw InvalidArgument("prior override length differs from K");
  bundle.prior = prior;

  std::vector<GanEpochRecord> gan_epochs;
  if (schedule.joint_epochs > 0) {
    const int k = ds.classes();
    const diff::Index d = ds.dim();
    const int noise = bundle.generator.noise_dim();
    auto& g_model = bundle.generator;
    auto& d_net = bundle.discriminator;
    const GanLossSpec& spec = schedule.loss;
    const LossWeights& w = schedule.weights;

    std::vector<Eigen::Index> real_pool = labeled;
    if (schedule.use_unlabeled) {
      const auto unlabeled = ds.unlabeled_indices();
      real_pool.insert(real_pool.end(), unlabeled.begin(), unlabeled.end());
    }

    // D step: scores on a real batch and on precomputed generator output.
    diff::Graph d_graph;
    const auto d_real = d_graph.input("real", diff::kDynamic, d);
    const auto d_fake = d_graph.input("fake", diff::kDynamic, d);
    const auto d_nodes =
        build_component_a(d_graph, d_net.build(d_graph, d_real).output, d_net.build(d_graph, d_fake).output, spec);

    // G step: adversarial generator part plus generated-sample CE through C.
    diff::Graph g_graph;
    const auto g_z = g_graph.input("z", diff::kDynamic, noise);
    const auto g_y = g_graph.input("y", diff::kDynamic, k);
    const auto g_real = g_graph.input("real", diff::kDynamic, d);
    const auto g_sample = g_model.build(g_graph, g_z, g_y);
    const auto g_adv = build_component_a(g_graph, d_net.build(g_graph, g_real).output,
                                         d_net.build(g_graph, g_sample).output, spec);
    const auto g_gen = build_component_c(g_graph, c_model.network().build(g_graph, g_sample).logits,
                                         g_graph.input("y_weights", diff::kDynamic, k));
    const auto g_loss = g_graph.add(g_graph.affine(g_adv.g_loss, w.adversarial),
                                    g_graph.affine(g_gen, w.generated));

    // C step: corrected loss on the labeled batch plus CE on fresh generator output.
    diff::Graph c_graph;
    const auto c_x = c_graph.input("x", diff::kDynamic, d);
    const auto c_ord = c_graph.input("ordinary", diff::kDynamic, k);
    const auto c_comp = c_graph.input("complementary", diff::kDynamic, k);
    const auto c_fake = c_graph.input("fake", diff::kDynamic, d);
    const auto c_yw = c_graph.input("y_weights", diff::kDynamic, k);
    const auto c_m = transition.build(c_graph);
    const auto c_b = dcl::build_corrected_objective(c_graph, c_model.network().build(c_graph, c_x).logits, c_m,
                                                    c_ord, c_comp);
    const auto c_c = build_component_c(c_graph, c_model.network().build(c_graph, c_fake).logits, c_yw);
    const auto c_loss = c_graph.add(c_graph.affine(c_b, w.complementary), c_graph.affine(c_c, w.generated));

    diff::Optimizer d_opt(schedule.joint, d_net.parameters());
    diff::Optimizer g_opt(schedule.joint, g_model.network().parameters());
    auto c_params = c_model.network().parameters();
    if (auto* p = transition.parameter()) c_params.push_back(p);
    diff::Optimizer c_opt(schedule.joint, c_params);
    std::vector<diff::Parameter*> all_params = d_net.parameters();
    for (auto* p : g_model.network().parameters()) all_params.push_back(p);
    for (auto* p : c_params) all_params.push_back(p);
    auto zero_all = [&] {
      for (auto* p : all_params) p->zero_grad();
    };

    const auto batch_size = static_cast<std::size_t>(schedule.joint.batch_size);
    std::vector<Eigen::Index> order;
    diff::Feed d_feed, g_feed, c_feed;
    for (int e = 0; e < schedule.joint_epochs; ++e) {
      const int epoch = schedule.warmup_epochs + e;
      Rng rng(derive_seed(seed, "joint-epoch", static_cast<std::uint64_t>(epoch)));
      order = labeled;
      std::shuffle(order.begin(), order.end(), rng);
      std::uniform_int_distribution<std::size_t> pick(0, real_pool.size() - 1);
      GanEpochRecord rec{epoch, 0.0, 0.0, 0.0};
      double c_total = 0.0;
      // An epoch is one pass over the real pool. With unlabeled data the pool is
      // larger than the labeled set, whose batches then cycle through reshuffles.
      const std::size_t epoch_steps = (real_pool.size() + batch_size - 1) / batch_size;
      std::size_t cursor = 0, rows = 0;
      for (std::size_t steps = 0; steps < epoch_steps; ++steps) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        const std::size_t end = std::min(order.size(), cursor + batch_size);
        const std::vector<Eigen::Index> batch(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                              order.begin() + static_cast<std::ptrdiff_t>(end));
        cursor = end;
        const auto b = static_cast<diff::Index>(batch.size());
        rows += batch.size();

        double d_value = 0.0;
        for (int s = 0; s < schedule.d_steps; ++s) {
          std::vector<Eigen::Index> real_rows(batch.size());
          for (auto& r : real_rows) r = real_pool[pick(rng)];
          const auto y = sample_labels(prior, batch.size(), rng());
          const Matrix z = standard_normal(b, noise, rng);
          d_feed["real"] = gather_rows(ds.features(), real_rows);
          d_feed["fake"] = generator_forward(g_model, z, y);
          feed_targets(d_feed, b, b, spec);
          d_graph.forward(d_feed);
          d_value = d_graph.scalar(d_nodes.d_loss);
          check_finite(d_value, "discriminator loss", epoch, steps);
          zero_all();
          d_graph.backward(d_nodes.d_loss);
          step_or_report(d_opt, "discriminator", epoch, steps);
        }

        const auto y = sample_labels(prior, batch.size(), rng());
        const Matrix z = standard_normal(b, noise, rng);
        const Matrix y_hot = one_hot_rows(y, k);
        const Matrix y_weights = y_hot / static_cast<double>(b);
        g_feed["z"] = z;
        g_feed["y"] = y_hot;
        g_feed["y_weights"] = y_weights;
        g_feed["real"] = gather_rows(ds.features(), batch);
        feed_targets(g_feed, b, b, spec);
        g_graph.forward(g_feed);
        const double g_value = g_graph.scalar(g_loss);
        check_finite(g_value, "generator loss", epoch, steps);
        zero_all();
        g_graph.backward(g_loss);
        step_or_report(g_opt, "generator", epoch, steps);

        auto targets = dcl::make_targets(ds, batch);
        c_feed["x"] = gather_rows(ds.features(), batch);
        c_feed["ordinary"] = std::move(targets.ordinary);
        c_feed["complementary"] = std::move(targets.complementary);
        c_feed["fake"] = generator_forward(g_model, z, y);
        c_feed["y_weights"] = y_weights;
        c_graph.forward(c_feed);
        const double c_value = c_graph.scalar(c_loss);
        check_finite(c_value, "classifier loss", epoch, steps);
        zero_all();
        c_graph.backward(c_loss);
        step_or_report(c_opt, "classifier", epoch, steps);

        rec.d_loss += d_value * static_cast<double>(b);
        rec.g_loss += g_value * static_cast<double>(b);
        c_total += c_value * static_cast<double>(b);
      }
      const auto n = static_cast<double>(rows);
      rec.d_loss /= n;
      rec.g_loss /= n;
      rec.c_loss = c_total / n;
      gan_epochs.push_back(rec);

      // Constructing the realization re-validates row sums and the zero diagonal.
      const std::optional<labels::TransitionMatrix> m_now =
          transition.is_trainable() ? std::optional(transition.current()) : std::nullopt;
      dcl::EpochRecord er;
      er.epoch = epoch;
      er.train_loss = rec.c_loss;
      er.test_accuracy = eval ? dcl::evaluate_accuracy(c_model, eval->features, eval->labels) : kNaN;
      er.m_error = (eval && eval->reference && m_now) ? m_recovery_error(*m_now, *eval->reference) : kNaN;
      report.epochs.push_back(er);
    }
  }
  report.seed = seed;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return CcganResult{std::move(bundle), std::move(report), std::move(gan_epochs), std::move(prior)};
}

}  // namespace

CcganResult train_ccgan(const labels::ComplementaryDataset& ds, CcganBundle bundle, const ScheduleConfig& schedule,
                        std::uint64_t seed, const dcl::EvalSet* eval) {
  ScheduleConfig plain = schedule;
  plain.use_unlabeled = false;
  return run(ds, std::move(bundle), plain, seed, eval, {});
}

CcganResult train_sccgan(const labels::ComplementaryDataset& ds, CcganBundle bundle, ScheduleConfig schedule,
                         std::uint64_t seed, const dcl::EvalSet* eval) {
  std::vector<std::string> warnings;
  if (ds.unlabeled_indices().empty()) {
    warnings.emplace_back("no unlabeled examples; training as plain CCGAN");
    schedule.use_unlabeled = false;
  } else {
    schedule.use_unlabeled = true;
  }
  return run(ds, std::move(bundle), schedule, seed, eval, std::move(warnings));
}

GeneratedSamples generate_samples(const GeneratorModel& g, int per_class, std::uint64_t seed) {
  if (per_class < 0) throw InvalidArgument("per-class sample count must be >= 0");
  Rng rng(seed);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(per_class) * static_cast<std::size_t>(g.classes()));
  for (int y = 0; y < g.classes(); ++y) labels.insert(labels.end(), static_cast<std::size_t>(per_class), y);
  const Matrix z = standard_normal(static_cast<diff::Index>(labels.size()), g.noise_dim(), rng);
  Matrix features = generator_forward(g, z, labels);
  return {std::move(features), std::move(labels)};
}

double m_recovery_error(const labels::TransitionMatrix& estimated, const labels::TransitionMatrix& truth) {
  if (estimated.classes() != truth.classes()) {
    throw InvalidArgument("transition matrices differ in size: " + std::to_string(estimated.classes()) + " vs " +
                          std::to_string(truth.classes()));
  }
  return (estimated.entries() - truth.entries()).norm();
}

}  // namespace complearn::gan
