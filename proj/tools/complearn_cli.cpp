#include "complearn/dcl/train.hpp"
#include "complearn/diff/checkpoint.hpp"
#include "complearn/divergence/divergence.hpp"
#include "complearn/error.hpp"
#include "complearn/gan/ccgan.hpp"
#include "complearn/harness/csv.hpp"
#include "complearn/harness/experiment.hpp"
#include "complearn/harness/svg.hpp"
#include "complearn/labels/dataset_io.hpp"
#include "complearn/priors/qp.hpp"
#include "complearn/random.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace complearn;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string method;
};

harness::ExperimentConfig load_config(const CommonFlags& f) {
  harness::ExperimentConfig c = f.config.empty() ? harness::ExperimentConfig{} : harness::ExperimentConfig::load(f.config);
  if (f.seed) c.seeds = {*f.seed};
  if (!f.out.empty()) c.output_dir = f.out;
  c.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file(out, text);
  }
}

labels::ComplementaryDataset ordinary_test_set(const harness::LabeledData& test, int k) {
  std::vector<labels::LabelEvidence> ev;
  ev.reserve(test.labels.size());
  for (int y : test.labels) ev.emplace_back(labels::Ordinary{y});
  return labels::ComplementaryDataset(test.features, std::move(ev), test.labels, k, 1.0, 0.0, 0);
}

int gen_data(const CommonFlags& f) {
  const auto c = load_config(f);
  const std::uint64_t seed = c.seeds.front();
  const auto data = harness::make_seed_data(c, seed);
  auto ds = harness::make_split(c, data, c.labeled_ratios.front(), seed);
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  labels::save_dataset(dir / "train.cldata", ds);
  labels::save_dataset(dir / "test.cldata", ordinary_test_set(data.test, c.dataset.classes));
  std::cout << "wrote " << (dir / "train.cldata").string() << " (" << ds.size() << " examples, "
            << ds.labeled_indices().size() << " labeled) and " << (dir / "test.cldata").string() << '\n';
  return 0;
}

std::optional<dcl::EvalSet> load_eval(const std::string& test_path, const labels::ComplementaryDataset& train) {
  if (test_path.empty()) return std::nullopt;
  const auto test = labels::load_dataset(test_path);
  return dcl::EvalSet{test.features(), test.ground_truth(labels::EvaluationKey{}), train.transition()};
}

dcl::TransitionModel transition_for(const labels::ComplementaryDataset& ds, bool trainable) {
  if (trainable) return dcl::TransitionModel::trainable(ds.classes());
  return dcl::TransitionModel(ds.transition() ? *ds.transition() : labels::uniform_transition(ds.classes()));
}

// Train on a saved dataset instead of a generated grid cell.
int train_from_file(const CommonFlags& f, harness::Method method, const std::string& data_path,
                    const std::string& test_path, bool trainable) {
  const auto c = load_config(f);
  const auto ds = labels::load_dataset(data_path);
  const auto eval = load_eval(test_path, ds);
  const dcl::EvalSet* eval_ptr = eval ? &*eval : nullptr;
  const std::uint64_t seed = derive_seed(c.seeds.front(), "train");
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  dcl::TrainReport report;
  std::vector<const diff::Parameter*> params;
  std::optional<dcl::DclResult> dcl_result;
  std::optional<gan::CcganResult> gan_result;
  if (method == harness::Method::kDcl) {
    dcl_result.emplace(dcl::train_dcl(ds, transition_for(ds, trainable),
                                      dcl::DclConfig{c.schedule.warmup, c.resolved_classifier_epochs()}, seed,
                                      eval_ptr, c.network.classifier_hidden));
    report = dcl_result->report;
    params = std::as_const(dcl_result->model.network()).parameters();
    if (trainable) params.push_back(&dcl_result->transition.logits());
  } else {
    auto bundle = gan::CcganBundle::make(ds.dim(), ds.classes(), transition_for(ds, trainable), c.network);
    gan_result.emplace(method == harness::Method::kCcgan ? gan::train_ccgan(ds, std::move(bundle), c.schedule, seed, eval_ptr)
                                                         : gan::train_sccgan(ds, std::move(bundle), c.schedule, seed, eval_ptr));
    report = gan_result->report;
    const auto& b = gan_result->bundle;
    for (const auto* p : b.classifier.network().parameters()) params.push_back(p);
    for (const auto* p : b.generator.network().parameters()) params.push_back(p);
    for (const auto* p : b.discriminator.parameters()) params.push_back(p);
    if (trainable) params.push_back(&b.transition.logits());
    const auto samples = gan::generate_samples(b.generator, c.samples_per_class, derive_seed(seed, "samples"));
    const fs::path csv = dir / "samples.csv";
    const auto real = std::min<Eigen::Index>(c.real_samples, ds.size());
    const auto& truth = ds.ground_truth(labels::EvaluationKey{});
    harness::write_samples_csv(csv.string(), ds.features().topRows(real),
                               std::vector<int>(truth.begin(), truth.begin() + real), samples.features,
                               samples.labels);
    if (ds.dim() == 2) harness::emit_scatter_svg(csv.string(), (dir / "samples.svg").string(), ds.classes());
  }
  std::ostringstream metrics;
  report.write_csv(metrics);
  write_file(dir / "metrics.csv", metrics.str());
  diff::save_checkpoint(dir / "model.ckpt", params);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << harness::to_string(method) << " final test accuracy " << harness::csv_number(report.final_accuracy())
            << '\n';
  return 0;
}

int train_cell(const CommonFlags& f, harness::Method method) {
  auto c = load_config(f);
  c.methods = {method};
  c.labeled_ratios = {c.labeled_ratios.front()};
  const auto result = harness::run_experiment(c, f.workers);
  int status = 0;
  for (const auto& cell : result.cells) {
    if (cell.ok) {
      std::cout << harness::cell_stem(cell.method, cell.labeled_ratio, cell.seed) << " accuracy "
                << harness::csv_number(cell.accuracy) << '\n';
    } else {
      std::cerr << "error: " << cell.message << '\n';
      status = 1;
    }
  }
  return status;
}

int run_grid(const CommonFlags& f) {
  auto c = load_config(f);
  if (!f.method.empty()) c.methods = {harness::method_from_string(f.method)};
  const auto result = harness::run_experiment(c, f.workers);
  int failures = 0;
  for (const auto& cell : result.cells) failures += cell.ok ? 0 : 1;
  std::cout << "ran " << result.cells.size() << " cells into " << result.output_dir << " (" << failures
            << " failed)\n";
  std::cout << std::ifstream(fs::path(result.output_dir) / "summary.csv").rdbuf();
  return failures == 0 ? 0 : 1;
}

int estimate_prior(const CommonFlags& f, const std::string& data_path) {
  labels::ComplementaryDataset ds = [&] {
    if (!data_path.empty()) return labels::load_dataset(data_path);
    const auto c = load_config(f);
    const auto data = harness::make_seed_data(c, c.seeds.front());
    return harness::make_split(c, data, c.labeled_ratios.front(), c.seeds.front());
  }();
  const auto m = ds.transition() ? *ds.transition() : labels::uniform_transition(ds.classes());
  const auto comp = priors::empirical_complementary_prior(ds);
  const auto sol = priors::estimate_prior_qp(comp, m);
  json j{{"estimate", std::vector<double>(sol.estimate.values().begin(), sol.estimate.values().end())},
         {"complementary_prior", std::vector<double>(comp.values().begin(), comp.values().end())},
         {"residual", sol.residual},
         {"iterations", sol.iterations},
         {"converged", sol.converged},
         {"rank_deficient", sol.rank_deficient}};
  emit(f.out, j.dump(2) + "\n");
  return 0;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* name) {
  if (!j.contains(name)) throw InvalidArgument(std::string("bound instance is missing '") + name + "'");
  const auto rows = j.at(name).get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw InvalidArgument(std::string(name) + " is empty");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw InvalidArgument(std::string(name) + " is ragged");
    for (std::size_t k = 0; k < rows[i].size(); ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return out;
}

int verify_bound(const CommonFlags& f, int count, int max_support, int max_classes) {
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw Error("cannot open " + f.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("bound instance is not valid JSON: ") + e.what(), e.byte);
    }
    const auto report = divergence::verify_theorem1_chain(
        divergence::DiscreteJoint(matrix_from_json(j, "p_xy")), divergence::DiscreteJoint(matrix_from_json(j, "q_xy")),
        matrix_from_json(j, "q_prime"), labels::TransitionMatrix(matrix_from_json(j, "m")));
    emit(f.out, report.to_json() + "\n");
    return report.all_hold() ? 0 : 2;
  }
  if (count < 1) throw InvalidArgument("--count must be >= 1");
  const std::uint64_t seed = f.seed.value_or(0);
  int failures = 0;
  double worst = std::numeric_limits<double>::infinity();
  json failed = json::array();
  for (int i = 0; i < count; ++i) {
    const auto inst = divergence::random_bound_instance(max_support, max_classes,
                                                        derive_seed(seed, "bound", static_cast<std::uint64_t>(i)));
    const auto report = divergence::verify_theorem1_chain(inst.p_xy, inst.q_xy, inst.q_prime, inst.m);
    worst = std::min(worst, report.min_slack());
    if (!report.all_hold()) {
      ++failures;
      failed.push_back(json::parse(report.to_json(-1)));
    }
  }
  json j{{"instances", count}, {"failures", failures}, {"min_slack", worst}, {"failed_reports", failed}};
  emit(f.out, j.dump(2) + "\n");
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complearn: learning from complementary labels"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON configuration file");
    sub->add_option("--out", flags.out, "Output directory or file");
    sub->add_option("--seed", flags.seed, "Master seed (overrides the config's seed list)");
    sub->add_option("--workers", flags.workers, "Parallel worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--method", flags.method, "Restrict to one method: dcl, ccgan, sccgan, ordinary");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a labeled split and test set from a config");
  add_common(gen);

  std::string data_path, test_path;
  bool trainable = false;
  auto* dcl_cmd = app.add_subcommand("train-dcl", "Train the discriminative baseline");
  auto* ccgan_cmd = app.add_subcommand("train-ccgan", "Train the complementary conditional GAN");
  auto* sccgan_cmd = app.add_subcommand("train-sccgan", "Train the semi-supervised variant");
  for (auto* sub : {dcl_cmd, ccgan_cmd, sccgan_cmd}) {
    add_common(sub);
    sub->add_option("--data", data_path, "Dataset file from gen-data (default: generate from the config)");
    sub->add_option("--test", test_path, "Test dataset file for per-epoch accuracy");
    sub->add_flag("--trainable-m", trainable, "Learn the transition matrix (with --data)");
  }

  auto* prior_cmd = app.add_subcommand("estimate-prior", "Estimate the class prior from complementary labels");
  add_common(prior_cmd);
  prior_cmd->add_option("--data", data_path, "Dataset file from gen-data");

  int count = 1000, max_support = 6, max_classes = 4;
  auto* bound_cmd = app.add_subcommand("verify-bound", "Check the divergence bound chain numerically");
  add_common(bound_cmd);
  bound_cmd->add_option("--count", count, "Random instances to check when no --config instance is given");
  bound_cmd->add_option("--max-support", max_support, "Largest |X| for random instances");
  bound_cmd->add_option("--max-classes", max_classes, "Largest K for random instances");

  auto* grid_cmd = app.add_subcommand("run-grid", "Run every (r_l, seed, method) cell of a config");
  add_common(grid_cmd);

  std::string samples_path;
  int plot_classes = 0;
  auto* plot_cmd = app.add_subcommand("plot", "Render a samples CSV as an SVG scatter plot");
  add_common(plot_cmd);
  plot_cmd->add_option("samples", samples_path, "Samples CSV (kind,x,y,label)")->required();
  plot_cmd->add_option("--classes", plot_classes, "Legend entries (default: inferred)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto method_for = [&](harness::Method fallback) {
      return flags.method.empty() ? fallback : harness::method_from_string(flags.method);
    };
    if (gen->parsed()) return gen_data(flags);
    for (auto [sub, m] : {std::pair{dcl_cmd, harness::Method::kDcl}, std::pair{ccgan_cmd, harness::Method::kCcgan},
                          std::pair{sccgan_cmd, harness::Method::kSccgan}}) {
      if (!sub->parsed()) continue;
      const auto method = method_for(m);
      return data_path.empty() ? train_cell(flags, method) : train_from_file(flags, method, data_path, test_path, trainable);
    }
    if (prior_cmd->parsed()) return estimate_prior(flags, data_path);
    if (bound_cmd->parsed()) return verify_bound(flags, count, max_support, max_classes);
    if (grid_cmd->parsed()) return run_grid(flags);
    if (plot_cmd->parsed()) {
      const std::string out = flags.out.empty() ? fs::path(samples_path).replace_extension(".svg").string() : flags.out;
      harness::emit_scatter_svg(samples_path, out, plot_classes);
      std::cout << "wrote " << out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
