#include "complearn/harness/experiment.hpp"

#include "complearn/error.hpp"
#include "complearn/harness/csv.hpp"
#include "complearn/harness/idx.hpp"
#include "complearn/harness/svg.hpp"
#include "complearn/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace complearn::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
    case Method::kDcl: return "dcl";
    case Method::kCcgan: return "ccgan";
    case Method::kSccgan: return "sccgan";
    case Method::kOrdinary: return "ordinary";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "dcl") return Method::kDcl;
  if (name == "ccgan") return Method::kCcgan;
  if (name == "sccgan") return Method::kSccgan;
  if (name == "ordinary") return Method::kOrdinary;
  throw InvalidArgument("unknown method '" + name + "' (expected dcl, ccgan, sccgan or ordinary)");
}

std::string to_string(TransitionMode m) {
  switch (m) {
    case TransitionMode::kUniform: return "uniform";
    case TransitionMode::kRestricted: return "restricted";
    case TransitionMode::kRandom: return "random";
    case TransitionMode::kTrainable: return "trainable";
  }
  return "?";
}

TransitionMode transition_mode_from_string(const std::string& name) {
  if (name == "uniform") return TransitionMode::kUniform;
  if (name == "restricted") return TransitionMode::kRestricted;
  if (name == "random") return TransitionMode::kRandom;
  if (name == "trainable") return TransitionMode::kTrainable;
  throw InvalidArgument("unknown transition mode '" + name + "'");
}

GaussianMixtureSpec DatasetConfig::mixture() const {
  if (kind != "ring") throw InvalidArgument("dataset kind '" + kind + "' has no mixture specification");
  return GaussianMixtureSpec::ring(classes, radius, sigma, dim);
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace {

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidArgument(where_ + " must be a JSON object");
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      unseen_.push_back(key);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen(key);
    return &j_.at(key);
  }

  void finish() const {
    if (!unseen_.empty()) throw InvalidArgument("unknown key '" + unseen_.front() + "' in " + where_);
  }

 private:
  void seen(const std::string& key) { unseen_.erase(std::remove(unseen_.begin(), unseen_.end(), key), unseen_.end()); }

  const json& j_;
  std::string where_;
  std::vector<std::string> unseen_;
};

json optimizer_json(const diff::OptimizerConfig& c) {
  return {{"kind", diff::to_string(c.kind)}, {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},  {"beta1", c.beta1},                 {"beta2", c.beta2},
          {"epsilon", c.epsilon},            {"batch_size", c.batch_size}};
}

void read_optimizer(const json& j, const std::string& where, diff::OptimizerConfig& c) {
  ObjectReader r(j, where);
  std::string kind = diff::to_string(c.kind);
  r.get("kind", kind);
  c.kind = diff::optimizer_kind_from_string(kind);
  r.get("learning_rate", c.learning_rate);
  r.get("momentum", c.momentum);
  r.get("weight_decay", c.weight_decay);
  r.get("beta1", c.beta1);
  r.get("beta2", c.beta2);
  r.get("epsilon", c.epsilon);
  r.get("batch_size", c.batch_size);
  r.finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.kind != "ring" && dataset.kind != "idx") throw InvalidArgument("dataset.kind must be ring or idx");
  if (dataset.kind == "ring") dataset.mixture().validate();
  if (dataset.kind == "idx" && (dataset.images.empty() || dataset.labels.empty())) {
    throw InvalidArgument("idx datasets need dataset.images and dataset.labels");
  }
  if (dataset.classes < 2) throw InvalidArgument("dataset.classes must be >= 2");
  if (dataset.n < dataset.classes) throw InvalidArgument("dataset.n must be >= K");
  if (dataset.test_n < 1) throw InvalidArgument("dataset.test_n must be >= 1");
  if (labeled_ratios.empty()) throw InvalidArgument("labeled_ratios must not be empty");
  for (double r : labeled_ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("labeled ratios must lie in (0, 1]");
  }
  if (!(complementary_ratio >= 0.0 && complementary_ratio <= 1.0)) {
    throw InvalidArgument("complementary_ratio must lie in [0, 1]");
  }
  if (labels_per_example < 1 || labels_per_example > dataset.classes - 1) {
    throw InvalidArgument("labels_per_example must lie in [1, K-1]");
  }
  if (transition == TransitionMode::kRestricted) {
    if (restricted_support < 1 || restricted_support > dataset.classes - 1) {
      throw InvalidArgument("restricted_support must lie in [1, K-1]");
    }
    if (labels_per_example > restricted_support) {
      throw InvalidArgument("labels_per_example exceeds the restricted row support");
    }
  }
  if (methods.empty()) throw InvalidArgument("methods must not be empty");
  if (seeds.empty()) throw InvalidArgument("at least one seed is required");
  if (prior != "estimated" && prior != "true") throw InvalidArgument("prior must be 'estimated' or 'true'");
  if (prior == "true" && dataset.kind != "ring") throw InvalidArgument("prior 'true' needs a ring dataset");
  if (samples_per_class < 0 || real_samples < 0) throw InvalidArgument("sample counts must be >= 0");
  if (network.noise_dim < 1) throw InvalidArgument("network.noise_dim must be >= 1");
  gan::ScheduleConfig s = schedule;
  s.validate();
  if (resolved_classifier_epochs() < 0) throw InvalidArgument("classifier_epochs must be >= 0");
}

int ExperimentConfig::resolved_classifier_epochs() const {
  return classifier_epochs >= 0 ? classifier_epochs : schedule.warmup_epochs + schedule.joint_epochs;
}

ExperimentConfig ExperimentConfig::parse(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), e.byte);
  }
  ExperimentConfig c;
  ObjectReader r(root, "config");
  if (const json* d = r.child("dataset")) {
    ObjectReader dr(*d, "dataset");
    dr.get("kind", c.dataset.kind);
    dr.get("classes", c.dataset.classes);
    dr.get("radius", c.dataset.radius);
    dr.get("sigma", c.dataset.sigma);
    dr.get("dim", c.dataset.dim);
    dr.get("n", c.dataset.n);
    dr.get("test_n", c.dataset.test_n);
    dr.get("images", c.dataset.images);
    dr.get("labels", c.dataset.labels);
    dr.finish();
  }
  r.get("labeled_ratios", c.labeled_ratios);
  r.get("complementary_ratio", c.complementary_ratio);
  r.get("labels_per_example", c.labels_per_example);
  if (const json* t = r.child("transition")) {
    ObjectReader tr(*t, "transition");
    std::string mode = to_string(c.transition);
    tr.get("mode", mode);
    c.transition = transition_mode_from_string(mode);
    tr.get("restricted_support", c.restricted_support);
    tr.finish();
  }
  if (const json* m = r.child("methods")) {
    std::vector<std::string> names;
    try {
      names = m->get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("config.methods: ") + e.what());
    }
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(method_from_string(n));
  }
  if (const json* s = r.child("schedule")) {
    ObjectReader sr(*s, "schedule");
    sr.get("warmup_epochs", c.schedule.warmup_epochs);
    sr.get("joint_epochs", c.schedule.joint_epochs);
    sr.get("d_steps", c.schedule.d_steps);
    if (const json* o = sr.child("warmup_optimizer")) read_optimizer(*o, "schedule.warmup_optimizer", c.schedule.warmup);
    if (const json* o = sr.child("joint_optimizer")) read_optimizer(*o, "schedule.joint_optimizer", c.schedule.joint);
    if (const json* w = sr.child("weights")) {
      ObjectReader wr(*w, "schedule.weights");
      wr.get("adversarial", c.schedule.weights.adversarial);
      wr.get("complementary", c.schedule.weights.complementary);
      wr.get("generated", c.schedule.weights.generated);
      wr.finish();
    }
    std::string phi = gan::to_string(c.schedule.loss.phi);
    sr.get("phi", phi);
    c.schedule.loss.phi = gan::phi_from_string(phi);
    sr.get("label_smoothing", c.schedule.loss.label_smoothing);
    sr.finish();
  }
  if (const json* n = r.child("network")) {
    ObjectReader nr(*n, "network");
    nr.get("noise_dim", c.network.noise_dim);
    nr.get("generator_hidden", c.network.generator_hidden);
    nr.get("discriminator_hidden", c.network.discriminator_hidden);
    nr.get("classifier_hidden", c.network.classifier_hidden);
    nr.finish();
  }
  r.get("classifier_epochs", c.classifier_epochs);
  r.get("prior", c.prior);
  r.get("seeds", c.seeds);
  r.get("output_dir", c.output_dir);
  r.get("samples_per_class", c.samples_per_class);
  r.get("real_samples", c.real_samples);
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string ExperimentConfig::dump(int indent) const {
  json j;
  j["dataset"] = {{"kind", dataset.kind},       {"classes", dataset.classes}, {"radius", dataset.radius},
                  {"sigma", dataset.sigma},     {"dim", dataset.dim},         {"n", dataset.n},
                  {"test_n", dataset.test_n},   {"images", dataset.images},   {"labels", dataset.labels}};
  j["labeled_ratios"] = labeled_ratios;
  j["complementary_ratio"] = complementary_ratio;
  j["labels_per_example"] = labels_per_example;
  j["transition"] = {{"mode", to_string(transition)}, {"restricted_support", restricted_support}};
  std::vector<std::string> names;
  for (Method m : methods) names.push_back(to_string(m));
  j["methods"] = names;
  j["schedule"] = {{"warmup_epochs", schedule.warmup_epochs},
                   {"joint_epochs", schedule.joint_epochs},
                   {"d_steps", schedule.d_steps},
                   {"warmup_optimizer", optimizer_json(schedule.warmup)},
                   {"joint_optimizer", optimizer_json(schedule.joint)},
                   {"weights",
                    {{"adversarial", schedule.weights.adversarial},
                     {"complementary", schedule.weights.complementary},
                     {"generated", schedule.weights.generated}}},
                   {"phi", gan::to_string(schedule.loss.phi)},
                   {"label_smoothing", schedule.loss.label_smoothing}};
  j["network"] = {{"noise_dim", network.noise_dim},
                  {"generator_hidden", network.generator_hidden},
                  {"discriminator_hidden", network.discriminator_hidden},
                  {"classifier_hidden", network.classifier_hidden}};
  j["classifier_epochs"] = resolved_classifier_epochs();
  j["prior"] = prior;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  j["samples_per_class"] = samples_per_class;
  j["real_samples"] = real_samples;
  return j.dump(indent);
}

// ---------------------------------------------------------------------------
// Data

namespace {

LabeledData take_rows(const LabeledData& all, const std::vector<std::size_t>& idx, std::size_t begin,
                      std::size_t count) {
  LabeledData out{Eigen::MatrixXd(static_cast<Eigen::Index>(count), all.features.cols()), {}};
  out.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = all.features.row(static_cast<Eigen::Index>(idx[begin + i]));
    out.labels.push_back(all.labels[idx[begin + i]]);
  }
  return out;
}

}  // namespace

SeedData make_seed_data(const ExperimentConfig& config, std::uint64_t seed) {
  const int k = config.dataset.classes;
  const std::uint64_t transition_seed = derive_seed(seed, "transition");
  labels::TransitionMatrix truth = labels::uniform_transition(k);
  switch (config.transition) {
    case TransitionMode::kUniform: break;
    case TransitionMode::kRestricted:
      truth = labels::restricted_uniform_transition(k, config.restricted_support, transition_seed);
      break;
    case TransitionMode::kRandom:
    case TransitionMode::kTrainable: truth = labels::random_transition(k, transition_seed); break;
  }

  if (config.dataset.kind == "ring") {
    const auto spec = config.dataset.mixture();
    return {gen_ring_mixture(spec, config.dataset.n, derive_seed(seed, "data")),
            gen_ring_mixture(spec, config.dataset.test_n, derive_seed(seed, "test")), std::move(truth)};
  }
  const LabeledData all = load_idx(config.dataset.images, config.dataset.labels);
  for (int y : all.labels) {
    if (y < 0 || y >= k) throw InvalidArgument("IDX label " + std::to_string(y) + " is outside [0, K)");
  }
  const auto need = static_cast<std::size_t>(config.dataset.n + config.dataset.test_n);
  if (all.labels.size() < need) {
    throw InvalidArgument("IDX data has " + std::to_string(all.labels.size()) + " examples, config needs " +
                          std::to_string(need));
  }
  std::vector<std::size_t> order(all.labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "data"));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<std::size_t>(config.dataset.n);
  return {take_rows(all, order, 0, n), take_rows(all, order, n, static_cast<std::size_t>(config.dataset.test_n)),
          std::move(truth)};
}

labels::ComplementaryDataset make_split(const ExperimentConfig& config, const SeedData& data, double labeled_ratio,
                                        std::uint64_t seed) {
  auto ds = labels::split_dataset(data.pool.features, data.pool.labels, config.dataset.classes, labeled_ratio,
                                  config.complementary_ratio, data.truth, config.labels_per_example,
                                  derive_seed(seed, "labels"));
  return ds;
}

// ---------------------------------------------------------------------------
// Grid

std::string cell_stem(Method method, double labeled_ratio, std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", labeled_ratio);
  return to_string(method) + "_rl" + buf + "_seed" + std::to_string(seed);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Cell {
  double labeled_ratio;
  std::uint64_t seed;
  Method method;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

CellResult run_cell(const ExperimentConfig& config, const Cell& cell, const fs::path& root) {
  CellResult result{cell.labeled_ratio, cell.seed, cell.method, false, kNaN, kNaN, {}, {}};
  const SeedData data = make_seed_data(config, cell.seed);
  const auto ds = make_split(config, data, cell.labeled_ratio, cell.seed);
  const dcl::EvalSet eval{data.test.features, data.test.labels, data.truth};
  const std::uint64_t train_seed = derive_seed(cell.seed, "train");
  const int k = config.dataset.classes;
  const bool trainable = config.transition == TransitionMode::kTrainable;
  dcl::TransitionModel transition = trainable ? dcl::TransitionModel::trainable(k) : dcl::TransitionModel(data.truth);
  const std::string stem = cell_stem(cell.method, cell.labeled_ratio, cell.seed);

  dcl::TrainReport report;
  if (cell.method == Method::kDcl || cell.method == Method::kOrdinary) {
    const dcl::DclConfig dcl_config{config.schedule.warmup, config.resolved_classifier_epochs()};
    if (cell.method == Method::kDcl) {
      report = dcl::train_dcl(ds, std::move(transition), dcl_config, train_seed, &eval,
                              config.network.classifier_hidden)
                   .report;
    } else {
      const auto& truth = ds.ground_truth(labels::EvaluationKey{});
      std::vector<labels::LabelEvidence> evidence(ds.evidence().size(), labels::Unlabeled{});
      for (auto i : ds.labeled_indices()) {
        evidence[static_cast<std::size_t>(i)] = labels::Ordinary{truth[static_cast<std::size_t>(i)]};
      }
      report = dcl::train_dcl(ds.with_evidence(std::move(evidence)), dcl::TransitionModel(data.truth), dcl_config,
                              train_seed, &eval, config.network.classifier_hidden)
                   .report;
    }
  } else {
    gan::ScheduleConfig schedule = config.schedule;
    if (config.prior == "true") schedule.prior_override = config.dataset.mixture().prior;
    auto bundle = gan::CcganBundle::make(ds.dim(), k, std::move(transition), config.network);
    gan::CcganResult trained = cell.method == Method::kCcgan
                                   ? gan::train_ccgan(ds, std::move(bundle), schedule, train_seed, &eval)
                                   : gan::train_sccgan(ds, std::move(bundle), schedule, train_seed, &eval);
    report = std::move(trained.report);
    const auto generated = gan::generate_samples(trained.bundle.generator, config.samples_per_class,
                                                 derive_seed(cell.seed, "samples"));
    const auto real_count = std::min<Eigen::Index>(config.real_samples, data.pool.features.rows());
    const std::vector<int> real_labels(data.pool.labels.begin(), data.pool.labels.begin() + real_count);
    const fs::path samples = root / "samples" / (stem + ".csv");
    write_samples_csv(samples.string(), data.pool.features.topRows(real_count), real_labels, generated.features,
                      generated.labels);
    if (ds.dim() == 2) {
      emit_scatter_svg(samples.string(), (root / "plots" / (stem + ".svg")).string(), k);
    } else {
      result.warnings.push_back("samples are not 2-D; skipped the scatter plot");
    }
  }
  std::ostringstream metrics;
  report.write_csv(metrics);
  write_text(root / "metrics" / (stem + ".csv"), metrics.str());
  result.ok = true;
  result.accuracy = report.final_accuracy();
  result.m_error = report.epochs.empty() ? kNaN : report.epochs.back().m_error;
  for (auto& w : report.warnings) result.warnings.push_back(std::move(w));
  return result;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

std::vector<SummaryRow> summarize(const ExperimentConfig& config, const std::vector<CellResult>& cells) {
  std::vector<SummaryRow> rows;
  for (double r : config.labeled_ratios) {
    for (Method m : config.methods) {
      SummaryRow row{r, m, kNaN, kNaN, 0, 0};
      std::vector<double> acc;
      for (const auto& c : cells) {
        if (c.labeled_ratio != r || c.method != m) continue;
        if (c.ok) {
          acc.push_back(c.accuracy);
        } else {
          ++row.failures;
        }
      }
      row.runs = static_cast<int>(acc.size());
      if (!acc.empty()) {
        double sum = 0.0;
        for (double a : acc) sum += a;
        row.mean = sum / static_cast<double>(acc.size());
        double ss = 0.0;
        for (double a : acc) ss += (a - row.mean) * (a - row.mean);
        row.std = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, int workers) {
  config.validate();
  if (workers < 1) throw InvalidArgument("worker count must be >= 1");
  const fs::path root(config.output_dir);
  for (const char* sub : {"metrics", "samples", "plots"}) fs::create_directories(root / sub);
  write_text(root / "config.resolved.json", config.dump() + "\n");

  std::vector<Cell> cells;
  for (double r : config.labeled_ratios) {
    for (auto seed : config.seeds) {
      for (Method m : config.methods) cells.push_back({r, seed, m});
    }
  }

  std::ofstream log(root / "run.log", std::ios::app);
  std::mutex log_mutex;
  auto log_line = [&](const std::string& line) {
    std::lock_guard<std::mutex> lock(log_mutex);
    log << timestamp() << ' ' << line << '\n';
    log.flush();
  };
  log_line("start: " + std::to_string(cells.size()) + " cells, " + std::to_string(workers) + " workers");

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      const std::string stem = cell_stem(cell.method, cell.labeled_ratio, cell.seed);
      const auto start = std::chrono::steady_clock::now();
      try {
        results[i] = run_cell(config, cell, root);
      } catch (const std::exception& e) {
        results[i] = CellResult{cell.labeled_ratio, cell.seed, cell.method, false, kNaN, kNaN, e.what(), {}};
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::ostringstream msg;
      msg << stem << (results[i].ok ? " ok accuracy=" + csv_number(results[i].accuracy) : " failed: " + results[i].message)
          << " (" << std::fixed << std::setprecision(1) << secs << " s)";
      log_line(msg.str());
      for (const auto& w : results[i].warnings) log_line(stem + " warning: " + w);
    }
  };
  const int threads = std::min<int>(workers, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream rows;
  rows << "r_l,seed,method,accuracy,m_error,status,message\n";
  for (const auto& c : results) {
    rows << csv_number(c.labeled_ratio) << ',' << c.seed << ',' << to_string(c.method) << ','
         << csv_number(c.accuracy) << ',' << csv_number(c.m_error) << ',' << (c.ok ? "ok" : "failed") << ','
         << csv_field(c.message) << '\n';
  }
  write_text(root / "results.csv", rows.str());

  auto summary = summarize(config, results);
  std::ostringstream sum;
  sum << "r_l,method,mean_accuracy,std_accuracy,runs,failures\n";
  for (const auto& s : summary) {
    sum << csv_number(s.labeled_ratio) << ',' << to_string(s.method) << ',' << csv_number(s.mean) << ','
        << csv_number(s.std) << ',' << s.runs << ',' << s.failures << '\n';
  }
  write_text(root / "summary.csv", sum.str());
  log_line("done");
  return {std::move(results), std::move(summary), root.string()};
}

}  // namespace complearn::harness
