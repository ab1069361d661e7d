#pragma once

#include "complearn/dcl/train.hpp"
#include "complearn/gan/ccgan.hpp"
#include "complearn/harness/mixture.hpp"
#include "complearn/labels/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace complearn::harness {

enum class Method { kDcl, kCcgan, kSccgan, kOrdinary };
enum class TransitionMode { kUniform, kRestricted, kRandom, kTrainable };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
std::string to_string(TransitionMode m);
TransitionMode transition_mode_from_string(const std::string& name);

struct DatasetConfig {
  std::string kind = "ring";  // ring | idx
  int classes = 8;
  double radius = 2.0;
  double sigma = 0.35;
  int dim = 2;
  long n = 6000;
  long test_n = 5000;
  std::string images;  // idx only
  std::string labels;  // idx only

  GaussianMixtureSpec mixture() const;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<double> labeled_ratios{1.0};
  double complementary_ratio = 1.0;
  int labels_per_example = 1;
  TransitionMode transition = TransitionMode::kUniform;
  // Nonzero entries per row for the restricted mode.
  int restricted_support = 0;
  std::vector<Method> methods{Method::kDcl};
  gan::ScheduleConfig schedule;
  gan::BundleSpec network;
  // Epochs for dcl/ordinary; negative means warm-up + joint epochs of the schedule.
  int classifier_epochs = -1;
  // "estimated" (QP from complementary labels) or "true" (mixture prior).
  std::string prior = "estimated";
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "out";
  int samples_per_class = 200;
  int real_samples = 1000;

  void validate() const;
  int resolved_classifier_epochs() const;

  // Missing keys take the defaults above; unknown keys are rejected.
  static ExperimentConfig parse(const std::string& json_text);
  static ExperimentConfig load(const std::string& path);
  // Every field, defaults included.
  std::string dump(int indent = 2) const;
};

struct CellResult {
  double labeled_ratio = 0.0;
  std::uint64_t seed = 0;
  Method method = Method::kDcl;
  bool ok = false;
  double accuracy = 0.0;
  double m_error = 0.0;  // NaN unless M is trainable
  std::string message;
  std::vector<std::string> warnings;
};

struct SummaryRow {
  double labeled_ratio = 0.0;
  Method method = Method::kDcl;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
  int runs = 0;
  int failures = 0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<SummaryRow> summary;
  std::string output_dir;
};

/// Everything one (seed) needs, generated from derived seeds only.
struct SeedData {
  LabeledData pool;
  LabeledData test;
  labels::TransitionMatrix truth;
};
SeedData make_seed_data(const ExperimentConfig& config, std::uint64_t seed);

labels::ComplementaryDataset make_split(const ExperimentConfig& config, const SeedData& data, double labeled_ratio,
                                        std::uint64_t seed);

// Mean and sample standard deviation per (r_l, method), in config order.
std::vector<SummaryRow> summarize(const ExperimentConfig& config, const std::vector<CellResult>& cells);

/// Runs every (r_l, seed, method) cell on up to `workers` threads and writes
/// config.resolved.json, results.csv, summary.csv, metrics/, samples/, plots/
/// and run.log under config.output_dir. A failing cell is recorded, not fatal.
ExperimentResult run_experiment(const ExperimentConfig& config, int workers = 1);

std::string cell_stem(Method method, double labeled_ratio, std::uint64_t seed);

}  // namespace complearn::harness
