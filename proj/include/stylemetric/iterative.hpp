#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stylemetric/metric.hpp"
#include "stylemetric/triplets.hpp"

namespace stylemetric {

/// Simulated annotator: answers with the two nearest candidates under the
/// hidden w_star, except with probability `noise` a uniform random pair.
struct AnnotatorOracle {
  WeightMatrix w_star;
  double noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic in (oracle seed, task id, responder id).
TaskResponse simulate_response(const SixChoiceTask& task, const AnnotatorOracle& oracle, const FeatureMap& features,
                               const std::string& responder_id = "sim");

/// Writes post k of each HIT as DIR/<hit>.post<k>.hit.json and waits for
/// DIR/<hit>.post<k>.responses.json.
struct ExportAnnotator {
  std::filesystem::path dir;
  std::chrono::milliseconds timeout{std::chrono::hours(24)};
  std::chrono::milliseconds poll{std::chrono::milliseconds(200)};
};

using Annotator = std::variant<AnnotatorOracle, ExportAnnotator>;

struct IterationState {
  WeightMatrix w_current;
  int iteration = 0;
  std::vector<double> accuracy_history;  // CV percent after each iteration
  std::vector<TripletRecord> triplet_pool;
  std::vector<int> hits_posted;    // per iteration, including re-posts
  std::vector<int> hits_rejected;  // per iteration
};

struct IterationConfig {
  TypePair pair;
  int hits_per_iter = 10;
  std::uint64_t seed = 0;
  TrainConfig train;
  int folds = 5;
  int max_posts_per_hit = 50;
  const ControlPool* controls = nullptr;  // HITs carry no controls when null
};

/// One pass: post HITs under w_current, keep re-posting rejected ones, expand
/// the accepted regular tasks, retrain on the whole pool and score it by CV.
IterationState run_iteration(const IterationState& state, const FeatureMap& features, const Annotator& annotator,
                             const IterationConfig& config);

struct LoopConfig {
  IterationConfig iteration;
  MetricInit init = MetricInit::identity;
  std::uint64_t init_seed = 0;
  int max_iters = 10;
  double min_improvement = 2.0;  // percentage points
};

struct LoopResult {
  WeightMatrix w;
  IterationState state;
  bool converged = false;  // stopped by the improvement rule rather than the cap
};

/// Starting metric of the loop over the given features.
WeightMatrix initial_metric(const FeatureMap& features, MetricInit init, std::uint64_t seed);

LoopResult run_until_converged(const FeatureMap& features, const Annotator& annotator, const LoopConfig& config);

/// Whether the improvement rule stops after the last entry of `history`.
bool should_stop(const std::vector<double>& history, double min_improvement = 2.0);

// ------------------------------------------------------------ experiments

struct ExperimentConfig {
  int folds = 5;
  std::uint64_t seed = 0;
  TrainConfig train;
};

struct ClusterReport {
  std::vector<std::string> types;
  std::vector<std::string> clusters;
  std::map<TypePair, double> type_accuracy;     // (X, Y) -> CV percent
  std::map<TypePair, double> cluster_accuracy;  // (cluster, cluster) -> CV percent
  std::map<TypePair, std::size_t> cluster_triplets;
};

/// Per-pair CV accuracy, and per cluster pair the CV accuracy of the union of
/// its member pairs' triplets. A required pair without triplets is an error.
ClusterReport cluster_experiment(const std::vector<TypePair>& type_pairs,
                                 const std::map<std::string, std::vector<std::string>>& clusters,
                                 const std::map<TypePair, std::vector<TripletRecord>>& triplet_sets,
                                 const FeatureMap& features, const ExperimentConfig& config = {});

struct SubsampleReport {
  double full_accuracy = 0;
  double subsample_accuracy = 0;
  std::size_t full_count = 0;
  std::size_t subsample_count = 0;
};

/// Seeded subsample without replacement; retained triplets keep their order.
std::vector<TripletRecord> subsample_triplets(const std::vector<TripletRecord>& triplets, double fraction,
                                              std::uint64_t seed);

SubsampleReport subsample_experiment(const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                                     double fraction = 0.5, const ExperimentConfig& config = {});

struct WeightPlotRow {
  int dim;
  std::string block;
  std::string group;
  double log_weight;  // log10(w + 1e-12)
};

inline constexpr double kWeightPlotDelta = 1e-12;

/// One row per feature dimension of a diagonal 2728-dim metric.
std::vector<WeightPlotRow> export_weight_plot_data(const WeightMatrix& w);

struct GroupSummary {
  std::string group;
  int first_dim;
  int dims;
  double mean_log_weight;
};

/// The 18 plot groups (13 geometric, 5 appearance) with their mean log-weight.
std::vector<GroupSummary> summarize_weight_plot(const std::vector<WeightPlotRow>& rows);

std::string format_cluster_report(const ClusterReport& r);
std::string format_subsample_report(const SubsampleReport& r);
std::string format_weight_plot(const std::vector<WeightPlotRow>& rows);
nlohmann::ordered_json to_json(const IterationState& s);

}  // namespace stylemetric
