#include "stylemetric/iterative.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "stylemetric/error.hpp"
#include "stylemetric/feature_layout.hpp"
#include "stylemetric/log.hpp"
#include "stylemetric/rng.hpp"

namespace stylemetric {

void AnnotatorOracle::validate() const {
  if (!(noise >= 0.0 && noise <= 1.0)) throw InvalidArgument("oracle noise must lie in [0, 1]");
  w_star.validate();
}

TaskResponse simulate_response(const SixChoiceTask& task, const AnnotatorOracle& oracle, const FeatureMap& features,
                               const std::string& responder_id) {
  validate(task);
  Rng rng(mix_seed(mix_seed(oracle.seed, hash_string(task.task_id)), hash_string(responder_id)));
  TaskResponse r;
  r.task_id = task.task_id;
  r.responder_id = responder_id;
  if (rng.uniform() < oracle.noise) {
    // uniform over the 15 unordered pairs
    auto k = static_cast<int>(rng.below(15));
    for (int i = 0; i < kCandidatesPerTask; ++i)
      for (int j = i + 1; j < kCandidatesPerTask; ++j)
        if (k-- == 0) r.selected = {task.candidates[static_cast<std::size_t>(i)], task.candidates[static_cast<std::size_t>(j)]};
  } else {
    r.selected = nearest_two(task, oracle.w_star, features);
  }
  return r;
}

namespace {

std::vector<TaskResponse> collect_responses(const HitBundle& bundle, const Annotator& annotator,
                                            const FeatureMap& features, const std::string& responder, int post) {
  if (const auto* oracle = std::get_if<AnnotatorOracle>(&annotator)) {
    std::vector<TaskResponse> out;
    out.reserve(bundle.tasks.size());
    for (const auto& t : bundle.tasks) out.push_back(simulate_response(t, *oracle, features, responder));
    return out;
  }
  const auto& ex = std::get<ExportAnnotator>(annotator);
  const std::string stem = bundle.hit_id + ".post" + std::to_string(post);
  const auto hit_path = ex.dir / (stem + ".hit.json");
  const auto response_path = ex.dir / (stem + ".responses.json");
  write_hit_bundle(hit_path, bundle);
  log_info("waiting for " + response_path.string());
  const auto deadline = std::chrono::steady_clock::now() + ex.timeout;
  while (!std::filesystem::exists(response_path)) {
    if (std::chrono::steady_clock::now() >= deadline)
      throw Timeout("no responses for " + stem + " within the export timeout");
    std::this_thread::sleep_for(ex.poll);
  }
  return read_responses(response_path, bundle.hit_id);
}

std::string hit_name(const TypePair& pair, int iteration, int h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-i%02d-h%02d", iteration, h);
  return "hit-" + pair.first + "-" + pair.second + buf;
}

}  // namespace

IterationState run_iteration(const IterationState& state, const FeatureMap& features, const Annotator& annotator,
                             const IterationConfig& cfg) {
  if (const auto* o = std::get_if<AnnotatorOracle>(&annotator)) o->validate();
  const bool simulated = std::holds_alternative<AnnotatorOracle>(annotator);
  const TripletSource source = simulated ? TripletSource::simulated : TripletSource::crowd;

  IterationState next = state;
  int posted = 0, rejected = 0;
  for (int h = 0; h < cfg.hits_per_iter; ++h) {
    HitOptions opts;
    opts.hit_id = hit_name(cfg.pair, state.iteration, h);
    const HitBundle bundle = generate_hit_tasks(cfg.pair, state.w_current, features,
                                                mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(state.iteration)),
                                                         static_cast<std::uint64_t>(h)),
                                                cfg.controls, opts);
    bool accepted = false;
    for (int post = 0; post < cfg.max_posts_per_hit && !accepted; ++post) {
      ++posted;
      const std::string responder = opts.hit_id + "/worker" + std::to_string(post);
      const auto responses = collect_responses(bundle, annotator, features, responder, post);
      if (!filter_by_controls(bundle, responses).accepted) {
        ++rejected;
        continue;
      }
      std::map<std::string, const TaskResponse*> by_task;
      for (const auto& r : responses) by_task[r.task_id] = &r;
      for (const auto& t : bundle.tasks) {
        if (t.is_control) continue;
        auto it = by_task.find(t.task_id);
        if (it == by_task.end()) throw InvalidArgument("no response for task " + t.task_id);
        const auto triplets = expand_six_choice(t, *it->second, source);
        next.triplet_pool.insert(next.triplet_pool.end(), triplets.begin(), triplets.end());
      }
      accepted = true;
    }
    if (!accepted)
      throw Error("HIT " + opts.hit_id + " was rejected " + std::to_string(cfg.max_posts_per_hit) + " times");
  }

  TrainConfig tc = cfg.train;
  tc.triplet_set = "pool:" + to_string(cfg.pair) + ":iteration" + std::to_string(state.iteration + 1);
  next.w_current = train(next.triplet_pool, features, tc);
  next.accuracy_history.push_back(cv_accuracy(next.triplet_pool, features, cfg.folds, cfg.seed, tc));
  next.hits_posted.push_back(posted);
  next.hits_rejected.push_back(rejected);
  next.iteration = state.iteration + 1;
  return next;
}

WeightMatrix initial_metric(const FeatureMap& features, MetricInit init, std::uint64_t seed) {
  if (features.empty()) throw InvalidArgument("no features");
  const auto& first = features.begin()->second;
  WeightMatrix w = WeightMatrix::identity(static_cast<int>(first.values.size()), first.config_hash);
  if (init == MetricInit::random) {
    Rng rng(mix_seed(seed, hash_string("metric-init")));
    for (Eigen::Index i = 0; i < w.diag.size(); ++i) w.diag(i) = 2.0 * rng.uniform();
    w.provenance = {{"init", "random"}, {"seed", seed}};
  }
  return w;
}

bool should_stop(const std::vector<double>& history, double min_improvement) {
  const auto n = history.size();
  return n >= 2 && history[n - 1] - history[n - 2] < min_improvement;
}

LoopResult run_until_converged(const FeatureMap& features, const Annotator& annotator, const LoopConfig& cfg) {
  if (cfg.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  LoopResult r;
  r.state.w_current = initial_metric(features, cfg.init, cfg.init_seed);
  for (int i = 0; i < cfg.max_iters; ++i) {
    r.state = run_iteration(r.state, features, annotator, cfg.iteration);
    log_info("iteration " + std::to_string(r.state.iteration) + ": " + std::to_string(r.state.triplet_pool.size()) +
             " triplets, CV accuracy " + std::to_string(r.state.accuracy_history.back()));
    if (should_stop(r.state.accuracy_history, cfg.min_improvement)) {
      r.converged = true;
      break;
    }
  }
  r.w = r.state.w_current;
  return r;
}

// ------------------------------------------------------------ experiments

ClusterReport cluster_experiment(const std::vector<TypePair>& type_pairs,
                                 const std::map<std::string, std::vector<std::string>>& clusters,
                                 const std::map<TypePair, std::vector<TripletRecord>>& triplet_sets,
                                 const FeatureMap& features, const ExperimentConfig& cfg) {
  ClusterReport r;
  std::set<std::string> types;
  std::set<TypePair> required(type_pairs.begin(), type_pairs.end());
  for (const auto& p : required) {
    types.insert(p.first);
    types.insert(p.second);
    auto it = triplet_sets.find(p);
    if (it == triplet_sets.end() || it->second.empty())
      throw InvalidArgument("missing triplet set for pair " + to_string(p));
    r.type_accuracy[p] = cv_accuracy(it->second, features, cfg.folds, cfg.seed, cfg.train);
  }
  r.types.assign(types.begin(), types.end());
  for (const auto& [name, members] : clusters) r.clusters.push_back(name);

  for (const auto& [c1, m1] : clusters)
    for (const auto& [c2, m2] : clusters) {
      const std::set<std::string> s1(m1.begin(), m1.end()), s2(m2.begin(), m2.end());
      std::vector<TripletRecord> combined;
      for (const auto& p : required)
        if (s1.count(p.first) && s2.count(p.second)) {
          const auto& set = triplet_sets.at(p);
          combined.insert(combined.end(), set.begin(), set.end());
        }
      if (combined.size() < static_cast<std::size_t>(cfg.folds)) continue;
      r.cluster_accuracy[{c1, c2}] = cv_accuracy(combined, features, cfg.folds, cfg.seed, cfg.train);
      r.cluster_triplets[{c1, c2}] = combined.size();
    }
  return r;
}

std::vector<TripletRecord> subsample_triplets(const std::vector<TripletRecord>& triplets, double fraction,
                                              std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("subsample fraction must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(triplets.size())));
  Rng rng(mix_seed(seed, hash_string("subsample")));
  auto idx = rng.sample_without_replacement(triplets.size(), k);
  std::sort(idx.begin(), idx.end());
  std::vector<TripletRecord> out;
  out.reserve(k);
  for (auto i : idx) out.push_back(triplets[i]);
  return out;
}

SubsampleReport subsample_experiment(const std::vector<TripletRecord>& triplets, const FeatureMap& features,
                                     double fraction, const ExperimentConfig& cfg) {
  if (triplets.size() < 20) throw InvalidArgument("subsample experiment needs at least 20 triplets");
  SubsampleReport r;
  const auto sub = subsample_triplets(triplets, fraction, cfg.seed);
  r.full_count = triplets.size();
  r.subsample_count = sub.size();
  r.full_accuracy = cv_accuracy(triplets, features, cfg.folds, cfg.seed, cfg.train);
  r.subsample_accuracy = cv_accuracy(sub, features, cfg.folds, cfg.seed, cfg.train);
  return r;
}

std::vector<WeightPlotRow> export_weight_plot_data(const WeightMatrix& w) {
  if (w.shape != MetricShape::diagonal) throw InvalidArgument("weight plots need a diagonal metric");
  if (w.dim() != kFeatureDims)
    throw InvalidArgument("weight plots need a " + std::to_string(kFeatureDims) + "-dim metric, got " +
                          std::to_string(w.dim()));
  std::vector<WeightPlotRow> rows;
  rows.reserve(kFeatureDims);
  for (std::size_t b = 0; b < kFeatureBlocks.size(); ++b) {
    const int off = block_offset(b);
    for (int i = 0; i < kFeatureBlocks[b].size; ++i)
      rows.push_back({off + i, std::string(kFeatureBlocks[b].name), std::string(kFeatureBlocks[b].group),
                      std::log10(w.diag(off + i) + kWeightPlotDelta)});
  }
  return rows;
}

std::vector<GroupSummary> summarize_weight_plot(const std::vector<WeightPlotRow>& rows) {
  std::vector<GroupSummary> out;
  for (const auto& r : rows) {
    if (out.empty() || out.back().group != r.group) out.push_back({r.group, r.dim, 0, 0.0});
    auto& g = out.back();
    g.mean_log_weight += r.log_weight;
    ++g.dims;
  }
  for (auto& g : out) g.mean_log_weight /= g.dims;
  return out;
}

namespace {

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string matrix_table(const std::string& title, const std::vector<std::string>& rows,
                         const std::map<TypePair, double>& cells) {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.size() + 2);
  std::ostringstream os;
  os << title << "\n" << std::left << std::setw(static_cast<int>(width)) << "X \\ Y";
  for (const auto& c : rows) os << std::setw(static_cast<int>(width)) << c;
  os << "\n";
  for (const auto& r : rows) {
    os << std::setw(static_cast<int>(width)) << r;
    for (const auto& c : rows) {
      auto it = cells.find({r, c});
      os << std::setw(static_cast<int>(width)) << (it == cells.end() ? "-" : pct(it->second));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::string format_cluster_report(const ClusterReport& r) {
  return matrix_table("cross-validation accuracy by object type (%)", r.types, r.type_accuracy) + "\n" +
         matrix_table("cross-validation accuracy by cluster (%)", r.clusters, r.cluster_accuracy);
}

std::string format_subsample_report(const SubsampleReport& r) {
  std::ostringstream os;
  os << "set\ttriplets\tcv_accuracy\n";
  os << "full\t" << r.full_count << "\t" << pct(r.full_accuracy) << "\n";
  os << "subsample\t" << r.subsample_count << "\t" << pct(r.subsample_accuracy) << "\n";
  return os.str();
}

std::string format_weight_plot(const std::vector<WeightPlotRow>& rows) {
  std::ostringstream os;
  os << "dim\tblock\tgroup\tlog10_weight\n";
  os << std::setprecision(10);
  for (const auto& r : rows) os << r.dim << '\t' << r.block << '\t' << r.group << '\t' << r.log_weight << '\n';
  return os.str();
}

nlohmann::ordered_json to_json(const IterationState& s) {
  nlohmann::ordered_json j;
  j["iteration"] = s.iteration;
  j["accuracy_history"] = s.accuracy_history;
  j["triplets"] = s.triplet_pool.size();
  j["hits_posted"] = s.hits_posted;
  j["hits_rejected"] = s.hits_rejected;
  return j;
}

}  // namespace stylemetric
