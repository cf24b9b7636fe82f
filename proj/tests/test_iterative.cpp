#include <doctest.h>

#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "stylemetric/error.hpp"
#include "stylemetric/feature_layout.hpp"
#include "stylemetric/iterative.hpp"
#include "stylemetric/synthetic.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace stylemetric;
using testing::TempDir;

namespace {

SyntheticCorpus corpus(std::vector<std::string> types = {"chair", "table"}, int per_type = 24) {
  SyntheticSpec spec;
  spec.types = std::move(types);
  spec.dim = 24;
  spec.informative = 5;
  spec.models_per_type = per_type;
  spec.seed = 21;
  return make_synthetic_corpus(spec);
}

IterationConfig small_iteration(const ControlPool* pool) {
  IterationConfig cfg;
  cfg.pair = {"chair", "table"};
  cfg.hits_per_iter = 2;
  cfg.seed = 4;
  cfg.controls = pool;
  return cfg;
}

}  // namespace

TEST_CASE("noise-free oracle answers with the two nearest candidates") {
  const SyntheticCorpus c = corpus();
  const AnnotatorOracle oracle{c.w_star, 0.0, 1};
  for (int i = 0; i < 50; ++i) {
    const SixChoiceTask t = random_six_choice({"chair", "table"}, c.features.vectors, 3, "task" + std::to_string(i));
    const TaskResponse r = simulate_response(t, oracle, c.features.vectors);
    // test-side ranking of the candidates
    std::vector<std::pair<double, std::string>> d;
    for (const auto& y : t.candidates)
      d.emplace_back(testing::weighted_sq(c.w_star.diag, c.features.vectors.at(t.x).values, c.features.vectors.at(y).values), y);
    std::sort(d.begin(), d.end());
    const std::set<std::string> want{d[0].second, d[1].second};
    CHECK(std::set<std::string>{r.selected.first, r.selected.second} == want);
    CHECK(r == simulate_response(t, oracle, c.features.vectors));
  }
  CHECK_THROWS_AS((AnnotatorOracle{c.w_star, 1.5, 0}.validate()), InvalidArgument);
}

TEST_CASE("fully noisy oracle picks uniformly among the 15 pairs") {
  const SyntheticCorpus c = corpus();
  const AnnotatorOracle oracle{c.w_star, 1.0, 77};
  const SixChoiceTask t = random_six_choice({"chair", "table"}, c.features.vectors, 3, "fixed");
  std::map<std::set<std::string>, int> counts;
  const int n = 3000;
  for (int i = 0; i < n; ++i) {
    const TaskResponse r = simulate_response(t, oracle, c.features.vectors, "worker" + std::to_string(i));
    CHECK(r.selected.first != r.selected.second);
    counts[{r.selected.first, r.selected.second}]++;
  }
  CHECK(counts.size() == 15);
  double chi2 = 0;
  const double expected = n / 15.0;
  for (const auto& [pair, k] : counts) chi2 += (k - expected) * (k - expected) / expected;
  // 14 degrees of freedom, p = 0.001
  CHECK(chi2 < 36.12);
}

TEST_CASE("stopping rule") {
  CHECK_FALSE(should_stop({}));
  CHECK_FALSE(should_stop({55.0}));
  CHECK(should_stop({55.0, 56.9}));
  CHECK_FALSE(should_stop({55.0, 57.0}));
  CHECK(should_stop({55.0, 70.0, 71.0}));
  CHECK(should_stop({70.0, 60.0}));
  CHECK_FALSE(should_stop({50.0, 54.0}, 3.0));
}

TEST_CASE("one iteration expands accepted regular tasks into the pool") {
  const SyntheticCorpus c = corpus();
  const ControlPool pool = build_control_pool({"chair", "table"}, c.features.vectors, c.w_star, 20, 3);
  const AnnotatorOracle oracle{c.w_star, 0.0, 1};
  IterationState s0;
  s0.w_current = initial_metric(c.features.vectors, MetricInit::identity, 0);
  const IterationConfig cfg = small_iteration(&pool);
  const IterationState s1 = run_iteration(s0, c.features.vectors, oracle, cfg);
  CHECK(s1.iteration == 1);
  CHECK(s1.triplet_pool.size() == 2u * 20u * 8u);
  CHECK(s1.hits_posted == std::vector<int>{2});
  CHECK(s1.hits_rejected == std::vector<int>{0});
  REQUIRE(s1.accuracy_history.size() == 1);
  CHECK(s1.accuracy_history[0] > 50);
  for (const auto& t : s1.triplet_pool) {
    CHECK(t.source == TripletSource::simulated);
    CHECK(c.features.vectors.at(t.a).object_type == "chair");
  }
  const IterationState s2 = run_iteration(s1, c.features.vectors, oracle, cfg);
  CHECK(s2.triplet_pool.size() == 2 * s1.triplet_pool.size());
  CHECK(s2.accuracy_history.size() == 2);
  // the first half of the pool is kept verbatim
  CHECK(std::equal(s1.triplet_pool.begin(), s1.triplet_pool.end(), s2.triplet_pool.begin()));
  const auto j = to_json(s2);
  CHECK(j["iteration"] == 2);
  CHECK(j["triplets"] == s2.triplet_pool.size());
}

TEST_CASE("random annotators fail the controls and their HITs are re-posted") {
  const SyntheticCorpus c = corpus();
  const ControlPool pool = build_control_pool({"chair", "table"}, c.features.vectors, c.w_star, 20, 3);
  IterationState s0;
  s0.w_current = initial_metric(c.features.vectors, MetricInit::identity, 0);
  IterationConfig cfg = small_iteration(&pool);
  cfg.max_posts_per_hit = 3;
  CHECK_THROWS_AS(run_iteration(s0, c.features.vectors, AnnotatorOracle{c.w_star, 1.0, 5}, cfg), Error);

  // moderate noise: some posts rejected, every accepted HIT still counted once
  cfg.max_posts_per_hit = 200;
  cfg.hits_per_iter = 4;
  const IterationState s = run_iteration(s0, c.features.vectors, AnnotatorOracle{c.w_star, 0.3, 5}, cfg);
  CHECK(s.hits_posted[0] == 4 + s.hits_rejected[0]);
  CHECK(s.triplet_pool.size() == 4u * 20u * 8u);
}

TEST_CASE("export annotator exchanges files with an outside responder") {
  const SyntheticCorpus c = corpus();
  TempDir dir;
  ExportAnnotator ex{dir.path(), std::chrono::seconds(30), std::chrono::milliseconds(5)};
  const AnnotatorOracle oracle{c.w_star, 0.0, 1};
  std::atomic<bool> done{false};
  std::thread responder([&] {
    std::set<std::string> answered;
    while (!done) {
      for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
        const std::string name = e.path().filename().string();
        const auto pos = name.find(".hit.json");
        if (pos == std::string::npos || answered.count(name)) continue;
        const HitBundle b = read_hit_bundle(e.path());
        std::vector<TaskResponse> rs;
        for (const auto& t : b.tasks) rs.push_back(simulate_response(t, oracle, c.features.vectors, "outside"));
        write_responses(dir / (name.substr(0, pos) + ".responses.json"), b.hit_id, rs);
        answered.insert(name);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  });
  IterationState s0;
  s0.w_current = initial_metric(c.features.vectors, MetricInit::identity, 0);
  IterationConfig cfg = small_iteration(nullptr);
  const IterationState s = run_iteration(s0, c.features.vectors, ex, cfg);
  done = true;
  responder.join();
  CHECK(s.triplet_pool.size() == 2u * 25u * 8u);
  CHECK(s.triplet_pool[0].source == TripletSource::crowd);
  CHECK(std::filesystem::exists(dir / "hit-chair-table-i00-h00.post0.hit.json"));

  TempDir silent;
  ExportAnnotator quiet{silent.path(), std::chrono::milliseconds(30), std::chrono::milliseconds(5)};
  CHECK_THROWS_AS(run_iteration(s0, c.features.vectors, quiet, cfg), Timeout);
}

TEST_CASE("loop stops by the improvement rule, never after the first iteration") {
  const SyntheticCorpus c = corpus();
  const ControlPool pool = build_control_pool({"chair", "table"}, c.features.vectors, c.w_star, 20, 3);
  LoopConfig cfg;
  cfg.iteration = small_iteration(&pool);
  cfg.max_iters = 8;
  const LoopResult r = run_until_converged(c.features.vectors, AnnotatorOracle{c.w_star, 0.0, 2}, cfg);
  CHECK(r.converged);
  CHECK(r.state.iteration >= 2);
  CHECK(r.state.accuracy_history.size() == static_cast<std::size_t>(r.state.iteration));
  CHECK(should_stop(r.state.accuracy_history));
  for (std::size_t i = 1; i + 1 < r.state.accuracy_history.size(); ++i)
    CHECK(r.state.accuracy_history[i] - r.state.accuracy_history[i - 1] >= 2.0);
  CHECK(r.w == r.state.w_current);

  cfg.max_iters = 1;
  const LoopResult capped = run_until_converged(c.features.vectors, AnnotatorOracle{c.w_star, 0.0, 2}, cfg);
  CHECK_FALSE(capped.converged);
  CHECK(capped.state.iteration == 1);
  cfg.max_iters = 0;
  CHECK_THROWS_AS(run_until_converged(c.features.vectors, AnnotatorOracle{c.w_star, 0.0, 2}, cfg), InvalidArgument);
}

TEST_CASE("initial metrics") {
  const SyntheticCorpus c = corpus();
  const WeightMatrix id = initial_metric(c.features.vectors, MetricInit::identity, 0);
  CHECK(id.diag == Eigen::VectorXd::Ones(24));
  CHECK(id.config_hash == c.features.config_hash);
  const WeightMatrix r = initial_metric(c.features.vectors, MetricInit::random, 9);
  CHECK((r.diag.array() >= 0).all());
  CHECK((r.diag.array() <= 2).all());
  CHECK(r == initial_metric(c.features.vectors, MetricInit::random, 9));
  CHECK_FALSE(r == initial_metric(c.features.vectors, MetricInit::random, 10));
}

TEST_CASE("cluster experiment layout and single-type cells") {
  const SyntheticCorpus c = corpus({"chair", "sofa", "table"}, 20);
  const auto& fs = c.features;
  std::map<TypePair, std::vector<TripletRecord>> sets;
  sets[{"chair", "table"}] = testing::oracle_triplets(fs, c.w_star.diag, "chair", "table", 200, 1);
  sets[{"sofa", "table"}] = testing::oracle_triplets(fs, c.w_star.diag, "sofa", "table", 200, 2);
  sets[{"table", "chair"}] = testing::oracle_triplets(fs, c.w_star.diag, "table", "chair", 200, 3);
  const std::vector<TypePair> pairs{{"chair", "table"}, {"sofa", "table"}, {"table", "chair"}};
  const std::map<std::string, std::vector<std::string>> clusters{{"seating", {"chair", "sofa"}}, {"tables", {"table"}}};
  const ClusterReport r = cluster_experiment(pairs, clusters, sets, fs.vectors);
  CHECK(r.types == std::vector<std::string>{"chair", "sofa", "table"});
  CHECK(r.clusters == std::vector<std::string>{"seating", "tables"});
  CHECK(r.type_accuracy.size() == 3);
  // (tables, seating) only holds (table, chair)
  CHECK(r.cluster_accuracy.at({"tables", "seating"}) == r.type_accuracy.at({"table", "chair"}));
  CHECK(r.cluster_triplets.at({"tables", "seating"}) == 200);
  CHECK(r.cluster_triplets.at({"seating", "tables"}) == 400);
  CHECK(r.cluster_accuracy.count({"seating", "seating"}) == 0);
  const std::string text = format_cluster_report(r);
  CHECK(text.find("seating") != std::string::npos);
  CHECK(text.find("by object type") != std::string::npos);

  auto missing = sets;
  missing.erase({"sofa", "table"});
  CHECK_THROWS_AS(cluster_experiment(pairs, clusters, missing, fs.vectors), InvalidArgument);
}

TEST_CASE("subsampling keeps order and is seeded") {
  std::vector<TripletRecord> trips;
  for (int i = 0; i < 101; ++i) trips.push_back({"a" + std::to_string(i), "b", "c", TripletSource::user, {}});
  const auto s = subsample_triplets(trips, 0.5, 3);
  CHECK(s.size() == 51);  // llround(50.5)
  std::size_t last = 0;
  bool first = true;
  for (const auto& t : s) {
    const auto idx = static_cast<std::size_t>(std::stoi(t.a.substr(1)));
    if (!first) CHECK(idx > last);
    last = idx;
    first = false;
  }
  CHECK(s == subsample_triplets(trips, 0.5, 3));
  CHECK_FALSE(s == subsample_triplets(trips, 0.5, 4));
  CHECK(subsample_triplets(trips, 1.0, 1) == trips);
  CHECK_THROWS_AS(subsample_triplets(trips, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(subsample_triplets(trips, 1.5, 1), InvalidArgument);

  const SyntheticCorpus c = corpus();
  const auto real = testing::oracle_triplets(c.features, c.w_star.diag, "chair", "table", 400, 8);
  const SubsampleReport rep = subsample_experiment(real, c.features.vectors);
  CHECK(rep.full_count == 400);
  CHECK(rep.subsample_count == 200);
  CHECK(format_subsample_report(rep).find("subsample\t200\t") != std::string::npos);
  CHECK_THROWS_AS(subsample_experiment({real.begin(), real.begin() + 10}, c.features.vectors), InvalidArgument);
}

TEST_CASE("weight plot rows and group summary") {
  WeightMatrix w = WeightMatrix::identity(kFeatureDims, "cfg");
  w.diag(0) = 0.0;
  w.diag(kFeatureDims - 1) = 100.0;
  const auto rows = export_weight_plot_data(w);
  REQUIRE(rows.size() == static_cast<std::size_t>(kFeatureDims));
  CHECK(rows[0].log_weight == doctest::Approx(-12.0));
  CHECK(rows[1].log_weight == doctest::Approx(0.0));
  CHECK(rows.back().log_weight == doctest::Approx(2.0));
  CHECK(rows.back().block == "lbp");
  for (int i = 0; i < kFeatureDims; ++i) CHECK(rows[static_cast<std::size_t>(i)].dim == i);
  const auto groups = summarize_weight_plot(rows);
  CHECK(groups.size() == 18);
  int total = 0;
  for (const auto& g : groups) total += g.dims;
  CHECK(total == kFeatureDims);
  CHECK(groups.back().mean_log_weight == doctest::Approx(2.0 / groups.back().dims));
  const std::string tsv = format_weight_plot(rows);
  CHECK(tsv.rfind("dim\tblock\tgroup\tlog10_weight\n", 0) == 0);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == kFeatureDims + 1);

  CHECK_THROWS_AS(export_weight_plot_data(WeightMatrix::identity(10, "")), InvalidArgument);
  CHECK_THROWS_AS(export_weight_plot_data(WeightMatrix::identity(kFeatureDims, "", MetricShape::full)), InvalidArgument);
}
