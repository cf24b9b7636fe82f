// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// `acceptance N ...` runs only the listed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stylemetric/appearance_features.hpp"
#include "stylemetric/error.hpp"
#include "stylemetric/extract.hpp"
#include "stylemetric/geometry_features.hpp"
#include "stylemetric/iterative.hpp"
#include "stylemetric/metric.hpp"
#include "stylemetric/primitives.hpp"
#include "stylemetric/search.hpp"
#include "stylemetric/synthetic.hpp"
#include "stylemetric/triplets.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace stylemetric;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// ------------------------------------------------------------------ shared setups

SyntheticCorpus recovery_corpus(std::uint64_t seed) {
  SyntheticSpec spec;  // 2 types x 60 vectors, 200 dims, 20 informative
  spec.seed = seed;
  return make_synthetic_corpus(spec);
}

// Test-side two nearest candidates under a diagonal metric.
std::set<std::string> two_nearest(const SixChoiceTask& t, const Eigen::VectorXd& w, const FeatureMap& fm) {
  std::vector<std::pair<double, std::string>> d;
  for (const auto& y : t.candidates) d.emplace_back(testing::weighted_sq(w, fm.at(t.x).values, fm.at(y).values), y);
  std::sort(d.begin(), d.end());
  return {d[0].second, d[1].second};
}

// Six-choice tasks answered by the simulated annotator, expanded to triplets.
// With zero noise every answer is cross-checked against the test-side ranking.
std::vector<TripletRecord> annotated_triplets(const FeatureMap& fm, const AnnotatorOracle& oracle, const TypePair& pair,
                                              int tasks, std::uint64_t seed, int* mismatches) {
  std::vector<TripletRecord> out;
  for (int i = 0; i < tasks; ++i) {
    const SixChoiceTask t =
        random_six_choice(pair, fm, seed, to_string(pair) + "/s" + std::to_string(seed) + "/t" + std::to_string(i));
    const TaskResponse r = simulate_response(t, oracle, fm);
    if (oracle.noise == 0.0 && mismatches &&
        two_nearest(t, oracle.w_star.diag, fm) != std::set<std::string>{r.selected.first, r.selected.second})
      ++*mismatches;
    const auto e = expand_six_choice(t, r, TripletSource::simulated);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

// ------------------------------------------------------------------ criteria

void criterion1(Outcome& o) {
  const std::vector<int> expected{128, 128, 128, 128, 128, 128, 470, 192, 128, 192, 57,
                                  108, 192, 192, 96,  192, 3,   32,  32,  32,  42};
  bool layout = kFeatureBlocks.size() == expected.size();
  for (std::size_t b = 0; layout && b < expected.size(); ++b) layout = kFeatureBlocks[b].size == expected[b];
  o.require(layout, "block table");

  testing::TempDir dir;
  ProceduralSpec spec;
  spec.models_per_type = 2;
  write_procedural_corpus(dir.path(), spec);
  const auto entries = discover_corpus(dir.path());
  const ProfileTable profiles = corpus_profiles(dir.path());
  FeatureConfig cfg;
  cfg.voxel_resolution = 64;
  double worst = 0;
  for (const auto& e : entries) {
    const Model raw = load_model(e.path, {e.id, e.object_type, e.cluster});
    o.require(!raw.textures.empty(), e.id + " has no texture");
    const auto t0 = Clock::now();
    const Extraction x = extract_features(raw, profiles.lookup(e.object_type), cfg);
    worst = std::max(worst, seconds_since(t0));
    o.require(x.features.values.size() == 2728 && x.features.values.allFinite(), e.id + " length");

    // block sizes as produced by the descriptor stages themselves
    const Model m = normalize(raw, profiles.lookup(e.object_type));
    const GeometryResult g = compute_geometry(m, cfg);
    const ModelAppearance a = compute_model_appearance(m, cfg);
    std::vector<int> got;
    for (const auto* b : g.blocks.ordered()) got.push_back(static_cast<int>(b->size()));
    for (const auto* b : {&a.blocks.hue, &a.blocks.saturation, &a.blocks.value, &a.blocks.lbp})
      got.push_back(static_cast<int>(b->size()));
    got.insert(got.begin() + 16, static_cast<int>(a.blocks.dominant_hsv.size()));
    o.require(got == expected, e.id + " block sizes");
    o.require(g.blocks.ordered().size() == 16, "geometric block count");
    o.require(!a.no_appearance, e.id + " appearance");
  }
  o.require(worst < 30.0, "runtime per model");
  o.detail << entries.size() << " textured models, 2728 values each, slowest " << fmt(worst) << " s at voxel res 64";
}

void criterion2(Outcome& o) {
  const auto t0 = Clock::now();
  const FeatureConfig cfg;
  const Model sphere = make_icosphere(1.0, 5);
  const auto curv = compute_curvature_histograms(sphere, cfg);
  const double gauss = curv.gauss.mass_between(0.9, 1.1);
  o.require(gauss >= 0.99, "Gaussian curvature mass");

  const PointSample ss = sample_surface(sphere, static_cast<std::size_t>(cfg.sdf_samples), cfg.seed);
  const ShapeDiameter sd = compute_shape_diameter(sphere, ss, cfg);
  const double sdf = sd.histogram.mass_between(1.9, 2.1);
  o.require(sdf >= 0.99, "SDF mass");

  // unit cube D2 against 1e7 uniform surface pairs drawn test-side
  const Model cube = make_box(Vec3::Zero(), Vec3(1, 1, 1));
  const PointSample cs = sample_surface(cube, static_cast<std::size_t>(cfg.surface_samples), cfg.seed);
  const Eigen::VectorXd h = compute_shape_distribution(cs, cfg);
  const double dmax = shape_distribution_range(cs);
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto cube_point = [&] {
    const int f = face(gen);
    Vec3 p(u(gen), u(gen), u(gen));
    p(f / 2) = f % 2 ? 0.5 : -0.5;
    return p;
  };
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(cfg.d2_bins);
  const long pairs = 10'000'000;
  for (long p = 0; p < pairs; ++p) {
    const double d = (cube_point() - cube_point()).norm();
    oracle(std::min(cfg.d2_bins - 1, static_cast<int>(d / dmax * cfg.d2_bins))) += 1;
  }
  oracle /= static_cast<double>(pairs);
  const double l1 = (h - oracle).cwiseAbs().sum();
  o.require(l1 <= 0.05, "cube D2 L1");
  const double secs = seconds_since(t0);
  o.require(secs < 120, "runtime");
  o.detail << "sphere Gaussian mass in [0.9,1.1] " << fmt(gauss, 4) << ", SDF mass in [1.9,2.1] " << fmt(sdf, 4)
           << ", cube D2 L1 " << fmt(l1, 4) << ", " << fmt(secs, 1) << " s";
}

void criterion3(Outcome& o) {
  SixChoiceTask t{"t", "x", {"a", "b", "c", "d", "e", "f"}, {"chair", "table"}, false, std::nullopt};
  const auto six = expand_six_choice(t, {"t", {"b", "e"}, "w"});
  o.require(six.size() == 8, "six-choice count");
  std::vector<std::string> ranked;
  for (int i = 0; i < 31; ++i) ranked.push_back("m" + std::to_string(i));
  const auto rr = expand_rerank("env", ranked);
  o.require(rr.size() == 210, "rerank count");

  HitBundle b;
  b.hit_id = "h";
  for (int i = 0; i < 20; ++i) {
    t.task_id = "r" + std::to_string(i);
    b.tasks.push_back(t);
  }
  for (int i = 0; i < 5; ++i) {
    SixChoiceTask c = t;
    c.task_id = "c" + std::to_string(i);
    c.is_control = true;
    c.control_answer = IdPair{"a", "b"};
    b.tasks.push_back(c);
  }
  auto answers = [&](int correct) {
    std::vector<TaskResponse> rs;
    int k = 0;
    for (const auto& task : b.tasks)
      rs.push_back({task.task_id, task.is_control && k++ < correct ? IdPair{"b", "a"} : IdPair{"c", "d"}, "w"});
    return rs;
  };
  const bool four = filter_by_controls(b, answers(4)).accepted;
  const bool three = filter_by_controls(b, answers(3)).accepted;
  o.require(four, "4/5 accepted");
  o.require(!three, "3/5 rejected");
  o.detail << "six-choice " << six.size() << ", rerank(31) " << rr.size() << ", controls 4/5 "
           << (four ? "accepted" : "rejected") << ", 3/5 " << (three ? "accepted" : "rejected");
}

void criterion4(Outcome& o) {
  const auto t0 = Clock::now();
  const TypePair pair{"chair", "table"};
  for (std::uint64_t seed : {1, 2, 3}) {
    const SyntheticCorpus c = recovery_corpus(seed);
    const auto& fm = c.features.vectors;
    int mismatches = 0;
    const auto clean = annotated_triplets(fm, AnnotatorOracle{c.w_star, 0.0, seed}, pair, 260, seed, &mismatches);
    const auto noisy = annotated_triplets(fm, AnnotatorOracle{c.w_star, 0.1, seed}, pair, 260, seed, nullptr);
    o.require(clean.size() >= 2000 && noisy.size() >= 2000, "triplet count");
    o.require(mismatches == 0, "annotator disagrees with the test-side ranking");
    const double a0 = cv_accuracy(clean, fm, 5, seed);
    const double a1 = cv_accuracy(noisy, fm, 5, seed);
    o.require(a0 >= 90.0, "seed " + std::to_string(seed) + " zero-noise CV");
    o.require(a1 >= 80.0, "seed " + std::to_string(seed) + " noisy CV");
    o.detail << "seed " << seed << ": " << fmt(a0) << "% / " << fmt(a1) << "% (" << clean.size() << " triplets); ";
  }
  const double secs = seconds_since(t0);
  o.require(secs < 300, "runtime");
  o.detail << fmt(secs, 1) << " s";
}

void criterion5(Outcome& o) {
  const auto t0 = Clock::now();
  struct Run {
    std::uint64_t seed;
    double noise;
  };
  for (const Run run : {Run{1, 0.0}, Run{2, 0.0}, Run{3, 0.0}, Run{1, 0.1}}) {
    const SyntheticCorpus c = recovery_corpus(run.seed);
    const TypePair pair{"chair", "table"};
    const ControlPool pool = build_control_pool(pair, c.features.vectors, c.w_star, 40, run.seed);
    LoopConfig cfg;
    cfg.iteration.pair = pair;
    cfg.iteration.seed = run.seed;
    cfg.iteration.controls = &pool;
    cfg.max_iters = 10;
    const LoopResult r = run_until_converged(c.features.vectors, AnnotatorOracle{c.w_star, run.noise, run.seed}, cfg);
    const auto& h = r.state.accuracy_history;
    const std::string tag = "seed " + std::to_string(run.seed) + " noise " + fmt(run.noise, 1);
    o.require(r.converged, tag + " stopped by the cap");
    o.require(r.state.iteration >= 2 && r.state.iteration <= 6, tag + " iteration count");
    for (std::size_t i = 1; i < h.size(); ++i) o.require(h[i] >= h[i - 1] - 2.0, tag + " history dips");
    o.detail << tag << ": [";
    for (std::size_t i = 0; i < h.size(); ++i) o.detail << (i ? ", " : "") << fmt(h[i]);
    o.detail << "]; ";
  }
  const double secs = seconds_since(t0);
  o.require(secs < 600, "runtime");
  o.detail << fmt(secs, 1) << " s";
}

void criterion6(Outcome& o) {
  SyntheticSpec spec;
  spec.types = {"chair", "desk", "sofa", "table"};
  spec.seed = 6;
  const SyntheticCorpus c = make_synthetic_corpus(spec);
  const auto& fm = c.features.vectors;
  const AnnotatorOracle oracle{c.w_star, 0.0, 6};
  std::vector<TypePair> pairs;
  std::map<TypePair, std::vector<TripletRecord>> sets;
  for (const auto& x : spec.types)
    for (const auto& y : spec.types) {
      pairs.push_back({x, y});
      sets[{x, y}] = annotated_triplets(fm, oracle, {x, y}, 100, 6, nullptr);
    }
  const std::map<std::string, std::vector<std::string>> clusters{
      {"desk", {"desk"}}, {"seating", {"chair", "sofa"}}, {"table", {"table"}}};
  const ClusterReport r = cluster_experiment(pairs, clusters, sets, fm);
  o.require(r.types.size() == 4 && r.type_accuracy.size() == 16, "type matrix layout");
  o.require(r.clusters.size() == 3 && r.cluster_accuracy.size() == 9, "cluster matrix layout");
  int exact = 0;
  for (const auto& a : {"desk", "table"})
    for (const auto& b : {"desk", "table"}) {
      const bool same = r.cluster_accuracy.at({a, b}) == r.type_accuracy.at({a, b});
      o.require(same, std::string("cluster cell ") + a + "," + b);
      exact += same;
    }
  o.require(r.cluster_triplets.at({"seating", "seating"}) == 4 * 800, "seating cell holds four pairs");

  const SyntheticCorpus rc = recovery_corpus(1);
  const auto trips = annotated_triplets(rc.features.vectors, AnnotatorOracle{rc.w_star, 0.0, 1}, {"chair", "table"},
                                        260, 1, nullptr);
  const SubsampleReport s = subsample_experiment(trips, rc.features.vectors, 0.5);
  const double delta = std::abs(s.full_accuracy - s.subsample_accuracy);
  o.require(delta < 3.0, "subsample delta");
  o.detail << "4x4 type and 3x3 cluster matrices, " << exact << "/4 single-type cells exact, subsample "
           << fmt(s.full_accuracy) << "% -> " << fmt(s.subsample_accuracy) << "% (delta " << fmt(delta) << ")";
}

void criterion7(Outcome& o) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> n01;
  auto rnd = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = n01(gen);
    return m;
  };
  // pseudometric on 1000 triples, PSD full W (rank-deficient too)
  int asym = 0, tri = 0;
  double worst_tri = 0;
  for (int rank : {10, 4}) {
    WeightMatrix w = WeightMatrix::identity(10, "", MetricShape::full);
    const Eigen::MatrixXd A = rnd(10, rank);
    w.full = A * A.transpose();
    for (int t = 0; t < 1000; ++t) {
      const Eigen::VectorXd x = rnd(10, 1), y = rnd(10, 1), z = rnd(10, 1);
      if (distance(x, y, w) != distance(y, x, w)) ++asym;
      const double excess = distance(x, z, w) - distance(x, y, w) - distance(y, z, w);
      worst_tri = std::max(worst_tri, excess);
      if (excess > 1e-9) ++tri;
    }
  }
  o.require(asym == 0, "symmetry");
  o.require(tri == 0, "triangle inequality");

  // gradients against central differences, dim <= 10
  double worst_grad = 0;
  for (int d : {3, 7, 10}) {
    const Eigen::MatrixXd U = rnd(d, 40), V = rnd(d, 40);
    const Eigen::MatrixXd Q = diagonal_margin_basis(U, V);
    const Eigen::VectorXd wd = rnd(d, 1).cwiseAbs();
    Eigen::VectorXd g;
    diagonal_triplet_loss<double>(wd, Q, 1e-3, &g);
    const Eigen::MatrixXd B = rnd(d, d);
    const Eigen::MatrixXd W = B * B.transpose() / d;
    Eigen::MatrixXd G;
    full_triplet_loss<double>(W, U, V, 1e-3, &G);
    const double h = 1e-6;
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd p = wd, m = wd;
      p(i) += h;
      m(i) -= h;
      const double fd = (diagonal_triplet_loss<double>(p, Q, 1e-3) - diagonal_triplet_loss<double>(m, Q, 1e-3)) / (2 * h);
      worst_grad = std::max(worst_grad, std::abs(fd - g(i)) / std::max(1.0, std::abs(g(i))));
      for (int j = 0; j < d; ++j) {
        Eigen::MatrixXd P = W, M = W;
        P(i, j) += h;
        M(i, j) -= h;
        const double f2 = (full_triplet_loss<double>(P, U, V, 1e-3) - full_triplet_loss<double>(M, U, V, 1e-3)) / (2 * h);
        worst_grad = std::max(worst_grad, std::abs(f2 - G(i, j)) / std::max(1.0, std::abs(G(i, j))));
      }
    }
  }
  o.require(worst_grad <= 1e-4, "gradient");

  // positive scaling: predictions and search orderings unchanged
  const SyntheticCorpus c = recovery_corpus(1);
  const auto& fm = c.features.vectors;
  const auto trips = testing::oracle_triplets(c.features, c.w_star.diag, "chair", "table", 2000, 7);
  TrainConfig full;
  full.shape = MetricShape::full;
  full.pca_dims = 20;
  full.max_epochs = 100;
  int changed = 0;
  for (const WeightMatrix& w : {train(trips, fm), train(trips, fm, full)})
    for (double s : {1e-6, 0.01, 0.7, 3.0, 1e5}) {
      const WeightMatrix ws = w.scaled(s);
      for (const auto& t : trips) changed += predict_triplet(w, t, fm) != predict_triplet(ws, t, fm);
      for (const auto& type : {"chair", "table"})
        for (const auto& q : c.features.ids_of_type(type)) {
          const auto a = search(fm, w, q, "table").ranked;
          const auto b = search(fm, ws, q, "table").ranked;
          for (std::size_t i = 0; i < a.size(); ++i) changed += a[i].model_id != b[i].model_id;
        }
    }
  o.require(changed == 0, "scaling changed an output");
  o.detail << "2000 triples: asymmetric " << asym << ", worst triangle excess " << worst_tri
           << "; worst gradient rel. error " << worst_grad << "; outputs changed by scaling " << changed;
}

void criterion8(Outcome& o) {
  testing::TempDir dir;
  // features: a synthetic set and a freshly extracted one
  const SyntheticCorpus c = recovery_corpus(2);
  ProceduralSpec ps;
  ps.models_per_type = 1;
  write_procedural_corpus(dir / "corpus", ps);
  FeatureConfig cfg;
  cfg.voxel_resolution = 64;
  const CorpusExtraction ex = extract_corpus(discover_corpus(dir / "corpus"), corpus_profiles(dir / "corpus"), cfg);
  o.require(ex.failures.empty() && ex.features.vectors.size() == 3, "extraction");
  int files = 0;
  for (const FeatureSet* fs : {&c.features, &ex.features}) {
    const auto p = dir / ("f" + std::to_string(files) + ".json");
    const auto q = dir / ("g" + std::to_string(files++) + ".json");
    write_feature_set(p, *fs);
    const FeatureSet back = read_feature_set(p);
    bool same = back.vectors.size() == fs->vectors.size() && back.config_hash == fs->config_hash;
    for (const auto& [id, v] : fs->vectors) same = same && back.vectors.count(id) && back.vectors.at(id).values == v.values;
    write_feature_set(q, back);
    o.require(same && testing::slurp(p) == testing::slurp(q), "feature file " + p.filename().string());
  }

  const auto trips = testing::oracle_triplets(c.features, c.w_star.diag, "chair", "table", 500, 8);
  TrainConfig full;
  full.shape = MetricShape::full;
  full.pca_dims = 10;
  full.max_epochs = 50;
  const WeightMatrix diag = train(trips, c.features.vectors);
  for (const WeightMatrix& w : {diag, train(trips, c.features.vectors, full)}) {
    const auto p = dir / ("w" + std::to_string(files) + ".json");
    const auto q = dir / ("v" + std::to_string(files++) + ".json");
    write_weights(p, w);
    const WeightMatrix back = read_weights(p);
    write_weights(q, back);
    o.require(back == w && testing::slurp(p) == testing::slurp(q), "weight file " + to_string(w.shape));
  }

  write_triplets(dir / "t.jsonl", trips);
  const auto tb = read_triplets(dir / "t.jsonl");
  write_triplets(dir / "u.jsonl", tb);
  o.require(tb == trips && testing::slurp(dir / "t.jsonl") == testing::slurp(dir / "u.jsonl"), "triplet file");

  // a metric from one extraction config against features of another
  const WeightMatrix& w = diag;
  bool refused = false;
  try {
    check_compatible(w, ex.features);
  } catch (const ConfigMismatch&) {
    refused = true;
  }
  o.require(refused, "config mismatch accepted");
  bool search_refused = false;
  try {
    FeatureMap other = c.features.vectors;
    for (auto& [id, v] : other) v.config_hash = "different";
    search(other, w, other.begin()->first, "table");
  } catch (const ConfigMismatch&) {
    search_refused = true;
  }
  o.require(search_refused, "search under a foreign metric");
  o.detail << "2 feature, 2 weight and 1 triplet file re-read bit-identically; config mismatch raises ConfigMismatch";
}

}  // namespace

int main(int argc, char** argv) {
  setenv("STYLEMETRIC_QUIET", "1", 0);
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"feature dimension contract", criterion1},  {"analytic descriptor checks", criterion2},
      {"triplet arithmetic", criterion3},          {"metric recovery", criterion4},
      {"iterative loop", criterion5},              {"cluster and subsample harness", criterion6},
      {"metric properties", criterion7},           {"persistence round-trips", criterion8}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d %s: %s (%s s) %s\n", number, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                fmt(seconds_since(t0), 1).c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
