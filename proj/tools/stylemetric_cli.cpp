// Command-line front end: extract, train, iterate, evaluate, search, serve.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stylemetric/catalog.hpp"
#include "stylemetric/error.hpp"
#include "stylemetric/extract.hpp"
#include "stylemetric/iterative.hpp"
#include "stylemetric/search.hpp"
#include "stylemetric/server.hpp"
#include "stylemetric/synthetic.hpp"

namespace fs = std::filesystem;
using namespace stylemetric;

namespace {

std::vector<TripletRecord> read_all_triplets(const std::vector<std::string>& files) {
  std::vector<TripletRecord> out;
  for (const auto& f : files) {
    auto part = read_triplets(f);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

WeightMatrix load_metric(const std::string& spec, const FeatureSet& features) {
  if (spec == kIdentityMetric) {
    const int dim = features.vectors.empty() ? kFeatureDims
                                             : static_cast<int>(features.vectors.begin()->second.values.size());
    return WeightMatrix::identity(dim, features.config_hash);
  }
  WeightMatrix w = read_weights(spec);
  check_compatible(w, features);
  return w;
}

FeatureConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  try {
    return FeatureConfig::from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad config " + path + ": " + e.what());
  }
}

std::map<std::string, std::vector<std::string>> clusters_of(const FeatureSet& fs_) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& type : fs_.types()) {
    const auto ids = fs_.ids_of_type(type);
    out[fs_.vectors.at(ids.front()).cluster].push_back(type);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style-similarity features, metric learning and search for 3D models"};
  app.require_subcommand(1);

  // extract
  auto* extract = app.add_subcommand("extract", "Compute feature vectors for an OBJ corpus");
  std::string corpus_dir, config_path, features_out, catalog_out;
  int threads = 1, voxel_res = 0;
  extract->add_option("--corpus", corpus_dir, "Corpus directory (DIR/<type>/<id>.obj)")->required();
  extract->add_option("--config", config_path, "Descriptor configuration JSON");
  extract->add_option("--out", features_out, "Feature file to write")->required();
  extract->add_option("--catalog", catalog_out, "Also create a catalog directory with thumbnails");
  extract->add_option("--threads", threads, "Worker threads");
  extract->add_option("--voxel-resolution", voxel_res, "Override the voxel resolution");

  // train
  auto* trainc = app.add_subcommand("train", "Learn a style metric from triplets");
  std::vector<std::string> triplet_files;
  std::string features_in, weights_out, shape = "diagonal", catalog_dir, base = "crowd";
  std::uint64_t seed = 0;
  double lambda = TrainConfig{}.lambda;
  int epochs = TrainConfig{}.max_epochs, pca = TrainConfig{}.pca_dims;
  trainc->add_option("--triplets", triplet_files, "Triplet files (JSONL)")->required();
  trainc->add_option("--features", features_in, "Feature file")->required();
  trainc->add_option("--shape", shape, "diagonal or full");
  trainc->add_option("--seed", seed);
  trainc->add_option("--lambda", lambda, "Regularization weight");
  trainc->add_option("--max-epochs", epochs);
  trainc->add_option("--pca-dims", pca, "Principal components kept for the full shape");
  trainc->add_option("--out", weights_out, "Weight file to write")->required();
  trainc->add_option("--catalog", catalog_dir, "Register the metric in a catalog");
  trainc->add_option("--base", base, "Catalog label: crowd, user or combined");

  // iterate
  auto* iterate = app.add_subcommand("iterate", "Run the iterative HIT / training loop");
  std::string pair_s, annotator_s, controls_path, pool_out, report_out, init_s = "identity";
  double noise = 0.0;
  int max_iters = 10, hits = 10;
  iterate->add_option("--pair", pair_s, "X,Y object types")->required();
  iterate->add_option("--annotator", annotator_s, "sim:ORACLE_WEIGHTS or export:DIR")->required();
  iterate->add_option("--features", features_in, "Feature file")->required();
  iterate->add_option("--out", weights_out, "Final weight file")->required();
  iterate->add_option("--noise", noise, "Simulated annotator noise rate");
  iterate->add_option("--controls", controls_path, "Control pool file");
  iterate->add_option("--max-iters", max_iters);
  iterate->add_option("--hits", hits, "Accepted HITs per iteration");
  iterate->add_option("--seed", seed);
  iterate->add_option("--init", init_s, "identity or random");
  iterate->add_option("--triplets-out", pool_out, "Write the final triplet pool");
  iterate->add_option("--report", report_out, "Write the iteration history as JSON");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Experiment reports");
  std::string mode, metric_path, clusters_path;
  std::vector<std::string> set_specs;
  double fraction = 0.5;
  int folds = 5;
  evaluate->add_option("--mode", mode, "cv, cluster, subsample or weights")->required()->check(
      CLI::IsMember({"cv", "cluster", "subsample", "weights"}));
  evaluate->add_option("--triplets", triplet_files, "Triplet files");
  evaluate->add_option("--features", features_in, "Feature file");
  evaluate->add_option("--set", set_specs, "X,Y=FILE triplet set per type pair (cluster mode)");
  evaluate->add_option("--clusters", clusters_path, "JSON cluster -> [types]; defaults to the feature tags");
  evaluate->add_option("--metric", metric_path, "Weight file (weights mode)");
  evaluate->add_option("--fraction", fraction);
  evaluate->add_option("--folds", folds);
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--shape", shape);
  evaluate->add_option("--lambda", lambda);

  // search
  auto* searchc = app.add_subcommand("search", "Rank models of a type by style distance");
  std::string query, target_type;
  int k = 5;
  searchc->add_option("--metric", metric_path, "Weight file or 'identity'")->required();
  searchc->add_option("--features", features_in, "Feature file")->required();
  searchc->add_option("--query", query)->required();
  searchc->add_option("--type", target_type, "Target object type (default: the query's)");
  searchc->add_option("--k", k);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP API over a catalog");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--port", port, "0 picks a free port");
  serve->add_option("--host", host);
  serve->add_option("--catalog", catalog_dir, "Catalog directory (default $STYLEMETRIC_CATALOG)");

  // synthetic corpora
  auto* synth = app.add_subcommand("synth-corpus", "Write a procedural OBJ/MTL/PNG corpus");
  std::string synth_out;
  int per_type = 4;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--per-type", per_type);
  synth->add_option("--seed", seed);

  auto* synthf = app.add_subcommand("synth-features", "Write a Gaussian feature corpus and its hidden metric");
  std::string oracle_out;
  std::vector<std::string> types{"chair", "table"};
  int dims = 200, informative = 20, models = 60;
  synthf->add_option("--out", features_out, "Feature file")->required();
  synthf->add_option("--oracle-out", oracle_out, "Hidden metric weight file")->required();
  synthf->add_option("--types", types);
  synthf->add_option("--dims", dims);
  synthf->add_option("--informative", informative);
  synthf->add_option("--models-per-type", models);
  synthf->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) {
      FeatureConfig cfg = load_config(config_path);
      if (voxel_res > 0) cfg.voxel_resolution = voxel_res;
      const auto entries = discover_corpus(corpus_dir);
      const auto profiles = corpus_profiles(corpus_dir);
      auto result = extract_corpus(entries, profiles, cfg, threads);
      for (const auto& [id, ws] : result.warnings)
        for (const auto& w : ws) std::cerr << "warning: " << id << ": " << w << "\n";
      for (const auto& [id, err] : result.failures) std::cerr << "error: " << id << ": " << err << "\n";
      write_feature_set(features_out, result.features);
      if (!catalog_out.empty()) Catalog::create(catalog_out, result.features, entries, profiles);
      std::cout << "extracted " << result.features.vectors.size() << " of " << entries.size()
                << " models, config " << result.features.config_hash << "\n";
      return result.failures.empty() ? 0 : 1;
    }

    if (*trainc) {
      const FeatureSet features = read_feature_set(features_in);
      TrainConfig cfg;
      cfg.shape = parse_metric_shape(shape);
      cfg.seed = seed;
      cfg.lambda = lambda;
      cfg.max_epochs = epochs;
      cfg.pca_dims = pca;
      for (const auto& f : triplet_files) cfg.triplet_set += (cfg.triplet_set.empty() ? "" : "+") + fs::path(f).filename().string();
      const auto triplets = read_all_triplets(triplet_files);
      const auto result = train_detailed(triplets, features.vectors, cfg);
      write_weights(weights_out, result.w);
      std::cout << "trained " << to_string(cfg.shape) << " metric on " << triplets.size() << " triplets, "
                << result.epochs << " epochs, loss " << result.loss_history.front() << " -> "
                << result.loss_history.back() << ", training accuracy "
                << triplet_accuracy(result.w, triplets, features.vectors) << "%\n";
      if (!catalog_dir.empty()) {
        Catalog cat = Catalog::open(catalog_dir);
        check_compatible(result.w, cat.features());
        std::cout << "registered as " << cat.add_metric(result.w, base, {cfg.triplet_set}) << "\n";
      }
      return 0;
    }

    if (*iterate) {
      const FeatureSet features = read_feature_set(features_in);
      LoopConfig cfg;
      cfg.iteration.pair = parse_type_pair(pair_s);
      cfg.iteration.hits_per_iter = hits;
      cfg.iteration.seed = seed;
      cfg.max_iters = max_iters;
      cfg.init = init_s == "random" ? MetricInit::random : MetricInit::identity;
      cfg.init_seed = seed;
      ControlPool controls;
      if (!controls_path.empty()) controls = ControlPool::load(controls_path);
      Annotator annotator;
      if (annotator_s.rfind("sim:", 0) == 0) {
        AnnotatorOracle oracle{read_weights(annotator_s.substr(4)), noise, seed};
        check_compatible(oracle.w_star, features);
        if (controls_path.empty())
          controls = build_control_pool(cfg.iteration.pair, features.vectors, oracle.w_star, 40, seed);
        annotator = oracle;
      } else if (annotator_s.rfind("export:", 0) == 0) {
        annotator = ExportAnnotator{annotator_s.substr(7)};
      } else {
        throw InvalidArgument("annotator must be sim:WEIGHTS or export:DIR");
      }
      if (!controls.empty()) cfg.iteration.controls = &controls;
      const LoopResult r = run_until_converged(features.vectors, annotator, cfg);
      write_weights(weights_out, r.w);
      if (!pool_out.empty()) write_triplets(pool_out, r.state.triplet_pool);
      auto report = to_json(r.state);
      report["converged"] = r.converged;
      if (!report_out.empty()) write_text_atomic(report_out, report.dump(1) + "\n");
      std::cout << report.dump(1) << "\n";
      return 0;
    }

    if (*evaluate) {
      ExperimentConfig ec;
      ec.folds = folds;
      ec.seed = seed;
      ec.train.shape = parse_metric_shape(shape);
      ec.train.lambda = lambda;
      if (mode == "weights") {
        if (metric_path.empty()) throw InvalidArgument("--metric is required in weights mode");
        const auto rows = export_weight_plot_data(read_weights(metric_path));
        std::cout << "group\tfirst_dim\tdims\tmean_log10_weight\n";
        for (const auto& g : summarize_weight_plot(rows))
          std::cout << g.group << '\t' << g.first_dim << '\t' << g.dims << '\t' << g.mean_log_weight << '\n';
        std::cout << '\n' << format_weight_plot(rows);
        return 0;
      }
      if (features_in.empty()) throw InvalidArgument("--features is required");
      const FeatureSet features = read_feature_set(features_in);
      if (mode == "cv") {
        const auto triplets = read_all_triplets(triplet_files);
        const auto cv = cross_validate(triplets, features.vectors, folds, seed, ec.train);
        std::cout << "fold\ttriplets\taccuracy\n";
        for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f)
          std::cout << f << '\t' << cv.fold_size[f] << '\t' << cv.fold_accuracy[f] << '\n';
        std::cout << "mean\t" << triplets.size() << '\t' << cv.accuracy << '\n';
      } else if (mode == "subsample") {
        const auto triplets = read_all_triplets(triplet_files);
        std::cout << format_subsample_report(subsample_experiment(triplets, features.vectors, fraction, ec));
      } else {
        std::map<TypePair, std::vector<TripletRecord>> sets;
        std::vector<TypePair> pairs;
        for (const auto& spec : set_specs) {
          const auto eq = spec.find('=');
          if (eq == std::string::npos) throw InvalidArgument("--set expects X,Y=FILE");
          const TypePair p = parse_type_pair(spec.substr(0, eq));
          auto part = read_triplets(spec.substr(eq + 1));
          auto& dst = sets[p];
          dst.insert(dst.end(), part.begin(), part.end());
          pairs.push_back(p);
        }
        std::map<std::string, std::vector<std::string>> clusters;
        if (!clusters_path.empty())
          clusters = nlohmann::json::parse(read_text(clusters_path)).get<std::map<std::string, std::vector<std::string>>>();
        else
          clusters = clusters_of(features);
        std::cout << format_cluster_report(cluster_experiment(pairs, clusters, sets, features.vectors, ec));
      }
      return 0;
    }

    if (*searchc) {
      const FeatureSet features = read_feature_set(features_in);
      const WeightMatrix w = load_metric(metric_path, features);
      auto q = features.vectors.find(query);
      if (q == features.vectors.end()) throw NotFound("unknown query model '" + query + "'");
      const auto r = search(features.vectors, w, query, target_type.empty() ? q->second.object_type : target_type);
      std::cout << "query\t" << query << '\n';
      int rank = 1;
      for (const auto& h : top_k(r, k)) std::cout << rank++ << '\t' << h.model_id << '\t' << h.distance << '\n';
      return 0;
    }

    if (*serve) {
      if (catalog_dir.empty())
        if (const char* env = std::getenv(kCatalogEnv)) catalog_dir = env;
      if (catalog_dir.empty()) throw InvalidArgument("--catalog or $" + std::string(kCatalogEnv) + " is required");
      Catalog cat = Catalog::open(catalog_dir);
      StyleServer server(cat);
      if (port == 0) {  // ephemeral
        port = server.bind_any_port(host);
        if (port < 0) throw IoError("cannot bind " + host);
        std::cout << "serving " << catalog_dir << " on http://" << host << ":" << port << std::endl;
        return server.listen_after_bind() ? 0 : 1;
      }
      std::cout << "serving " << catalog_dir << " on http://" << host << ":" << port << std::endl;
      return server.listen(host, port) ? 0 : 1;
    }

    if (*synth) {
      ProceduralSpec spec;
      spec.models_per_type = per_type;
      if (seed) spec.seed = seed;
      const auto files = write_procedural_corpus(synth_out, spec);
      std::cout << "wrote " << files.size() << " models to " << synth_out << "\n";
      return 0;
    }

    if (*synthf) {
      SyntheticSpec spec;
      spec.types = types;
      spec.dim = dims;
      spec.informative = informative;
      spec.models_per_type = models;
      if (seed) spec.seed = seed;
      const auto corpus = make_synthetic_corpus(spec);
      write_feature_set(features_out, corpus.features);
      write_weights(oracle_out, corpus.w_star);
      std::cout << "wrote " << corpus.features.vectors.size() << " vectors, " << corpus.support.size()
                << " informative dims\n";
      return 0;
    }
  } catch (const ConfigMismatch& e) {
    std::cerr << "config mismatch: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
