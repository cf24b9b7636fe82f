#include "stylemetric/extract.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "stylemetric/appearance_features.hpp"
#include "stylemetric/error.hpp"
#include "stylemetric/geometry_features.hpp"
#include "stylemetric/log.hpp"

namespace stylemetric {

Extraction extract_features(const Model& raw, const TypeProfile& profile, const FeatureConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Model m = normalize(raw, profile);
  GeometryResult geo = compute_geometry(m, cfg);
  ModelAppearance app = compute_model_appearance(m, cfg);

  Extraction out;
  FeatureVector& fv = out.features;
  fv.model_id = raw.id;
  fv.object_type = raw.object_type;
  fv.cluster = raw.cluster;
  fv.config_hash = cfg.hash();
  fv.values.resize(kFeatureDims);
  fv.values.head(kGeometryDims) = assemble_geometry(geo.blocks);
  fv.values.tail(kAppearanceDims) = app.blocks.concat();
  if (!fv.values.allFinite()) throw GeometryError("non-finite descriptor values for model '" + raw.id + "'");
  if (app.no_appearance) fv.flags.push_back("no-appearance");
  if (!geo.solid_voxels) fv.flags.push_back("surface-voxels");
  out.warnings = raw.warnings;
  out.warnings.insert(out.warnings.end(), geo.warnings.begin(), geo.warnings.end());
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<CorpusEntry> discover_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("corpus directory " + dir.string() + " does not exist");
  std::map<std::string, std::string> clusters;
  if (fs::exists(dir / "clusters.json")) {
    try {
      clusters = nlohmann::json::parse(read_text(dir / "clusters.json")).get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad clusters.json: " + std::string(e.what()));
    }
  }
  std::vector<CorpusEntry> entries;
  for (const auto& de : fs::recursive_directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    auto ext = de.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext != ".obj") continue;
    const auto rel = fs::relative(de.path(), dir);
    if (std::distance(rel.begin(), rel.end()) < 2) {
      log_warning("skipping " + rel.string() + ": models must sit inside a type directory");
      continue;
    }
    CorpusEntry e;
    e.path = de.path();
    e.id = de.path().stem().string();
    e.object_type = rel.begin()->string();
    auto c = clusters.find(e.object_type);
    e.cluster = c == clusters.end() ? e.object_type : c->second;
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].id == entries[i - 1].id)
      throw InvalidArgument("duplicate model id '" + entries[i].id + "' (" + entries[i - 1].path.string() + ", " +
                            entries[i].path.string() + ")");
  return entries;
}

ProfileTable corpus_profiles(const std::filesystem::path& dir) {
  const auto p = dir / "profiles.json";
  return std::filesystem::exists(p) ? ProfileTable::load(p) : ProfileTable{};
}

CorpusExtraction extract_corpus(const std::vector<CorpusEntry>& entries, const ProfileTable& profiles,
                                const FeatureConfig& cfg, int threads) {
  cfg.validate();
  CorpusExtraction out;
  out.features.config_hash = cfg.hash();
  out.features.config = cfg.to_json();
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      const auto& e = entries[i];
      try {
        const Model raw = load_model(e.path, {e.id, e.object_type, e.cluster});
        Extraction ex = extract_features(raw, profiles.lookup(e.object_type), cfg);
        std::lock_guard lock(mu);
        if (!ex.warnings.empty()) out.warnings[e.id] = ex.warnings;
        out.features.vectors.emplace(e.id, std::move(ex.features));
      } catch (const Error& err) {
        std::lock_guard lock(mu);
        out.failures[e.id] = err.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(entries.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace stylemetric
