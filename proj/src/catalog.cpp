#include "stylemetric/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "stylemetric/error.hpp"
#include "stylemetric/image_io.hpp"
#include "stylemetric/log.hpp"
#include "stylemetric/raster.hpp"

namespace stylemetric {

namespace fs = std::filesystem;

void render_thumbnail(const Model& m, const fs::path& path, int size) {
  ViewFrame f;
  f.toward = Vec3(0.6, 0.45, 0.65).normalized();
  f.up = (Vec3::UnitY() - Vec3::UnitY().dot(f.toward) * f.toward).normalized();
  f.right = f.up.cross(f.toward);
  double r = 0;
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) r = std::max(r, m.vertices.row(i).norm());
  const auto img = render_shaded(m, f, size, 1.05 * std::max(r, 1e-9));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png_gray(path, size, size, img);
}

namespace {

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  }) && id != "." && id != "..";
}

}  // namespace

Catalog::Catalog(fs::path root) : root_(std::move(root)) {}

Catalog::Catalog(Catalog&& o) noexcept
    : root_(std::move(o.root_)),
      features_(std::move(o.features_)),
      models_(std::move(o.models_)),
      metrics_(std::move(o.metrics_)),
      sets_(std::move(o.sets_)),
      counters_(std::move(o.counters_)),
      metric_cache_(std::move(o.metric_cache_)) {}

Catalog Catalog::create(const fs::path& root, const FeatureSet& features, const std::vector<CorpusEntry>& corpus,
                        const ProfileTable& profiles) {
  if (fs::exists(root / "catalog.json")) throw InvalidArgument("a catalog already exists at " + root.string());
  fs::create_directories(root / "metrics");
  fs::create_directories(root / "triplets");
  fs::create_directories(root / "thumbnails");
  Catalog c(root);
  c.features_ = features;
  for (const auto& [id, fv] : features.vectors) c.models_[id] = {id, fv.object_type, fv.cluster, "", "", true};
  for (const auto& e : corpus) {
    auto& entry = c.models_[e.id];
    entry.id = e.id;
    entry.object_type = e.object_type;
    entry.cluster = e.cluster;
    entry.mesh = fs::absolute(e.path).string();
    try {
      const Model raw = load_model(e.path, {e.id, e.object_type, e.cluster});
      const auto rel = fs::path("thumbnails") / (e.id + ".png");
      render_thumbnail(normalize(raw, profiles.lookup(e.object_type)), root / rel);
      entry.thumbnail = rel.string();
    } catch (const Error& err) {
      log_warning("no thumbnail for " + e.id + ": " + err.what());
    }
  }
  write_feature_set(root / "features.json", c.features_);
  std::unique_lock lock(c.mu_);
  c.save_locked();
  return c;
}

Catalog Catalog::open(const fs::path& root) {
  Catalog c(root);
  c.load();
  return c;
}

void Catalog::load() {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(root_ / "catalog.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad catalog manifest: " + std::string(e.what()));
  }
  try {
    if (j.at("kind").get<std::string>() != "catalog") throw IoError("not a catalog manifest");
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw IoError("unsupported catalog schema version");
    features_ = read_feature_set(root_ / j.at("features").get<std::string>());
    for (const auto& m : j.at("models")) {
      auto str = [&](const char* k) { return m.at(k).get<std::string>(); };
      ModelEntry e{str("id"), str("type"), str("cluster"), str("mesh"), str("thumbnail"), false};
      e.has_features = features_.vectors.count(e.id) > 0;
      models_[e.id] = e;
    }
    for (const auto& m : j.at("metrics")) {
      auto str = [&](const char* k) { return m.at(k).get<std::string>(); };
      MetricEntry e{str("id"), str("file"), str("base"), m.at("triplet_sets").get<std::vector<std::string>>(),
                    str("shape"), str("config_hash")};
      if (!e.config_hash.empty() && e.config_hash != features_.config_hash)
        log_warning("metric " + e.id + " was trained under config " + e.config_hash +
                    ", catalog features use " + features_.config_hash);
      metrics_[e.id] = e;
    }
    for (const auto& s : j.at("triplet_sets")) {
      auto str = [&](const char* k) { return s.at(k).get<std::string>(); };
      sets_[str("id")] = {str("id"), str("file"), str("source"), str("label"), s.at("count").get<std::size_t>()};
    }
    counters_ = j.at("counters").get<std::map<std::string, int>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad catalog manifest: " + std::string(e.what()));
  }
}

void Catalog::save_locked() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "catalog";
  j["features"] = "features.json";
  j["config_hash"] = features_.config_hash;
  auto models = nlohmann::ordered_json::array();
  for (const auto& [id, m] : models_)
    models.push_back({{"id", m.id},
                      {"type", m.object_type},
                      {"cluster", m.cluster},
                      {"mesh", m.mesh},
                      {"thumbnail", m.thumbnail},
                      {"has_features", m.has_features}});
  j["models"] = std::move(models);
  auto metrics = nlohmann::ordered_json::array();
  for (const auto& [id, m] : metrics_)
    metrics.push_back({{"id", m.id},
                       {"file", m.file},
                       {"base", m.base},
                       {"triplet_sets", m.triplet_sets},
                       {"shape", m.shape},
                       {"config_hash", m.config_hash}});
  j["metrics"] = std::move(metrics);
  auto sets = nlohmann::ordered_json::array();
  for (const auto& [id, s] : sets_)
    sets.push_back({{"id", s.id}, {"file", s.file}, {"source", s.source}, {"label", s.label}, {"count", s.count}});
  j["triplet_sets"] = std::move(sets);
  j["counters"] = counters_;
  write_text_atomic(root_ / "catalog.json", j.dump(1) + "\n");
}

std::string Catalog::next_id(const std::string& prefix) {
  char buf[64];
  std::string id;
  do {
    std::snprintf(buf, sizeof buf, "%s-%04d", prefix.c_str(), ++counters_[prefix]);
    id = buf;
  } while (metrics_.count(id) || sets_.count(id));
  return id;
}

std::vector<ModelEntry> Catalog::models(const std::string& object_type) const {
  std::shared_lock lock(mu_);
  std::vector<ModelEntry> out;
  for (const auto& [id, m] : models_)
    if (object_type.empty() || m.object_type == object_type) out.push_back(m);
  return out;
}

std::optional<ModelEntry> Catalog::model(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = models_.find(id);
  if (it == models_.end()) return std::nullopt;
  return it->second;
}

std::vector<MetricEntry> Catalog::metrics() const {
  std::shared_lock lock(mu_);
  std::vector<MetricEntry> out{{kIdentityMetric, "", "identity", {}, "diagonal", features_.config_hash}};
  for (const auto& [id, m] : metrics_) out.push_back(m);
  return out;
}

WeightMatrix Catalog::metric(const std::string& id) const {
  if (id == kIdentityMetric) {
    int dim = kFeatureDims;
    if (!features_.vectors.empty()) dim = static_cast<int>(features_.vectors.begin()->second.values.size());
    return WeightMatrix::identity(dim, features_.config_hash);
  }
  fs::path file;
  {
    std::shared_lock lock(mu_);
    auto it = metrics_.find(id);
    if (it == metrics_.end()) throw NotFound("unknown metric '" + id + "'");
    file = root_ / it->second.file;
  }
  std::lock_guard cache_lock(cache_mu_);
  auto c = metric_cache_.find(id);
  if (c != metric_cache_.end()) return c->second;
  return metric_cache_.emplace(id, read_weights(file)).first->second;
}

std::string Catalog::add_metric(const WeightMatrix& w, const std::string& base, const std::vector<std::string>& sets) {
  std::unique_lock lock(mu_);
  const std::string id = next_id("metric");
  MetricEntry e{id, (fs::path("metrics") / (id + ".json")).string(), base, sets, to_string(w.shape), w.config_hash};
  write_weights(root_ / e.file, w);
  metrics_[id] = e;
  save_locked();
  return id;
}

std::vector<TripletSetEntry> Catalog::triplet_sets() const {
  std::shared_lock lock(mu_);
  std::vector<TripletSetEntry> out;
  for (const auto& [id, s] : sets_) out.push_back(s);
  return out;
}

TripletSetEntry Catalog::triplet_set_entry(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sets_.find(id);
  if (it == sets_.end()) throw NotFound("unknown triplet set '" + id + "'");
  return it->second;
}

std::vector<TripletRecord> Catalog::triplet_set(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sets_.find(id);
  if (it == sets_.end()) throw NotFound("unknown triplet set '" + id + "'");
  return read_triplets(root_ / it->second.file);
}

std::string Catalog::add_triplet_set(const std::vector<TripletRecord>& triplets, const std::string& source,
                                     const std::string& label) {
  std::unique_lock lock(mu_);
  const std::string id = next_id("set");
  TripletSetEntry e{id, (fs::path("triplets") / (id + ".jsonl")).string(), source, label, triplets.size()};
  write_triplets(root_ / e.file, triplets);
  sets_[id] = e;
  save_locked();
  return id;
}

std::size_t Catalog::append_triplets(const std::string& id, const std::vector<TripletRecord>& triplets,
                                     const std::string& source, const std::string& label) {
  if (!valid_id(id)) throw InvalidArgument("invalid triplet set id '" + id + "'");
  std::unique_lock lock(mu_);
  auto it = sets_.find(id);
  if (it == sets_.end())
    it = sets_.emplace(id, TripletSetEntry{id, (fs::path("triplets") / (id + ".jsonl")).string(), source, label, 0})
             .first;
  // rewrite through a temp file so readers never see a partial line
  const fs::path file = root_ / it->second.file;
  std::string text = fs::exists(file) ? read_text(file) : std::string();
  for (const auto& t : triplets) {
    validate(t);
    text += to_jsonl_line(t);
    text += '\n';
  }
  write_text_atomic(file, text);
  it->second.count += triplets.size();
  save_locked();
  return it->second.count;
}

}  // namespace stylemetric
