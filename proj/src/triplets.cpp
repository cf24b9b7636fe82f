#include "stylemetric/triplets.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "stylemetric/error.hpp"
#include "stylemetric/rng.hpp"

namespace stylemetric {

// ------------------------------------------------------------ triplet records

std::string to_string(TripletSource s) {
  switch (s) {
    case TripletSource::crowd: return "crowd";
    case TripletSource::user: return "user";
    case TripletSource::simulated: return "simulated";
  }
  return "simulated";
}

TripletSource parse_triplet_source(const std::string& s) {
  if (s == "crowd") return TripletSource::crowd;
  if (s == "user") return TripletSource::user;
  if (s == "simulated") return TripletSource::simulated;
  throw InvalidArgument("unknown triplet source '" + s + "'");
}

void validate(const TripletRecord& t) {
  if (t.a.empty() || t.b.empty() || t.c.empty()) throw InvalidArgument("triplet with an empty model id");
  if (t.b == t.c) throw InvalidArgument("triplet (" + t.a + ", " + t.b + ", " + t.c + ") has b == c");
}

std::string to_jsonl_line(const TripletRecord& t) {
  nlohmann::ordered_json j;
  j["a"] = t.a;
  j["b"] = t.b;
  j["c"] = t.c;
  j["source"] = to_string(t.source);
  j["pair_types"] = {t.pair_types.first, t.pair_types.second};
  return j.dump();
}

TripletRecord parse_jsonl_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TripletRecord t;
    t.a = j.at("a").get<std::string>();
    t.b = j.at("b").get<std::string>();
    t.c = j.at("c").get<std::string>();
    t.source = parse_triplet_source(j.at("source").get<std::string>());
    const auto& p = j.at("pair_types");
    if (!p.is_array() || p.size() != 2) throw IoError("pair_types must hold two types");
    t.pair_types = {p[0].get<std::string>(), p[1].get<std::string>()};
    validate(t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad triplet line: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("bad triplet line: ") + e.what());
  }
}

std::vector<TripletRecord> read_triplets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open triplet file " + path.string());
  std::vector<TripletRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(parse_jsonl_line(line));
    } catch (const IoError& e) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string jsonl(const std::vector<TripletRecord>& triplets) {
  std::string text;
  for (const auto& t : triplets) {
    validate(t);
    text += to_jsonl_line(t);
    text += '\n';
  }
  return text;
}

}  // namespace

void write_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets) {
  write_text_atomic(path, jsonl(triplets));
}

void append_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets) {
  const std::string text = jsonl(triplets);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed appending to " + path.string());
}

// ------------------------------------------------------------ tasks

std::string to_string(const TypePair& p) { return p.first + "," + p.second; }

TypePair parse_type_pair(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == s.size() || s.find(',', comma + 1) != std::string::npos)
    throw InvalidArgument("type pair must look like X,Y: '" + s + "'");
  return {s.substr(0, comma), s.substr(comma + 1)};
}

void validate(const SixChoiceTask& task) {
  if (task.candidates.size() != static_cast<std::size_t>(kCandidatesPerTask))
    throw InvalidArgument("task " + task.task_id + " needs exactly six candidates");
  std::set<std::string> unique(task.candidates.begin(), task.candidates.end());
  if (unique.size() != task.candidates.size()) throw InvalidArgument("task " + task.task_id + " repeats a candidate");
  if (task.control_answer) {
    const auto& [p, q] = *task.control_answer;
    if (p == q || !unique.count(p) || !unique.count(q))
      throw InvalidArgument("control answer of " + task.task_id + " is not a 2-subset of its candidates");
  }
}

std::size_t HitBundle::control_count() const {
  return static_cast<std::size_t>(std::count_if(tasks.begin(), tasks.end(), [](const auto& t) { return t.is_control; }));
}

const SixChoiceTask& HitBundle::task(const std::string& task_id) const {
  for (const auto& t : tasks)
    if (t.task_id == task_id) return t;
  throw NotFound("no task '" + task_id + "' in HIT " + hit_id);
}

namespace {

bool same_subset(const IdPair& a, const IdPair& b) {
  return (a.first == b.first && a.second == b.second) || (a.first == b.second && a.second == b.first);
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

std::vector<TripletRecord> expand_six_choice(const SixChoiceTask& task, const TaskResponse& response,
                                             TripletSource source) {
  validate(task);
  const auto& [y1, y2] = response.selected;
  if (y1 == y2 || !contains(task.candidates, y1) || !contains(task.candidates, y2))
    throw InvalidArgument("selection for task " + task.task_id + " is not two distinct candidates");
  std::vector<TripletRecord> out;
  out.reserve(8);
  for (const auto& chosen : {y1, y2})
    for (const auto& other : task.candidates)
      if (other != y1 && other != y2) out.push_back({task.x, chosen, other, source, task.pair_types});
  return out;
}

std::vector<TripletRecord> expand_rerank(const std::string& env_model, const std::vector<std::string>& ranked,
                                         int top_k, TypePair pair_types, TripletSource source) {
  if (top_k < 0) throw InvalidArgument("top_k must be >= 0");
  std::set<std::string> seen;
  for (const auto& id : ranked)
    if (!seen.insert(id).second) throw InvalidArgument("ranking repeats model '" + id + "'");
  std::vector<TripletRecord> out;
  const std::size_t k = static_cast<std::size_t>(top_k);
  if (ranked.size() <= k) return out;
  out.reserve(k * (ranked.size() - k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = k; j < ranked.size(); ++j) out.push_back({env_model, ranked[i], ranked[j], source, pair_types});
  return out;
}

ControlCheck filter_by_controls(const HitBundle& bundle, const std::vector<TaskResponse>& responses) {
  std::map<std::string, const TaskResponse*> by_task;
  for (const auto& r : responses) by_task[r.task_id] = &r;
  ControlCheck check;
  for (const auto& t : bundle.tasks) {
    if (!t.is_control) continue;
    if (!t.control_answer) throw InvalidArgument("control task " + t.task_id + " has no stored answer");
    auto it = by_task.find(t.task_id);
    if (it == by_task.end()) throw InvalidArgument("no response for control task " + t.task_id);
    ++check.controls;
    if (same_subset(it->second->selected, *t.control_answer)) ++check.matches;
  }
  // matches/controls >= 0.8, compared in integers
  check.accepted = 5 * check.matches >= 4 * check.controls;
  return check;
}

// ------------------------------------------------------------ control pool

void ControlPool::add(SixChoiceTask task) {
  task.is_control = true;
  if (!task.control_answer) throw InvalidArgument("control task " + task.task_id + " needs an answer");
  validate(task);
  pools_[task.pair_types].push_back(std::move(task));
}

const std::vector<SixChoiceTask>& ControlPool::tasks(const TypePair& pair) const {
  static const std::vector<SixChoiceTask> none;
  auto it = pools_.find(pair);
  return it == pools_.end() ? none : it->second;
}

namespace {

nlohmann::ordered_json task_json(const SixChoiceTask& t, bool with_answer) {
  nlohmann::ordered_json j;
  j["task_id"] = t.task_id;
  j["x"] = t.x;
  j["candidates"] = t.candidates;
  j["pair_types"] = {t.pair_types.first, t.pair_types.second};
  j["is_control"] = t.is_control;
  if (with_answer && t.control_answer) j["control_answer"] = {t.control_answer->first, t.control_answer->second};
  return j;
}

SixChoiceTask task_from_json(const nlohmann::json& j) {
  SixChoiceTask t;
  t.task_id = j.at("task_id").get<std::string>();
  t.x = j.at("x").get<std::string>();
  t.candidates = j.at("candidates").get<std::vector<std::string>>();
  const auto& p = j.at("pair_types");
  t.pair_types = {p.at(0).get<std::string>(), p.at(1).get<std::string>()};
  t.is_control = j.value("is_control", false);
  if (j.contains("control_answer")) {
    const auto& a = j.at("control_answer");
    t.control_answer = IdPair{a.at(0).get<std::string>(), a.at(1).get<std::string>()};
  }
  validate(t);
  return t;
}

}  // namespace

nlohmann::ordered_json ControlPool::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "control_pool";
  auto tasks = nlohmann::ordered_json::array();
  for (const auto& [pair, list] : pools_)
    for (const auto& t : list) tasks.push_back(task_json(t, true));
  j["tasks"] = std::move(tasks);
  return j;
}

ControlPool ControlPool::from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "control_pool") throw IoError("not a control pool");
    ControlPool pool;
    for (const auto& t : j.at("tasks")) pool.add(task_from_json(t));
    return pool;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad control pool: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("bad control pool: ") + e.what());
  }
}

void ControlPool::save(const std::filesystem::path& path) const { write_text_atomic(path, to_json().dump(1) + "\n"); }

ControlPool ControlPool::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad control pool " + path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------ generation

namespace {

std::vector<std::string> ids_of_type(const FeatureMap& features, const std::string& type) {
  std::vector<std::string> ids;
  for (const auto& [id, fv] : features)
    if (fv.object_type == type) ids.push_back(id);
  return ids;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const FeatureVector& lookup(const FeatureMap& features, const std::string& id) {
  auto it = features.find(id);
  if (it == features.end()) throw NotFound("no features for model '" + id + "'");
  return it->second;
}

std::vector<std::string> pick(Rng& rng, const std::vector<std::string>& from, std::size_t k) {
  std::vector<std::string> out;
  for (auto i : rng.sample_without_replacement(from.size(), k)) out.push_back(from[i]);
  return out;
}

}  // namespace

IdPair nearest_two(const SixChoiceTask& task, const WeightMatrix& w, const FeatureMap& features) {
  validate(task);
  const FeatureVector& x = lookup(features, task.x);
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& c : task.candidates) scored.emplace_back(distance(x, lookup(features, c), w), c);
  std::sort(scored.begin(), scored.end());
  return {scored[0].second, scored[1].second};
}

std::string nearest_of_type(const std::string& x, const std::vector<std::string>& pool, const WeightMatrix& w,
                            const FeatureMap& features) {
  const FeatureVector& fx = lookup(features, x);
  std::string best;
  double best_d = 0;
  for (const auto& y : pool) {
    if (y == x) continue;
    const double d = distance(fx, lookup(features, y), w);
    if (best.empty() || d < best_d || (d == best_d && y < best)) {
      best = y;
      best_d = d;
    }
  }
  if (best.empty()) throw InvalidArgument("no candidate besides the reference model");
  return best;
}

SixChoiceTask random_six_choice(const TypePair& pair, const FeatureMap& features, std::uint64_t seed,
                                std::string task_id) {
  const auto xs = ids_of_type(features, pair.first);
  const auto ys = ids_of_type(features, pair.second);
  if (xs.empty()) throw InvalidArgument("no models of type '" + pair.first + "'");
  Rng rng(mix_seed(seed, hash_string(task_id)));
  SixChoiceTask t;
  t.task_id = std::move(task_id);
  t.pair_types = pair;
  t.x = xs[rng.below(xs.size())];
  std::vector<std::string> pool;
  for (const auto& y : ys)
    if (y != t.x) pool.push_back(y);
  if (pool.size() < static_cast<std::size_t>(kCandidatesPerTask))
    throw InvalidArgument("type '" + pair.second + "' has fewer than six candidates");
  t.candidates = pick(rng, pool, kCandidatesPerTask);
  return t;
}

ControlPool build_control_pool(const TypePair& pair, const FeatureMap& features, const WeightMatrix& answer_metric,
                               int count, std::uint64_t seed) {
  ControlPool pool;
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "control-%03d", i);
    SixChoiceTask t = random_six_choice(pair, features, mix_seed(seed, hash_string("controls")),
                                        to_string(pair) + ":" + id);
    t.is_control = true;
    t.control_answer = nearest_two(t, answer_metric, features);
    pool.add(std::move(t));
  }
  return pool;
}

HitBundle generate_hit_tasks(const TypePair& pair, const std::optional<WeightMatrix>& w, const FeatureMap& features,
                             std::uint64_t seed, const ControlPool* controls, const HitOptions& options) {
  const auto xs = ids_of_type(features, pair.first);
  const auto ys = ids_of_type(features, pair.second);
  if (xs.empty()) throw InvalidArgument("no models of type '" + pair.first + "'");
  if (ys.size() < 7)
    throw InvalidArgument("type '" + pair.second + "' needs at least 7 models, has " + std::to_string(ys.size()));
  const int n_controls = controls ? options.controls : 0;
  if (n_controls < 0 || n_controls > options.tasks) throw InvalidArgument("bad control count");

  HitBundle bundle;
  bundle.pair_types = pair;
  bundle.hit_id = options.hit_id.empty() ? "hit-" + pair.first + "-" + pair.second + "-" + hex(seed) : options.hit_id;
  Rng rng(mix_seed(seed, hash_string("hit:" + to_string(pair))));

  for (int i = 0; i < options.tasks - n_controls; ++i) {
    SixChoiceTask t;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "-%02d", i);
    t.task_id = bundle.hit_id + suffix;
    t.pair_types = pair;
    t.x = xs[rng.below(xs.size())];
    std::vector<std::string> others;
    if (w) {
      const std::string nearest = nearest_of_type(t.x, ys, *w, features);
      for (const auto& y : ys)
        if (y != t.x && y != nearest) others.push_back(y);
      t.candidates = pick(rng, others, kCandidatesPerTask - 1);
      t.candidates.push_back(nearest);
    } else {
      for (const auto& y : ys)
        if (y != t.x) others.push_back(y);
      t.candidates = pick(rng, others, kCandidatesPerTask);
    }
    rng.shuffle(t.candidates);
    bundle.tasks.push_back(std::move(t));
  }

  if (n_controls > 0) {
    const auto& pool = controls->tasks(pair);
    if (pool.size() < static_cast<std::size_t>(n_controls))
      throw InvalidArgument("control pool for " + to_string(pair) + " has " + std::to_string(pool.size()) +
                            " tasks, need " + std::to_string(n_controls));
    for (auto i : rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(n_controls)))
      bundle.tasks.push_back(pool[i]);
  }
  rng.shuffle(bundle.tasks);
  return bundle;
}

// ------------------------------------------------------------ bundle files

nlohmann::ordered_json to_json(const HitBundle& bundle, const std::string& image_dir) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "hit_bundle";
  j["hit_id"] = bundle.hit_id;
  j["pair_types"] = {bundle.pair_types.first, bundle.pair_types.second};
  auto tasks = nlohmann::ordered_json::array();
  for (const auto& t : bundle.tasks) {
    auto tj = task_json(t, false);
    tj.erase("is_control");  // annotators must not see which tasks are controls
    nlohmann::ordered_json images;
    images[t.x] = image_dir + "/" + t.x + ".png";
    for (const auto& c : t.candidates) images[c] = image_dir + "/" + c + ".png";
    tj["images"] = std::move(images);
    tasks.push_back(std::move(tj));
  }
  j["tasks"] = std::move(tasks);
  j["response_format"] = {{"kind", "hit_responses"},
                          {"fields", {"task_id", "selected", "responder_id"}},
                          {"selected", "exactly two candidate ids"}};
  return j;
}

HitBundle hit_bundle_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "hit_bundle") throw IoError("not a HIT bundle");
    HitBundle b;
    b.hit_id = j.at("hit_id").get<std::string>();
    b.pair_types = {j.at("pair_types").at(0).get<std::string>(), j.at("pair_types").at(1).get<std::string>()};
    for (const auto& t : j.at("tasks")) b.tasks.push_back(task_from_json(t));
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad HIT bundle: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("bad HIT bundle: ") + e.what());
  }
}

void write_hit_bundle(const std::filesystem::path& path, const HitBundle& bundle, const std::string& image_dir) {
  write_text_atomic(path, to_json(bundle, image_dir).dump(1) + "\n");
}

HitBundle read_hit_bundle(const std::filesystem::path& path) {
  try {
    return hit_bundle_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad HIT bundle " + path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json to_json(const TaskResponse& r) {
  nlohmann::ordered_json j;
  j["task_id"] = r.task_id;
  j["selected"] = {r.selected.first, r.selected.second};
  j["responder_id"] = r.responder_id;
  return j;
}

TaskResponse task_response_from_json(const nlohmann::json& j) {
  TaskResponse r;
  r.task_id = j.at("task_id").get<std::string>();
  const auto& s = j.at("selected");
  if (!s.is_array() || s.size() != 2) throw InvalidArgument("response " + r.task_id + " must select exactly two");
  r.selected = {s[0].get<std::string>(), s[1].get<std::string>()};
  r.responder_id = j.value("responder_id", "");
  return r;
}

void write_responses(const std::filesystem::path& path, const std::string& hit_id,
                     const std::vector<TaskResponse>& responses) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "hit_responses";
  j["hit_id"] = hit_id;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : responses) arr.push_back(to_json(r));
  j["responses"] = std::move(arr);
  write_text_atomic(path, j.dump(1) + "\n");
}

std::vector<TaskResponse> read_responses(const std::filesystem::path& path, const std::string& hit_id) {
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    if (j.at("kind").get<std::string>() != "hit_responses") throw IoError(path.string() + " is not a response file");
    if (j.at("hit_id").get<std::string>() != hit_id)
      throw IoError(path.string() + " answers HIT " + j.at("hit_id").get<std::string>() + ", expected " + hit_id);
    std::vector<TaskResponse> out;
    for (const auto& r : j.at("responses")) out.push_back(task_response_from_json(r));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad response file " + path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError("bad response file " + path.string() + ": " + e.what());
  }
}

}  // namespace stylemetric
