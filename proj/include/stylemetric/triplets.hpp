#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stylemetric/feature_vector.hpp"
#include "stylemetric/metric.hpp"
#include "stylemetric/triplet_record.hpp"

namespace stylemetric {

inline constexpr int kCandidatesPerTask = 6;
inline constexpr int kTasksPerHit = 25;
inline constexpr int kControlsPerHit = 5;
inline constexpr double kControlAcceptance = 0.8;
inline constexpr int kRerankTopK = 10;

using TypePair = std::pair<std::string, std::string>;  // (X type, Y type)
using IdPair = std::pair<std::string, std::string>;

std::string to_string(const TypePair& p);  // "X,Y"
TypePair parse_type_pair(const std::string& s);

/// Reference model x and six candidates of one type, two of which get picked.
struct SixChoiceTask {
  std::string task_id;
  std::string x;
  std::vector<std::string> candidates;
  TypePair pair_types;
  bool is_control = false;
  std::optional<IdPair> control_answer;

  bool operator==(const SixChoiceTask&) const = default;
};

/// Throws InvalidArgument unless there are six distinct candidates.
void validate(const SixChoiceTask& task);

struct HitBundle {
  std::string hit_id;
  TypePair pair_types;
  std::vector<SixChoiceTask> tasks;

  std::size_t control_count() const;
  const SixChoiceTask& task(const std::string& task_id) const;
};

struct TaskResponse {
  std::string task_id;
  IdPair selected;
  std::string responder_id;

  bool operator==(const TaskResponse&) const = default;
};

/// Eight triplets (x, chosen, not chosen).
std::vector<TripletRecord> expand_six_choice(const SixChoiceTask& task, const TaskResponse& response,
                                             TripletSource source = TripletSource::crowd);

/// 10·(n−10) triplets (env, top-k member, rest member); empty when n <= top_k.
std::vector<TripletRecord> expand_rerank(const std::string& env_model, const std::vector<std::string>& ranked,
                                         int top_k = kRerankTopK, TypePair pair_types = {},
                                         TripletSource source = TripletSource::user);

struct ControlCheck {
  int matches = 0;
  int controls = 0;
  bool accepted = false;
};

/// Accepts when at least 80% of the bundle's controls were answered exactly.
ControlCheck filter_by_controls(const HitBundle& bundle, const std::vector<TaskResponse>& responses);

/// Curated control tasks per type pair.
class ControlPool {
public:
  void add(SixChoiceTask task);
  const std::vector<SixChoiceTask>& tasks(const TypePair& pair) const;
  bool empty() const { return pools_.empty(); }

  nlohmann::ordered_json to_json() const;
  static ControlPool from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ControlPool load(const std::filesystem::path& path);

private:
  std::map<TypePair, std::vector<SixChoiceTask>> pools_;
};

/// Random tasks answered by the two nearest candidates under `answer_metric`.
ControlPool build_control_pool(const TypePair& pair, const FeatureMap& features, const WeightMatrix& answer_metric,
                               int count, std::uint64_t seed);

/// The two candidates nearest to x under w, ties broken by id.
IdPair nearest_two(const SixChoiceTask& task, const WeightMatrix& w, const FeatureMap& features);

/// Model of type `type` nearest to x under w (x itself excluded), ties by id.
std::string nearest_of_type(const std::string& x, const std::vector<std::string>& pool, const WeightMatrix& w,
                            const FeatureMap& features);

struct HitOptions {
  int tasks = kTasksPerHit;
  int controls = kControlsPerHit;
  std::string hit_id;  // derived from pair and seed when empty
};

/// One HIT for the pair. With a metric, every regular task holds the model
/// nearest to its x plus five random others; without, six random candidates.
HitBundle generate_hit_tasks(const TypePair& pair, const std::optional<WeightMatrix>& w, const FeatureMap& features,
                             std::uint64_t seed, const ControlPool* controls = nullptr, const HitOptions& options = {});

/// Randomly chosen x of type X plus six of type Y.
SixChoiceTask random_six_choice(const TypePair& pair, const FeatureMap& features, std::uint64_t seed,
                                std::string task_id);

/// Bundle file for external annotation. Control answers are not written.
nlohmann::ordered_json to_json(const HitBundle& bundle, const std::string& image_dir = "thumbnails");
HitBundle hit_bundle_from_json(const nlohmann::json& j);
void write_hit_bundle(const std::filesystem::path& path, const HitBundle& bundle,
                      const std::string& image_dir = "thumbnails");
HitBundle read_hit_bundle(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const TaskResponse& r);
TaskResponse task_response_from_json(const nlohmann::json& j);
void write_responses(const std::filesystem::path& path, const std::string& hit_id,
                     const std::vector<TaskResponse>& responses);
/// Returns the responses of a response file; checks the hit id.
std::vector<TaskResponse> read_responses(const std::filesystem::path& path, const std::string& hit_id);

}  // namespace stylemetric
