#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace stylemetric {

enum class TripletSource { crowd, user, simulated };

std::string to_string(TripletSource s);
TripletSource parse_triplet_source(const std::string& s);

/// a is closer in style to b than to c.
struct TripletRecord {
  std::string a, b, c;
  TripletSource source = TripletSource::simulated;
  std::pair<std::string, std::string> pair_types;  // (type of a, type of b and c)

  bool operator==(const TripletRecord&) const = default;
};

/// b != c and none of the ids empty.
void validate(const TripletRecord& t);

/// One JSON object per line with fields a, b, c, source, pair_types in that order.
std::string to_jsonl_line(const TripletRecord& t);
TripletRecord parse_jsonl_line(const std::string& line);

std::vector<TripletRecord> read_triplets(const std::filesystem::path& path);
/// Replaces the file atomically.
void write_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets);
/// Appends records; the file is created when missing.
void append_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets);

}  // namespace stylemetric
