#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "stylemetric/error.hpp"
#include "stylemetric/synthetic.hpp"
#include "stylemetric/triplets.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace stylemetric;
using testing::TempDir;

namespace {

SixChoiceTask task_of(std::string id = "t1") {
  return {std::move(id), "x", {"y1", "y2", "y3", "y4", "y5", "y6"}, {"chair", "table"}, false, std::nullopt};
}

HitBundle bundle_with_controls(int controls) {
  HitBundle b;
  b.hit_id = "h";
  b.pair_types = {"chair", "table"};
  for (int i = 0; i < 20; ++i) b.tasks.push_back(task_of("r" + std::to_string(i)));
  for (int i = 0; i < controls; ++i) {
    SixChoiceTask t = task_of("c" + std::to_string(i));
    t.is_control = true;
    t.control_answer = IdPair{"y1", "y2"};
    b.tasks.push_back(t);
  }
  return b;
}

std::vector<TaskResponse> answer_controls(const HitBundle& b, int correct) {
  std::vector<TaskResponse> out;
  int seen = 0;
  for (const auto& t : b.tasks) {
    if (!t.is_control) {
      out.push_back({t.task_id, {"y3", "y4"}, "w"});
      continue;
    }
    // correct answers in either order
    const bool right = seen++ < correct;
    out.push_back({t.task_id, right ? IdPair{"y2", "y1"} : IdPair{"y1", "y3"}, "w"});
  }
  return out;
}

SyntheticCorpus corpus() {
  SyntheticSpec spec;
  spec.dim = 20;
  spec.informative = 4;
  spec.models_per_type = 20;
  return make_synthetic_corpus(spec);
}

}  // namespace

TEST_CASE("six-choice expansion gives eight triplets (x, chosen, unchosen)") {
  const SixChoiceTask t = task_of();
  const auto trips = expand_six_choice(t, {"t1", {"y2", "y5"}, "w"});
  REQUIRE(trips.size() == 8);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : trips) {
    CHECK(r.a == "x");
    CHECK((r.b == "y2" || r.b == "y5"));
    CHECK(r.c != "y2");
    CHECK(r.c != "y5");
    CHECK(r.source == TripletSource::crowd);
    CHECK(r.pair_types == TypePair{"chair", "table"});
    pairs.insert({r.b, r.c});
  }
  CHECK(pairs.size() == 8);
  CHECK_THROWS_AS(expand_six_choice(t, {"t1", {"y2", "y2"}, "w"}), InvalidArgument);
  CHECK_THROWS_AS(expand_six_choice(t, {"t1", {"y2", "zz"}, "w"}), InvalidArgument);
  SixChoiceTask five = t;
  five.candidates.pop_back();
  CHECK_THROWS_AS(expand_six_choice(five, {"t1", {"y1", "y2"}, "w"}), InvalidArgument);
  SixChoiceTask dup = t;
  dup.candidates[5] = "y1";
  CHECK_THROWS_AS(validate(dup), InvalidArgument);
}

TEST_CASE("rerank expansion gives 10 x (n - 10) triplets") {
  std::vector<std::string> ranked;
  for (int i = 0; i < 31; ++i) ranked.push_back("m" + std::to_string(i));
  const auto trips = expand_rerank("env", ranked);
  CHECK(trips.size() == 210);
  std::set<std::string> top(ranked.begin(), ranked.begin() + 10);
  for (const auto& t : trips) {
    CHECK(t.a == "env");
    CHECK(top.count(t.b) == 1);
    CHECK(top.count(t.c) == 0);
    CHECK(t.source == TripletSource::user);
  }
  for (int n : {0, 5, 10}) CHECK(expand_rerank("env", std::vector<std::string>(ranked.begin(), ranked.begin() + n)).empty());
  CHECK(expand_rerank("env", std::vector<std::string>(ranked.begin(), ranked.begin() + 11)).size() == 10);
  ranked.push_back("m3");
  CHECK_THROWS_AS(expand_rerank("env", ranked), InvalidArgument);
}

TEST_CASE("control filter accepts 4 of 5 and rejects 3 of 5") {
  const HitBundle b = bundle_with_controls(5);
  CHECK(b.control_count() == 5);
  for (int correct = 0; correct <= 5; ++correct) {
    const ControlCheck c = filter_by_controls(b, answer_controls(b, correct));
    CHECK(c.controls == 5);
    CHECK(c.matches == correct);
    CHECK(c.accepted == (correct >= 4));
  }
  // the 80% rule for other control counts
  const HitBundle ten = bundle_with_controls(10);
  CHECK(filter_by_controls(ten, answer_controls(ten, 8)).accepted);
  CHECK_FALSE(filter_by_controls(ten, answer_controls(ten, 7)).accepted);
  // a missing control answer is an error
  auto partial = answer_controls(b, 5);
  partial.pop_back();
  CHECK_THROWS_AS(filter_by_controls(b, partial), InvalidArgument);
}

TEST_CASE("triplet JSONL lines round-trip in field order") {
  const TripletRecord t{"a", "b", "c", TripletSource::user, {"chair", "table"}};
  const std::string line = to_jsonl_line(t);
  CHECK(line == R"({"a":"a","b":"b","c":"c","source":"user","pair_types":["chair","table"]})");
  CHECK(parse_jsonl_line(line) == t);
  CHECK_THROWS_AS(parse_jsonl_line(R"({"a":"a","b":"b","c":"b","source":"user","pair_types":["x","y"]})"), IoError);
  CHECK_THROWS_AS(parse_jsonl_line(R"({"a":"a","b":"b","c":"c","source":"elves","pair_types":["x","y"]})"), IoError);
  CHECK_THROWS_AS(parse_jsonl_line("{"), IoError);
  for (auto s : {TripletSource::crowd, TripletSource::user, TripletSource::simulated})
    CHECK(parse_triplet_source(to_string(s)) == s);
}

TEST_CASE("triplet files: write, append, re-read bit-identically") {
  TempDir dir;
  const SyntheticCorpus c = corpus();
  const auto trips = testing::oracle_triplets(c.features, c.w_star.diag, "chair", "table", 200, 3);
  write_triplets(dir / "t.jsonl", trips);
  CHECK(read_triplets(dir / "t.jsonl") == trips);
  write_triplets(dir / "u.jsonl", read_triplets(dir / "t.jsonl"));
  CHECK(testing::slurp(dir / "t.jsonl") == testing::slurp(dir / "u.jsonl"));

  append_triplets(dir / "sub/a.jsonl", {trips.begin(), trips.begin() + 50});
  append_triplets(dir / "sub/a.jsonl", {trips.begin() + 50, trips.end()});
  CHECK(testing::slurp(dir / "sub/a.jsonl") == testing::slurp(dir / "t.jsonl"));

  testing::write_file(dir / "bad.jsonl", to_jsonl_line(trips[0]) + "\nnot json\n");
  try {
    read_triplets(dir / "bad.jsonl");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_triplets(dir / "none.jsonl"), IoError);
  CHECK_THROWS_AS(write_triplets(dir / "x.jsonl", {{"a", "b", "b", TripletSource::user, {}}}), InvalidArgument);
}

TEST_CASE("type pairs") {
  CHECK(parse_type_pair("chair,table") == TypePair{"chair", "table"});
  CHECK(to_string(TypePair{"a", "b"}) == "a,b");
  for (const char* bad : {"chair", ",table", "chair,", "a,b,c"}) CHECK_THROWS_AS(parse_type_pair(bad), InvalidArgument);
}

TEST_CASE("HIT generation with and without a metric") {
  const SyntheticCorpus c = corpus();
  const auto& fm = c.features.vectors;
  const TypePair pair{"chair", "table"};
  const HitBundle random = generate_hit_tasks(pair, std::nullopt, fm, 11);
  CHECK(random.tasks.size() == 25);
  CHECK(random.control_count() == 0);
  std::set<std::string> ids;
  for (const auto& t : random.tasks) {
    validate(t);
    ids.insert(t.task_id);
    CHECK(fm.at(t.x).object_type == "chair");
    for (const auto& y : t.candidates) CHECK(fm.at(y).object_type == "table");
  }
  CHECK(ids.size() == 25);

  // with a metric every regular task holds x's nearest table
  const HitBundle guided = generate_hit_tasks(pair, c.w_star, fm, 11);
  const auto tables = c.features.ids_of_type("table");
  for (const auto& t : guided.tasks) {
    const std::string nn = nearest_of_type(t.x, tables, c.w_star, fm);
    CHECK(std::find(t.candidates.begin(), t.candidates.end(), nn) != t.candidates.end());
    // test-side nearest
    std::string best;
    double bd = 1e300;
    for (const auto& y : tables) {
      const double d = testing::weighted_sq(c.w_star.diag, fm.at(t.x).values, fm.at(y).values);
      if (d < bd) bd = d, best = y;
    }
    CHECK(nn == best);
  }

  // deterministic in the seed
  const HitBundle again = generate_hit_tasks(pair, c.w_star, fm, 11);
  REQUIRE(again.tasks.size() == guided.tasks.size());
  for (std::size_t i = 0; i < again.tasks.size(); ++i) CHECK(again.tasks[i] == guided.tasks[i]);

  // controls from the pool
  const ControlPool pool = build_control_pool(pair, fm, c.w_star, 12, 5);
  REQUIRE(pool.tasks(pair).size() == 12);
  const HitBundle mixed = generate_hit_tasks(pair, c.w_star, fm, 11, &pool);
  CHECK(mixed.tasks.size() == 25);
  CHECK(mixed.control_count() == 5);
  for (const auto& t : mixed.tasks)
    if (t.is_control) CHECK(*t.control_answer == nearest_two(t, c.w_star, fm));

  CHECK_THROWS_AS(generate_hit_tasks({"lamp", "table"}, std::nullopt, fm, 1), InvalidArgument);
  ControlPool tiny;
  tiny.add(pool.tasks(pair)[0]);
  CHECK_THROWS_AS(generate_hit_tasks(pair, std::nullopt, fm, 1, &tiny), InvalidArgument);
}

TEST_CASE("nearest_two picks the two closest candidates") {
  FeatureMap fm;
  auto put = [&](const std::string& id, const std::string& type, double v) {
    fm[id] = {id, type, type, "", Eigen::VectorXd::Constant(1, v), {}};
  };
  put("x", "chair", 0);
  put("y1", "table", 5);
  put("y2", "table", -1);
  put("y3", "table", 3);
  put("y4", "table", 0.5);
  put("y5", "table", 9);
  put("y6", "table", -2);
  const IdPair p = nearest_two(task_of(), WeightMatrix::identity(1, ""), fm);
  CHECK(p == IdPair{"y4", "y2"});
  CHECK(nearest_of_type("x", {"x", "y5", "y1"}, WeightMatrix::identity(1, ""), fm) == "y1");
  CHECK_THROWS_AS(nearest_of_type("x", {"x"}, WeightMatrix::identity(1, ""), fm), InvalidArgument);
  CHECK_THROWS_AS(nearest_of_type("ghost", {"y1"}, WeightMatrix::identity(1, ""), fm), NotFound);
}

TEST_CASE("HIT bundle and response files") {
  TempDir dir;
  const SyntheticCorpus c = corpus();
  const TypePair pair{"chair", "table"};
  const ControlPool pool = build_control_pool(pair, c.features.vectors, c.w_star, 8, 2);
  const HitBundle b = generate_hit_tasks(pair, std::nullopt, c.features.vectors, 3, &pool);
  write_hit_bundle(dir / "h.hit.json", b, "img");
  const std::string text = testing::slurp(dir / "h.hit.json");
  CHECK(text.find("control_answer") == std::string::npos);
  CHECK(text.find("is_control") == std::string::npos);
  CHECK(text.find("img/" + b.tasks[0].x + ".png") != std::string::npos);

  const HitBundle back = read_hit_bundle(dir / "h.hit.json");
  CHECK(back.hit_id == b.hit_id);
  CHECK(back.pair_types == b.pair_types);
  REQUIRE(back.tasks.size() == b.tasks.size());
  for (std::size_t i = 0; i < b.tasks.size(); ++i) {
    CHECK(back.tasks[i].candidates == b.tasks[i].candidates);
    CHECK_FALSE(back.tasks[i].is_control);
  }
  CHECK_THROWS_AS(b.task("nope"), NotFound);

  std::vector<TaskResponse> rs;
  for (const auto& t : b.tasks) rs.push_back({t.task_id, {t.candidates[0], t.candidates[3]}, "worker-1"});
  write_responses(dir / "h.responses.json", b.hit_id, rs);
  CHECK(read_responses(dir / "h.responses.json", b.hit_id) == rs);
  CHECK_THROWS_AS(read_responses(dir / "h.responses.json", "other"), IoError);
  testing::write_file(dir / "three.json",
                      R"({"kind":"hit_responses","hit_id":"h","responses":[{"task_id":"a","selected":["1","2","3"]}]})");
  CHECK_THROWS_AS(read_responses(dir / "three.json", "h"), IoError);
  CHECK_THROWS_AS(read_hit_bundle(dir / "three.json"), IoError);
}

TEST_CASE("control pools round-trip with their answers") {
  TempDir dir;
  const SyntheticCorpus c = corpus();
  const TypePair pair{"chair", "table"};
  const ControlPool pool = build_control_pool(pair, c.features.vectors, c.w_star, 6, 9);
  pool.save(dir / "pool.json");
  const ControlPool back = ControlPool::load(dir / "pool.json");
  REQUIRE(back.tasks(pair).size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back.tasks(pair)[i] == pool.tasks(pair)[i]);
  CHECK(back.tasks({"table", "chair"}).empty());
  SixChoiceTask unanswered = task_of();
  ControlPool p2;
  CHECK_THROWS_AS(p2.add(unanswered), InvalidArgument);
  unanswered.control_answer = IdPair{"y1", "zz"};
  CHECK_THROWS_AS(p2.add(unanswered), InvalidArgument);
}
