#include "stylemetric/server.hpp"

#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "stylemetric/error.hpp"
#include "stylemetric/feature_layout.hpp"
#include "stylemetric/iterative.hpp"
#include "stylemetric/log.hpp"
#include "stylemetric/rng.hpp"
#include "stylemetric/search.hpp"
#include "stylemetric/triplets.hpp"

namespace stylemetric {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void reply(httplib::Response& res, const ojson& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, ojson{{"error", message}, {"status", status}}, status);
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed JSON body: ") + e.what());
  }
}

std::string param(const httplib::Request& req, const std::string& key, const std::string& fallback = "") {
  return req.has_param(key) ? req.get_param_value(key) : fallback;
}

std::string sanitize_label(std::string label) {
  if (label.empty()) return "anonymous";
  for (auto& c : label)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return label;
}

struct Job {
  std::string id;
  std::string status = "queued";  // queued | running | done | failed
  std::vector<std::string> sets;
  std::string base;
  TrainConfig config;
  std::string metric_id;
  std::string error;
};

ojson job_json(const Job& j) {
  ojson o;
  o["job_id"] = j.id;
  o["status"] = j.status;
  o["triplet_sets"] = j.sets;
  o["base"] = j.base;
  o["shape"] = to_string(j.config.shape);
  o["metric_id"] = j.metric_id.empty() ? ojson() : ojson(j.metric_id);
  if (!j.error.empty()) o["error"] = j.error;
  return o;
}

}  // namespace

struct StyleServer::Impl {
  Catalog& catalog;
  ServerOptions options;
  httplib::Server http;

  std::mutex task_mu;
  std::map<std::string, SixChoiceTask> pending;
  std::deque<std::string> pending_order;
  std::uint64_t task_counter = 0;

  std::mutex job_mu;
  std::condition_variable job_cv;
  std::map<std::string, Job> jobs;
  std::deque<std::string> queue;
  int job_counter = 0;
  bool stopping = false;
  std::thread worker;

  Impl(Catalog& c, ServerOptions o) : catalog(c), options(std::move(o)) {
    routes();
    worker = std::thread([this] { work(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(job_mu);
      stopping = true;
    }
    job_cv.notify_all();
    http.stop();
    if (worker.joinable()) worker.join();
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  // Maps library errors onto HTTP status codes.
  static httplib::Server::Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const NotFound& e) {
        reply_error(res, 404, e.what());
      } catch (const ConfigMismatch& e) {
        reply_error(res, 409, e.what());
      } catch (const InvalidArgument& e) {
        reply_error(res, 422, e.what());
      } catch (const IoError& e) {
        reply_error(res, 400, e.what());
      } catch (const json::exception& e) {
        reply_error(res, 400, std::string("bad request field: ") + e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
      }
    };
  }

  const FeatureMap& features() const { return catalog.features().vectors; }

  std::string thumbnail_url(const ModelEntry& m) const {
    return m.thumbnail.empty() ? std::string() : "/thumbnails/" + m.id + ".png";
  }

  ojson model_json(const ModelEntry& m) const {
    ojson o{{"id", m.id}, {"type", m.object_type}, {"cluster", m.cluster}, {"has_features", m.has_features}};
    const auto url = thumbnail_url(m);
    o["thumbnail_url"] = url.empty() ? ojson() : ojson(url);
    return o;
  }

  ojson task_json(const SixChoiceTask& t) const {
    ojson o;
    o["task_id"] = t.task_id;
    o["pair_types"] = {t.pair_types.first, t.pair_types.second};
    auto entry = [&](const std::string& id) {
      auto m = catalog.model(id);
      return m ? model_json(*m) : ojson{{"id", id}};
    };
    o["x"] = entry(t.x);
    auto cands = ojson::array();
    for (const auto& c : t.candidates) cands.push_back(entry(c));
    o["candidates"] = std::move(cands);
    return o;
  }

  void routes() {
    http.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
      reply(res, {{"status", "ok"}});
    }));

    http.Get("/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto arr = ojson::array();
      for (const auto& m : catalog.models(param(req, "type"))) arr.push_back(model_json(m));
      reply(res, {{"models", std::move(arr)}});
    }));

    http.Get(R"(/thumbnails/([A-Za-z0-9_.\-]+)\.png)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto m = catalog.model(req.matches[1]);
      if (!m || m->thumbnail.empty()) throw NotFound("no thumbnail for '" + std::string(req.matches[1]) + "'");
      res.set_content(read_text(catalog.root() / m->thumbnail), "image/png");
    }));

    http.Get("/search", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string query = param(req, "query");
      if (query.empty()) throw InvalidArgument("missing query parameter");
      auto q = features().find(query);
      if (q == features().end()) throw NotFound("unknown query model '" + query + "'");
      const std::string type = param(req, "type", q->second.object_type);
      const std::string metric_id = param(req, "metric", kIdentityMetric);
      int k = options.default_k;
      if (req.has_param("k")) {
        try {
          k = std::stoi(req.get_param_value("k"));
        } catch (const std::exception&) {
          throw InvalidArgument("k must be an integer");
        }
      }
      const WeightMatrix w = catalog.metric(metric_id);
      check_compatible(w, catalog.features());
      auto body = to_json(search(features(), w, query, type), k);
      body["metric"] = metric_id;
      reply(res, body);
    }));

    http.Post("/rerank", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const std::string env = body.at("env_model").get<std::string>();
      const auto ranked = body.at("ranked_ids").get<std::vector<std::string>>();
      const int top_k = body.value("top_k", kRerankTopK);
      const std::string label = sanitize_label(body.value("user", std::string()));
      if (!features().count(env)) throw NotFound("unknown env_model '" + env + "'");
      if (ranked.empty()) throw InvalidArgument("ranked_ids is empty");
      std::string type;
      for (const auto& id : ranked) {
        auto it = features().find(id);
        if (it == features().end()) throw InvalidArgument("ranked_ids contains unknown model '" + id + "'");
        if (type.empty()) type = it->second.object_type;
        if (it->second.object_type != type) throw InvalidArgument("ranked_ids mixes object types");
      }
      std::set<std::string> expected;
      for (const auto& [id, fv] : features())
        if (fv.object_type == type && id != env) expected.insert(id);
      const std::set<std::string> given(ranked.begin(), ranked.end());
      if (given.size() != ranked.size()) throw InvalidArgument("ranked_ids repeats a model");
      if (given.count(env)) throw InvalidArgument("env_model cannot appear in its own ranking");
      if (given != expected) throw InvalidArgument("ranked_ids must list every model of type '" + type + "'");
      const auto triplets =
          expand_rerank(env, ranked, top_k, {features().at(env).object_type, type}, TripletSource::user);
      const std::string set_id = catalog.add_triplet_set(triplets, "user", label);
      reply(res, {{"triplet_count", triplets.size()}, {"triplet_set", set_id}, {"env_model", env}});
    }));

    http.Get("/sixchoice/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const TypePair pair{param(req, "pairX"), param(req, "pairY")};
      if (pair.first.empty() || pair.second.empty()) throw InvalidArgument("pairX and pairY are required");
      SixChoiceTask task;
      {
        std::lock_guard lock(task_mu);
        const std::uint64_t n = ++task_counter;
        char id[48];
        std::snprintf(id, sizeof id, "six-%06llu", static_cast<unsigned long long>(n));
        task = random_six_choice(pair, features(), mix_seed(options.seed, n), id);
        pending[task.task_id] = task;
        pending_order.push_back(task.task_id);
        while (pending_order.size() > options.max_pending_tasks) {
          pending.erase(pending_order.front());
          pending_order.pop_front();
        }
      }
      reply(res, task_json(task));
    }));

    http.Post(R"(/sixchoice/([A-Za-z0-9_.\-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string task_id = req.matches[1];
      const json body = parse_body(req);
      SixChoiceTask task;
      {
        std::lock_guard lock(task_mu);
        auto it = pending.find(task_id);
        if (it == pending.end()) throw NotFound("unknown or already answered task '" + task_id + "'");
        task = it->second;
      }
      const auto& sel = body.at("selected");
      if (!sel.is_array() || sel.size() != 2) throw InvalidArgument("selected must hold exactly two model ids");
      TaskResponse r{task_id, {sel[0].get<std::string>(), sel[1].get<std::string>()},
                     body.value("user", std::string())};
      const auto triplets = expand_six_choice(task, r, TripletSource::user);
      const std::string label = sanitize_label(body.value("user", std::string()));
      const std::string set_id = body.value("triplet_set", "user-" + label + "-sixchoice");
      const std::size_t total = catalog.append_triplets(set_id, triplets, "user", label);
      {
        std::lock_guard lock(task_mu);
        pending.erase(task_id);
      }
      reply(res, {{"triplet_count", triplets.size()}, {"triplet_set", set_id}, {"set_size", total}});
    }));

    http.Get("/triplet_sets", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto arr = ojson::array();
      for (const auto& s : catalog.triplet_sets())
        arr.push_back({{"id", s.id}, {"source", s.source}, {"label", s.label}, {"count", s.count}});
      reply(res, {{"triplet_sets", std::move(arr)}});
    }));

    http.Post("/train", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      Job job;
      job.base = body.value("base", std::string("combined"));
      if (job.base != "crowd" && job.base != "user" && job.base != "combined")
        throw InvalidArgument("base must be crowd, user or combined");
      job.config = options.train;
      job.config.shape = parse_metric_shape(body.value("shape", std::string("diagonal")));
      if (body.contains("lambda")) job.config.lambda = body.at("lambda").get<double>();
      if (body.contains("triplet_sets") && !body.at("triplet_sets").empty()) {
        job.sets = body.at("triplet_sets").get<std::vector<std::string>>();
        for (const auto& s : job.sets) catalog.triplet_set_entry(s);  // 404 for unknown sets
      } else {
        for (const auto& s : catalog.triplet_sets()) {
          const bool crowd = s.source == "crowd" || s.source == "simulated";
          if (job.base == "combined" || (job.base == "crowd") == crowd) job.sets.push_back(s.id);
        }
      }
      std::size_t total = 0;
      for (const auto& s : job.sets) total += catalog.triplet_set_entry(s).count;
      if (total == 0) throw InvalidArgument("the selected triplet sets are empty");
      std::string id;
      {
        std::lock_guard lock(job_mu);
        char buf[32];
        std::snprintf(buf, sizeof buf, "job-%04d", ++job_counter);
        id = job.id = buf;
        jobs[id] = job;
        queue.push_back(id);
      }
      job_cv.notify_all();
      if (body.value("wait", false)) {
        std::unique_lock lock(job_mu);
        job_cv.wait(lock, [&] { return jobs[id].status == "done" || jobs[id].status == "failed" || stopping; });
        const Job& j = jobs[id];
        reply(res, job_json(j), j.status == "done" ? 200 : 500);
      } else {
        std::lock_guard lock(job_mu);
        reply(res, job_json(jobs[id]), 202);
      }
    }));

    http.Get(R"(/jobs/([A-Za-z0-9_.\-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(job_mu);
      auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) throw NotFound("unknown job '" + std::string(req.matches[1]) + "'");
      reply(res, job_json(it->second));
    }));

    http.Get("/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto arr = ojson::array();
      for (const auto& m : catalog.metrics())
        arr.push_back({{"id", m.id}, {"base", m.base}, {"shape", m.shape}, {"triplet_sets", m.triplet_sets}});
      reply(res, {{"metrics", std::move(arr)}});
    }));

    http.Get(R"(/metrics/([A-Za-z0-9_.\-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const WeightMatrix w = catalog.metric(id);
      ojson o;
      o["id"] = id;
      for (const auto& m : catalog.metrics())
        if (m.id == id) {
          o["base"] = m.base;
          o["triplet_sets"] = m.triplet_sets;
        }
      o["weights"] = to_json(w);
      if (w.shape == MetricShape::diagonal && w.dim() == kFeatureDims) {
        const auto rows = export_weight_plot_data(w);
        auto groups = ojson::array();
        for (const auto& g : summarize_weight_plot(rows))
          groups.push_back(
              {{"group", g.group}, {"first_dim", g.first_dim}, {"dims", g.dims}, {"mean_log_weight", g.mean_log_weight}});
        auto logs = ojson::array();
        for (const auto& r : rows) logs.push_back(r.log_weight);
        o["plot"] = {{"groups", std::move(groups)}, {"log10_weights", std::move(logs)}};
      } else {
        o["plot"] = nullptr;
      }
      reply(res, o);
    }));
  }

  void work() {
    for (;;) {
      std::string id;
      Job job;
      {
        std::unique_lock lock(job_mu);
        job_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        jobs[id].status = "running";
        job = jobs[id];
      }
      std::string metric_id, error;
      try {
        std::vector<TripletRecord> triplets;
        for (const auto& s : job.sets) {
          auto part = catalog.triplet_set(s);
          triplets.insert(triplets.end(), part.begin(), part.end());
        }
        TrainConfig cfg = job.config;
        for (const auto& s : job.sets) cfg.triplet_set += (cfg.triplet_set.empty() ? "" : "+") + s;
        const WeightMatrix w = train(triplets, features(), cfg);
        metric_id = catalog.add_metric(w, job.base, job.sets);
      } catch (const std::exception& e) {
        error = e.what();
        log_warning("training job " + id + " failed: " + error);
      }
      {
        std::lock_guard lock(job_mu);
        Job& j = jobs[id];
        j.metric_id = metric_id;
        j.error = error;
        j.status = error.empty() ? "done" : "failed";
      }
      job_cv.notify_all();
    }
  }
};

StyleServer::StyleServer(Catalog& catalog, ServerOptions options)
    : impl_(std::make_unique<Impl>(catalog, std::move(options))) {}

StyleServer::~StyleServer() = default;

bool StyleServer::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int StyleServer::bind_any_port(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool StyleServer::listen_after_bind() { return impl_->http.listen_after_bind(); }

void StyleServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

void StyleServer::stop() { impl_->http.stop(); }

}  // namespace stylemetric
