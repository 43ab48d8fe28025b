// SPDX-License-Identifier: Apache-2.0

#include "eor/service.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "eor/graph.hpp"
#include "eor/model.hpp"
#include "eor/serialize.hpp"
#include "eor/solver.hpp"

namespace eor {

using nlohmann::json;

namespace {

struct Event {
  std::size_t round = 0;
  Phase phase = Phase::kAwaitQuery;
};

bool terminal(Phase p) { return p == Phase::kDone || p == Phase::kFailed; }

std::string now_iso() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_session_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  std::ostringstream out;
  out << std::hex << rng();
  return out.str();
}

// Request failure carried to the HTTP layer as a status code and error document.
struct HttpError {
  int status;
  std::string kind;
  std::string detail;
  json extra = json::object();
};

json error_document(const HttpError& e) {
  json error = {{"kind", e.kind}, {"detail", e.detail}};
  error.update(e.extra);
  return {{"error", error}};
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    json doc = json::parse(req.body);
    if (!doc.is_object()) throw HttpError{400, "malformed-document", "request body must be a JSON object"};
    return doc;
  } catch (const json::parse_error& e) {
    throw HttpError{400, "malformed-document", e.what()};
  }
}

std::string string_field(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) {
    throw HttpError{400, "missing-field", std::string("\"") + key + "\" must be a string"};
  }
  return it->get<std::string>();
}

LinearModel parse_or_400(const std::string& source, const char* field) {
  try {
    return parse_model(source);
  } catch (const ModelError& e) {
    throw HttpError{400,
                    "model-error",
                    e.what(),
                    {{"field", field}, {"error_kind", to_string(e.kind())}, {"line", e.line()}, {"column", e.column()}}};
  }
}

// Runs `body` and turns HttpError and unexpected exceptions into responses.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const HttpError& e) {
    send(res, e.status, error_document(e));
  } catch (const std::exception& e) {
    send(res, 500, error_document({500, "internal", e.what()}));
  }
}

std::string sse_frame(std::size_t id, const Event& e) {
  const json data = {{"round", e.round}, {"phase", to_string(e.phase)}};
  return "id: " + std::to_string(id) + "\nevent: phase\ndata: " + data.dump() + "\n\n";
}

}  // namespace

json SessionRecord::to_json() const {
  return {{"session_id", session_id},
          {"base_source", base_source},
          {"model_source", model_source},
          {"config", eor::to_json(config)},
          {"history", history},
          {"created_at", created_at},
          {"updated_at", updated_at}};
}

struct Service::Session {
  std::mutex mutex;
  std::condition_variable cv;
  SessionRecord record;
  bool busy = false;
  std::vector<Event> events;
};

Service::Service(ChatProvider& provider, ServiceOptions options)
    : provider_(provider), options_(std::move(options)) {
  if (!options_.journal_dir.empty()) std::filesystem::create_directories(options_.journal_dir);
}

Service::~Service() { shutdown(); }

void Service::shutdown() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  for (const auto& s : all) {
    std::lock_guard lock(s->mutex);
    s->cv.notify_all();
  }
}

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw HttpError{404, "unknown-session", "no session " + id};
  return it->second;
}

void Service::journal(const std::string& id, const json& entry) {
  if (options_.journal_dir.empty()) return;
  std::lock_guard lock(mutex_);
  std::ofstream out(std::filesystem::path(options_.journal_dir) / (id + ".jsonl"), std::ios::app);
  out << entry.dump() << "\n";
}

std::size_t Service::restore() {
  if (options_.journal_dir.empty()) return 0;
  std::size_t loaded = 0;
  for (const auto& file : std::filesystem::directory_iterator(options_.journal_dir)) {
    if (file.path().extension() != ".jsonl") continue;
    auto session = std::make_shared<Session>();
    auto& r = session->record;
    std::ifstream in(file.path());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json entry = json::parse(line);
      if (entry.at("type") == "created") {
        r.session_id = entry.at("session_id").get<std::string>();
        r.base_source = r.model_source = entry.at("model_source").get<std::string>();
        r.config = agent_config_from_json(entry.at("config"));
        r.created_at = r.updated_at = entry.at("at").get<std::string>();
      } else if (entry.at("type") == "round") {
        const json& outcome = entry.at("outcome");
        r.history.push_back(outcome);
        if (outcome.at("ok").get<bool>()) r.model_source = outcome.at("updated_source").get<std::string>();
        r.updated_at = entry.at("at").get<std::string>();
      }
    }
    if (r.session_id.empty()) continue;
    std::lock_guard lock(mutex_);
    sessions_[r.session_id] = std::move(session);
    ++loaded;
  }
  return loaded;
}

void Service::mount(httplib::Server& server) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/solve", [](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      send(res, 200, to_json(solve_milp(parse_or_400(string_field(body, "model_source"), "model_source"))));
    });
  });

  server.Post("/diff", [](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const LinearModel a = parse_or_400(string_field(body, "model_a"), "model_a");
      const LinearModel b = parse_or_400(string_field(body, "model_b"), "model_b");
      send(res, 200, to_json(decision_information(a, b)));
    });
  });

  server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const std::string source = string_field(body, "model_source");
      const LinearModel model = parse_or_400(source, "model_source");
      auto session = std::make_shared<Session>();
      auto& r = session->record;
      r.session_id = new_session_id();
      r.base_source = r.model_source = source;
      r.config = options_.default_config;
      if (const auto it = body.find("config"); it != body.end()) {
        try {
          r.config = agent_config_from_json(*it);
        } catch (const std::exception& e) {
          throw HttpError{400, "invalid-config", e.what()};
        }
      }
      r.created_at = r.updated_at = now_iso();
      const Solution base = solve_milp(model, r.config.solver_budget);
      {
        std::lock_guard lock(mutex_);
        sessions_[r.session_id] = session;
      }
      journal(r.session_id, {{"type", "created"},
                             {"session_id", r.session_id},
                             {"model_source", source},
                             {"config", to_json(r.config)},
                             {"at", r.created_at}});
      send(res, 201, {{"session_id", r.session_id}, {"base_solution", to_json(base)}});
    });
  });

  server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto session = find(req.matches[1]);
      std::lock_guard lock(session->mutex);
      json doc = session->record.to_json();
      doc["busy"] = session->busy;
      doc["event_count"] = session->events.size();
      send(res, 200, doc);
    });
  });

  server.Post(R"(/sessions/([^/]+)/query)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const std::string text = string_field(body, "text");
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw HttpError{400, "empty-query", "query text is empty"};
      }
      const auto session = find(req.matches[1]);
      std::string source;
      AgentConfig config;
      std::size_t round = 0;
      {
        std::lock_guard lock(session->mutex);
        if (session->busy) throw HttpError{409, "query-in-flight", "a query is already running for this session"};
        session->busy = true;
        source = session->record.model_source;
        config = session->record.config;
        round = session->record.history.size() + 1;
      }
      struct Release {
        Session& s;
        ~Release() {
          std::lock_guard lock(s.mutex);
          s.busy = false;
          s.cv.notify_all();
        }
      } release{*session};

      const std::string id = session->record.session_id;
      if (const auto it = body.find("session_key"); it != body.end() && it->is_string()) {
        config.session_key = it->get<std::string>();
      } else if (const auto route = options_.query_routes.find(text); route != options_.query_routes.end()) {
        config.session_key = route->second;
      } else {
        config.session_key = id + "/r" + std::to_string(round);
      }
      const auto push = [&](Phase p) {
        std::lock_guard lock(session->mutex);
        session->events.push_back({round, p});
        session->cv.notify_all();
      };
      const SessionOutcome outcome = commander_run(parse_model(source), text, config, provider_, push);
      const json doc = to_json(outcome);
      {
        std::lock_guard lock(session->mutex);
        if (session->events.empty() || session->events.back().round != round ||
            !terminal(session->events.back().phase)) {
          session->events.push_back({round, outcome.phase});
        }
        auto& r = session->record;
        r.history.push_back(doc);
        if (outcome.ok()) r.model_source = outcome.updated_source;
        r.updated_at = now_iso();
      }
      journal(id, {{"type", "round"}, {"outcome", doc}, {"at", now_iso()}});
      const bool provider_down = outcome.failure && outcome.failure->kind == FailureKind::kProvider;
      send(res, provider_down ? 502 : 200, doc);
    });
  });

  server.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto session = find(req.matches[1]);
      std::size_t since = 0;
      if (req.has_param("since")) {
        try {
          since = std::stoul(req.get_param_value("since"));
        } catch (const std::exception&) {
          throw HttpError{400, "invalid-parameter", "since must be a non-negative integer"};
        }
      }
      auto cursor = std::make_shared<std::size_t>(since);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, session, cursor, since](
                                                                std::size_t, httplib::DataSink& sink) {
        std::unique_lock lock(session->mutex);
        // Ends once this stream has delivered a round's terminal phase and the session is idle.
        const auto finished = [&] {
          return !session->busy && *cursor >= session->events.size() && *cursor > since &&
                 terminal(session->events[*cursor - 1].phase);
        };
        const bool woke = session->cv.wait_for(lock, options_.events_idle_timeout, [&] {
          std::lock_guard service_lock(mutex_);
          return stopping_ || *cursor < session->events.size() || finished();
        });
        if (!woke || finished()) {
          sink.done();
          return true;
        }
        {
          std::lock_guard service_lock(mutex_);
          if (stopping_) {
            sink.done();
            return true;
          }
        }
        std::string frames;
        for (; *cursor < session->events.size(); ++*cursor) frames += sse_frame(*cursor, session->events[*cursor]);
        lock.unlock();
        return sink.write(frames.data(), frames.size());
      });
    });
  });
}

}  // namespace eor
