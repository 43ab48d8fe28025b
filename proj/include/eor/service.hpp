// SPDX-License-Identifier: Apache-2.0

// HTTP front end: what-if sessions with chained rounds, a phase event stream,
// and stateless /diff and /solve endpoints.

#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eor/agent.hpp"
#include "eor/provider.hpp"

namespace httplib {
class Server;
}

namespace eor {

struct ServiceOptions {
  // Directory for one append-only journal per session; empty disables it.
  std::string journal_dir;
  AgentConfig default_config;
  // Query text to provider session key, for scripted playback of known queries.
  std::map<std::string, std::string> query_routes;
  // An event stream with nothing to send closes after this long.
  std::chrono::milliseconds events_idle_timeout{std::chrono::seconds(60)};
};

// Session state as served by GET /sessions/{id}. History entries are
// SessionOutcome documents.
struct SessionRecord {
  std::string session_id;
  std::string base_source;
  std::string model_source;  // source the next round starts from
  AgentConfig config;
  std::vector<nlohmann::json> history;
  std::string created_at;
  std::string updated_at;

  [[nodiscard]] nlohmann::json to_json() const;
};

class Service {
 public:
  Service(ChatProvider& provider, ServiceOptions options = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Registers every endpoint on `server`.
  void mount(httplib::Server& server);

  // Rebuilds sessions from the journal directory. Returns how many were loaded.
  std::size_t restore();

  // Wakes and ends open event streams; call before stopping the server.
  void shutdown();

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id);
  void journal(const std::string& id, const nlohmann::json& entry);

  ChatProvider& provider_;
  ServiceOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  bool stopping_ = false;
};

}  // namespace eor
