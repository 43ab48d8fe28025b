// SPDX-License-Identifier: Apache-2.0

// Chat-completion providers. The agent talks to an abstract ChatProvider; a
// scripted provider replays fixture responses keyed by (session, step) and an
// HTTP provider speaks the common chat-completions request/response shape.

#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace eor {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ProviderRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_tokens = 2048;
  // Routing keys for scripted playback; ignored by live providers.
  std::string session;
  std::string step;
};

struct TokenUsage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct ProviderResponse {
  std::string text;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
};

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  // Thread-safe; throws ProviderError on transport or protocol failure.
  virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

// Fixture document:
//   {"sessions": {"<session>": {"<step>": "text" | ["text", ...]}, "*": {...}}}
// A string answers every call; an array answers calls in order and is an
// error once exhausted. Session "*" supplies steps a session does not define.
class ScriptedProvider : public ChatProvider {
 public:
  explicit ScriptedProvider(nlohmann::json fixture);

  ProviderResponse complete(const ProviderRequest& request) override;

  // Requests seen so far, in call order.
  [[nodiscard]] std::vector<ProviderRequest> requests() const;

 private:
  nlohmann::json fixture_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, std::size_t> cursor_;
  std::vector<ProviderRequest> seen_;
};

// Reads and merges fixture files; later files override earlier ones per
// (session, step). A directory argument loads `<dir>/<default_name>.json`.
[[nodiscard]] nlohmann::json load_fixtures(const std::vector<std::string>& paths,
                                           const std::string& default_name = "fixture");

struct HttpProviderConfig {
  // Scheme, host and optional port, e.g. "https://api.example.com".
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  // Name of the environment variable holding the bearer token.
  std::string api_key_env = "EOR_PROVIDER_KEY";
  std::chrono::seconds timeout{60};
  // Extra attempts after a transport failure or 5xx response.
  std::size_t retries = 2;
};

class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(HttpProviderConfig config);

  ProviderResponse complete(const ProviderRequest& request) override;

 private:
  HttpProviderConfig config_;
  std::string api_key_;
};

// Request body in chat-completions shape.
[[nodiscard]] nlohmann::json chat_completions_body(const HttpProviderConfig& config,
                                                   const ProviderRequest& request);

}  // namespace eor
