// SPDX-License-Identifier: Apache-2.0

#include "eor/provider.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <httplib.h>

namespace eor {

ScriptedProvider::ScriptedProvider(nlohmann::json fixture) : fixture_(std::move(fixture)) {
  if (!fixture_.is_object() || !fixture_.contains("sessions") || !fixture_["sessions"].is_object()) {
    throw ProviderError("fixture must be an object with a \"sessions\" object");
  }
}

ProviderResponse ScriptedProvider::complete(const ProviderRequest& request) {
  std::lock_guard lock(mutex_);
  seen_.push_back(request);
  const auto& sessions = fixture_["sessions"];
  const nlohmann::json* entry = nullptr;
  std::string owner;
  for (const auto& key : {request.session, std::string("*")}) {
    const auto s = sessions.find(key);
    if (s == sessions.end()) continue;
    const auto step = s->find(request.step);
    if (step == s->end()) continue;
    entry = &*step;
    owner = key;
    break;
  }
  if (entry == nullptr) {
    throw ProviderError("no scripted response for session '" + request.session + "' step '" +
                        request.step + "'");
  }
  ProviderResponse response;
  if (entry->is_string()) {
    response.text = entry->get<std::string>();
  } else if (entry->is_array()) {
    std::size_t& next = cursor_[{owner, request.step}];
    if (next >= entry->size()) {
      throw ProviderError("scripted responses exhausted for session '" + owner + "' step '" +
                          request.step + "'");
    }
    const auto& item = (*entry)[next++];
    if (!item.is_string()) throw ProviderError("scripted response must be a string");
    response.text = item.get<std::string>();
  } else {
    throw ProviderError("scripted step '" + request.step + "' must be a string or an array");
  }
  return response;
}

std::vector<ProviderRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

nlohmann::json load_fixtures(const std::vector<std::string>& paths, const std::string& default_name) {
  nlohmann::json merged = {{"sessions", nlohmann::json::object()}};
  for (const auto& given : paths) {
    std::filesystem::path path(given);
    if (std::filesystem::is_directory(path)) path /= default_name + ".json";
    std::ifstream in(path);
    if (!in) throw ProviderError("cannot open fixture " + path.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError("fixture " + path.string() + ": " + e.what());
    }
    if (!doc.contains("sessions") || !doc["sessions"].is_object()) {
      throw ProviderError("fixture " + path.string() + " has no \"sessions\" object");
    }
    for (const auto& [session, steps] : doc["sessions"].items()) {
      for (const auto& [step, value] : steps.items()) merged["sessions"][session][step] = value;
    }
  }
  return merged;
}

nlohmann::json chat_completions_body(const HttpProviderConfig& config, const ProviderRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", config.model},
          {"messages", messages},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ProviderError("provider base URL is empty");
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

ProviderResponse HttpChatProvider::complete(const ProviderRequest& request) {
  const std::string body = chat_completions_body(config_, request).dump();
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= config_.retries; ++attempt) {
    // A fresh client per call keeps the provider shareable across threads.
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    const auto start = std::chrono::steady_clock::now();
    const auto result = client.Post(config_.path, headers, body, "application/json");
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw ProviderError("HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 200));
    }
    try {
      const auto doc = nlohmann::json::parse(result->body);
      ProviderResponse response;
      response.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
      if (const auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
        response.usage.prompt_tokens = usage->value("prompt_tokens", std::size_t{0});
        response.usage.completion_tokens = usage->value("completion_tokens", std::size_t{0});
      }
      response.latency = latency;
      return response;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("malformed provider response: ") + e.what());
    }
  }
  throw ProviderError("provider unavailable after " + std::to_string(config_.retries + 1) +
                      " attempts: " + last_error);
}

}  // namespace eor
