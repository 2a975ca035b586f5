#include "drivecombo/chat_endpoint.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <sstream>

namespace drivecombo {

using nlohmann::json;

ReplayEndpoint ReplayEndpoint::from_file(const std::string& path, bool images) {
  std::istringstream in(read_file(path));
  std::map<std::string, std::string> responses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("tag") || !j.contains("response") || !j["tag"].is_string() ||
        !j["response"].is_string())
      throw ParseError(path + ": replay record needs string fields 'tag' and 'response'", line_no);
    responses[j["tag"].get<std::string>()] = j["response"].get<std::string>();
  }
  return ReplayEndpoint(std::move(responses), images);
}

ChatResponse ReplayEndpoint::complete(const ChatRequest& request) {
  const auto it = responses_.find(request.tag);
  if (it == responses_.end()) throw TransportError("no recorded response for tag '" + request.tag + "'");
  return {it->second, 0.0};
}

HttpEndpoint::HttpEndpoint(HttpEndpointConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("http endpoint requires base_url");
  if (config_.model.empty()) throw ConfigError("http endpoint requires model");
}

std::string HttpEndpoint::build_body(const ChatRequest& request) const {
  json user_content;
  if (request.image_paths.empty()) {
    user_content = request.user;
  } else {
    user_content = json::array();
    user_content.push_back({{"type", "text"}, {"text", request.user}});
    for (const auto& path : request.image_paths) {
      const auto bytes = read_file(path);
      const std::string mime = path.size() >= 4 && path.substr(path.size() - 4) == ".png" ? "image/png" : "image/jpeg";
      user_content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:" + mime + ";base64," + httplib::detail::base64_encode(bytes)}}}});
    }
  }
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  messages.push_back({{"role", "user"}, {"content", user_content}});

  json body = {
      {"model", config_.model},
      {"messages", messages},
      {"temperature", request.decoding.temperature},
      {"top_p", request.decoding.top_p},
      {"top_k", request.decoding.top_k},
      {"max_tokens", request.decoding.max_tokens},
  };
  return body.dump();
}

ChatResponse HttpEndpoint::complete(const ChatRequest& request) {
  if (!request.image_paths.empty() && !config_.supports_images)
    throw ConfigError("endpoint '" + config_.model + "' does not accept images");

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr) throw ConfigError("credential variable " + config_.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(config_.path, headers, build_body(request), "application/json");
  const double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);

  try {
    const auto j = json::parse(res->body);
    return {j.at("choices").at(0).at("message").at("content").get<std::string>(), latency};
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed completion payload: ") + e.what());
  }
}

ChatResponse complete_with_retry(ChatEndpoint& endpoint, const ChatRequest& request, int attempts) {
  for (int i = 1;; ++i) {
    try {
      return endpoint.complete(request);
    } catch (const TransportError&) {
      if (i >= attempts) throw;
    }
  }
}

}  // namespace drivecombo
