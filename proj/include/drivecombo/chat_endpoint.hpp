#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "drivecombo/common.hpp"

namespace drivecombo {

// Greedy decoding. The harness pins these values for every request.
struct DecodingParams {
  double temperature = 0.0;
  double top_p = 1.0;
  int top_k = 1;
  int max_tokens = 1024;

  bool operator==(const DecodingParams&) const = default;
};

struct ChatRequest {
  std::string system;
  std::string user;
  // Opaque frame attachments, sent as base64 images by endpoints that accept them.
  std::vector<std::string> image_paths;
  DecodingParams decoding;
  // Stable request key (question id, repeat, condition...). Replay endpoints
  // look responses up by it; remote endpoints ignore it.
  std::string tag;
};

struct ChatResponse {
  std::string text;
  // Wall time measured by the endpoint itself; offline endpoints report 0 so
  // their outputs stay byte-stable.
  double latency_ms = 0.0;
};

// Chat-completion style wire interface shared by generators, judges,
// scorers, coexistence oracles and evaluated models.
class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  // Throws TransportError on failures the caller may retry.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual bool supports_images() const { return false; }
};

// Deterministic in-process endpoint driven by a function of the request.
class StubEndpoint final : public ChatEndpoint {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit StubEndpoint(Responder responder, bool images = false)
      : responder_(std::move(responder)), images_(images) {}

  ChatResponse complete(const ChatRequest& request) override { return {responder_(request), 0.0}; }
  bool supports_images() const override { return images_; }

 private:
  Responder responder_;
  bool images_;
};

// Replays recorded responses from a JSON-lines file of
// {"tag": "...", "response": "..."} objects. Unknown tags raise TransportError.
class ReplayEndpoint final : public ChatEndpoint {
 public:
  explicit ReplayEndpoint(std::map<std::string, std::string> responses, bool images = true)
      : responses_(std::move(responses)), images_(images) {}

  static ReplayEndpoint from_file(const std::string& path, bool images = true);

  ChatResponse complete(const ChatRequest& request) override;
  bool supports_images() const override { return images_; }

 private:
  std::map<std::string, std::string> responses_;
  bool images_;
};

struct HttpEndpointConfig {
  // e.g. "https://api.example.com"; requests go to base_url + path.
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  // Name of the environment variable holding the bearer token.
  std::string api_key_env;
  bool supports_images = false;
  int timeout_seconds = 120;
};

// OpenAI-compatible chat-completions client.
class HttpEndpoint final : public ChatEndpoint {
 public:
  explicit HttpEndpoint(HttpEndpointConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  bool supports_images() const override { return config_.supports_images; }

  // Request body as sent on the wire; exposed for inspection and tests.
  std::string build_body(const ChatRequest& request) const;

 private:
  HttpEndpointConfig config_;
};

// Calls `endpoint.complete`, retrying TransportError up to `attempts` total
// tries. The last TransportError propagates.
ChatResponse complete_with_retry(ChatEndpoint& endpoint, const ChatRequest& request, int attempts);

}  // namespace drivecombo
