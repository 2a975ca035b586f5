#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "drivecombo/chat_endpoint.hpp"
#include "drivecombo/eval_harness.hpp"
#include "drivecombo/rule_crafter.hpp"

namespace drivecombo {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,     // bad command line or an unexpected failure
  kExitConfig = 2,    // project config missing, malformed or out of range
  kExitUpstream = 3,  // an endpoint stayed unreachable after its retry budget
  kExitData = 4,      // input data failed parsing, validation or compilation
};

// One endpoint slot of the project config.
//   backend: http     -> base_url, path, model, api_key_env, images, timeout
//   backend: replay   -> file (JSON lines of {tag, response}), images
//   backend: stub     -> response (fixed text), images
//   backend: template -> offline question writer (generator slot only)
//   backend: tags     -> context-tag oracle (coexistence slot only)
//   backend: gold     -> answers each question correctly (model slot only)
struct EndpointConfig {
  EndpointConfig() = default;
  explicit EndpointConfig(std::string b) : backend(std::move(b)) {}

  std::string backend = "stub";
  std::string response;
  std::string file;
  bool images = false;
  HttpEndpointConfig http;
};

struct ProjectConfig {
  std::string path;  // the config file; relative paths resolve against its directory
  Jurisdiction jurisdiction = Jurisdiction::China;
  std::string rules;
  std::vector<std::string> maps;  // map files or directories of them
  std::string catalog;
  std::string scenes;   // directory of scene docs; optional
  std::string corpus;   // rule-book directory for RAG; optional
  std::string output;
  std::vector<int> combo_sizes{2, 3};

  struct Seeds {
    std::uint64_t split = 0;
    std::uint64_t generation = 0;
    std::uint64_t placement = 0;
  } seeds;

  // Documented ranges: quality in [0, 1], resample_rounds in [1, 1000],
  // retry_budget in [1, 10].
  struct Thresholds {
    double quality = 0.6;
    int resample_rounds = 50;
    int retry_budget = 3;
  } thresholds;

  EndpointConfig coexistence{"tags"};
  EndpointConfig generator{"template"};
  std::array<EndpointConfig, 3> judges;
  std::array<EndpointConfig, 3> scorers;
  EndpointConfig model{"gold"};

  // Defaults for the eval flags. repeats in [1, 3], concurrency in [1, 64].
  Condition condition;
  int repeats = 3;
  std::size_t concurrency = 4;

  // Throws ConfigError naming the problem; every referenced path must exist.
  static ProjectConfig load(const std::string& path);
};

// Builds a chat endpoint for an http, replay or stub slot. `dataset` backs
// the gold backend. Throws ConfigError for backends the slot cannot use.
std::unique_ptr<ChatEndpoint> make_endpoint(const EndpointConfig& config, const std::vector<Mcq>* dataset = nullptr);

// Runs `drivecombo <args...>` (args exclude the program name). Diagnostics go
// to `err`, summaries to `out`. Returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drivecombo
