#include "drivecombo/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <ostream>

#include "drivecombo/mcq_builder.hpp"
#include "drivecombo/openscenario.hpp"
#include "drivecombo/scenario_compiler.hpp"
#include "yaml_support.hpp"

namespace drivecombo {

namespace fs = std::filesystem;

// ── Config ──────────────────────────────────────────────────────────────────

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

void require_exists(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

EndpointConfig parse_endpoint(const YAML::Node& n, const fs::path& base, const std::string& what) {
  static const std::array keys{"backend", "response", "file", "images", "base_url", "path", "model", "api_key_env",
                               "timeout"};
  yaml::expect_keys(n, keys, what);
  EndpointConfig e;
  e.backend = yaml::scalar(yaml::require(n, "backend", what), what + ".backend");
  if (n["response"]) e.response = yaml::scalar(n["response"], what + ".response");
  if (n["file"]) {
    e.file = resolve(base, yaml::scalar(n["file"], what + ".file"));
    require_exists(e.file, what + ".file");
  }
  if (n["images"]) e.images = n["images"].as<bool>();
  if (n["base_url"]) e.http.base_url = yaml::scalar(n["base_url"], what + ".base_url");
  if (n["path"]) e.http.path = yaml::scalar(n["path"], what + ".path");
  if (n["model"]) e.http.model = yaml::scalar(n["model"], what + ".model");
  if (n["api_key_env"]) e.http.api_key_env = yaml::scalar(n["api_key_env"], what + ".api_key_env");
  if (n["timeout"]) e.http.timeout_seconds = static_cast<int>(yaml::number(n["timeout"], what + ".timeout"));
  e.http.supports_images = e.images;

  static const std::array backends{"http", "replay", "stub", "template", "tags", "gold"};
  if (std::find(backends.begin(), backends.end(), e.backend) == backends.end())
    throw ConfigError(what + ": unknown backend '" + e.backend + "'");
  if (e.backend == "replay" && e.file.empty()) throw ConfigError(what + ": replay backend needs 'file'");
  if (e.backend == "http" && (e.http.base_url.empty() || e.http.model.empty()))
    throw ConfigError(what + ": http backend needs 'base_url' and 'model'");
  return e;
}

std::array<EndpointConfig, 3> parse_panel(const YAML::Node& n, const fs::path& base, const std::string& what) {
  std::array<EndpointConfig, 3> out;
  if (n.IsSequence()) {
    if (n.size() != 3) throw ConfigError(what + ": expected exactly 3 endpoints");
    for (std::size_t i = 0; i < 3; ++i) out[i] = parse_endpoint(n[i], base, fmt::format("{}[{}]", what, i));
  } else {
    out.fill(parse_endpoint(n, base, what));
  }
  return out;
}

template <typename T>
T in_range(T v, T lo, T hi, const std::string& what) {
  if (v < lo || v > hi) throw ConfigError(fmt::format("{} = {} outside [{}, {}]", what, v, lo, hi));
  return v;
}

}  // namespace

ProjectConfig ProjectConfig::load(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  ProjectConfig c;
  c.path = path;
  const auto base = fs::path(path).parent_path();
  try {
    const auto root = yaml::load(read_file(path));
    static const std::array keys{"jurisdiction", "rules",  "maps",  "catalog",    "scenes",    "corpus",
                                 "output",       "combo_sizes", "seeds", "thresholds", "endpoints", "eval"};
    yaml::expect_keys(root, keys, "config");

    c.jurisdiction = yaml::token<Jurisdiction>(yaml::require(root, "jurisdiction", "config"), "jurisdiction");
    c.rules = resolve(base, yaml::scalar(yaml::require(root, "rules", "config"), "rules"));
    require_exists(c.rules, "rule file");
    c.output = resolve(base, yaml::scalar(yaml::require(root, "output", "config"), "output"));
    if (const auto m = root["maps"]) {
      if (m.IsSequence()) {
        for (const auto& p : m) c.maps.push_back(resolve(base, yaml::scalar(p, "maps")));
      } else {
        c.maps.push_back(resolve(base, yaml::scalar(m, "maps")));
      }
      for (const auto& p : c.maps) require_exists(p, "map path");
    }
    for (auto [key, field] : {std::pair{"catalog", &c.catalog}, {"scenes", &c.scenes}, {"corpus", &c.corpus}}) {
      if (!root[key]) continue;
      *field = resolve(base, yaml::scalar(root[key], key));
      require_exists(*field, key);
    }

    if (const auto k = root["combo_sizes"]) {
      c.combo_sizes.clear();
      for (const auto& v : k) c.combo_sizes.push_back(in_range(static_cast<int>(yaml::number(v, "combo_sizes")), 2, 5, "combo size"));
      std::sort(c.combo_sizes.begin(), c.combo_sizes.end());
      c.combo_sizes.erase(std::unique(c.combo_sizes.begin(), c.combo_sizes.end()), c.combo_sizes.end());
    }
    if (const auto s = root["seeds"]) {
      yaml::expect_keys(s, std::array{"split", "generation", "placement"}, "seeds");
      if (s["split"]) c.seeds.split = s["split"].as<std::uint64_t>();
      if (s["generation"]) c.seeds.generation = s["generation"].as<std::uint64_t>();
      if (s["placement"]) c.seeds.placement = s["placement"].as<std::uint64_t>();
    }
    if (const auto t = root["thresholds"]) {
      yaml::expect_keys(t, std::array{"quality", "resample_rounds", "retry_budget"}, "thresholds");
      if (t["quality"]) c.thresholds.quality = in_range(yaml::number(t["quality"], "quality"), 0.0, 1.0, "thresholds.quality");
      if (t["resample_rounds"])
        c.thresholds.resample_rounds =
            in_range(static_cast<int>(yaml::number(t["resample_rounds"], "resample_rounds")), 1, 1000, "thresholds.resample_rounds");
      if (t["retry_budget"])
        c.thresholds.retry_budget =
            in_range(static_cast<int>(yaml::number(t["retry_budget"], "retry_budget")), 1, 10, "thresholds.retry_budget");
    }
    if (const auto e = root["endpoints"]) {
      yaml::expect_keys(e, std::array{"coexistence", "generator", "judges", "scorers", "model"}, "endpoints");
      if (e["coexistence"]) c.coexistence = parse_endpoint(e["coexistence"], base, "endpoints.coexistence");
      if (e["generator"]) c.generator = parse_endpoint(e["generator"], base, "endpoints.generator");
      if (e["judges"]) c.judges = parse_panel(e["judges"], base, "endpoints.judges");
      if (e["scorers"]) c.scorers = parse_panel(e["scorers"], base, "endpoints.scorers");
      if (e["model"]) c.model = parse_endpoint(e["model"], base, "endpoints.model");
    }
    if (const auto v = root["eval"]) {
      yaml::expect_keys(v, std::array{"variant", "cot", "rag", "repeats", "concurrency"}, "eval");
      if (v["variant"]) c.condition.variant = yaml::token<Variant>(v["variant"], "eval.variant");
      if (v["cot"]) c.condition.cot = v["cot"].as<bool>();
      if (v["rag"]) c.condition.rag = v["rag"].as<bool>();
      if (v["repeats"]) c.repeats = in_range(static_cast<int>(yaml::number(v["repeats"], "repeats")), 1, 3, "eval.repeats");
      if (v["concurrency"])
        c.concurrency = static_cast<std::size_t>(
            in_range(static_cast<int>(yaml::number(v["concurrency"], "concurrency")), 1, 64, "eval.concurrency"));
    }
  } catch (const ParseError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (c.coexistence.backend == "template" || c.coexistence.backend == "gold")
    throw ConfigError("endpoints.coexistence: backend '" + c.coexistence.backend + "' is not a coexistence oracle");
  return c;
}

std::unique_ptr<ChatEndpoint> make_endpoint(const EndpointConfig& config, const std::vector<Mcq>* dataset) {
  if (config.backend == "http") return std::make_unique<HttpEndpoint>(config.http);
  if (config.backend == "replay") return std::make_unique<ReplayEndpoint>(ReplayEndpoint::from_file(config.file, config.images));
  if (config.backend == "stub") {
    return std::make_unique<StubEndpoint>([text = config.response](const ChatRequest&) { return text; }, config.images);
  }
  if (config.backend == "gold") {
    if (!dataset) throw ConfigError("the gold backend only serves the evaluated model");
    std::map<std::string, char> gold;
    for (const auto& q : *dataset) gold[q.id] = q.correct_option;
    return std::make_unique<StubEndpoint>(
        [gold = std::move(gold)](const ChatRequest& r) {
          // Tag: "<question id>/<repeat>/<condition>".
          const auto cut = r.tag.rfind('/', r.tag.rfind('/') - 1);
          const auto it = gold.find(r.tag.substr(0, cut));
          return it == gold.end() ? std::string("none") : std::string(1, it->second);
        },
        true);
  }
  throw ConfigError("backend '" + config.backend + "' cannot serve this endpoint slot");
}

// ── Commands ────────────────────────────────────────────────────────────────

namespace {

struct Io {
  std::ostream& out;
  std::ostream& err;
};

std::string out_path(const ProjectConfig& c, const std::string& name) { return (fs::path(c.output) / name).string(); }

int cmd_craft(const ProjectConfig& cfg, Io io) {
  const auto rules = parse_rule_file(read_file(cfg.rules), cfg.jurisdiction);
  if (rules.empty()) io.err << "warning: " << cfg.rules << " holds no rules\n";
  const RuleIndex index(rules);

  std::vector<RuleCombo> candidates;
  for (const int k : cfg.combo_sizes)
    for (const auto& c : generate_candidate_combos(rules, k)) candidates.push_back(derive_labels(c, index));

  std::unique_ptr<CoexistenceOracle> oracle;
  std::unique_ptr<ChatEndpoint> endpoint;
  if (cfg.coexistence.backend == "tags") {
    oracle = std::make_unique<TagCoexistenceOracle>();
  } else {
    endpoint = make_endpoint(cfg.coexistence);
    oracle = std::make_unique<ModelCoexistenceOracle>(*endpoint);
  }
  const auto checked = validate_coexistence_all(candidates, index, *oracle, {cfg.thresholds.retry_budget, 4});
  const auto hierarchy = build_hierarchy(rules, checked);
  const auto path = out_path(cfg, "hierarchy.yaml");
  write_file(path, export_hierarchy(hierarchy));

  const auto counts = hierarchy.level_counts();
  io.out << fmt::format("hierarchy: {}\n", path);
  for (int l = 1; l <= 5; ++l) io.out << fmt::format("  L{}: {}\n", l, counts.contains(l) ? counts.at(l) : 0);
  io.out << fmt::format("  candidates: {}, feasible: {}, infeasible: {}\n", candidates.size(), hierarchy.combos.size(),
                        hierarchy.rejected.size());
  return kExitOk;
}

int cmd_generate(const ProjectConfig& cfg, const std::string& hierarchy_path, Io io) {
  const auto path = hierarchy_path.empty() ? out_path(cfg, "hierarchy.yaml") : hierarchy_path;
  if (!fs::exists(path)) throw ConfigError("hierarchy file not found: " + path + " (run craft first)");
  const auto hierarchy = import_hierarchy(read_file(path));

  std::unique_ptr<ChatEndpoint> generator;
  if (cfg.generator.backend == "template") {
    generator = std::make_unique<TemplateGenerator>(hierarchy.atomic);
  } else {
    generator = make_endpoint(cfg.generator);
  }
  std::array<std::unique_ptr<ChatEndpoint>, 3> judges, scorers;
  std::array<ChatEndpoint*, 3> judge_ptrs{}, scorer_ptrs{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (const auto* slot : {&cfg.judges[i], &cfg.scorers[i]})
      if (slot->backend == "stub" && slot->response.empty())
        throw ConfigError("endpoints.judges and endpoints.scorers must be configured for generate");
    judges[i] = make_endpoint(cfg.judges[i]);
    scorers[i] = make_endpoint(cfg.scorers[i]);
    judge_ptrs[i] = judges[i].get();
    scorer_ptrs[i] = scorers[i].get();
  }

  GenerationOptions opts;
  opts.assembly.attempts = cfg.thresholds.retry_budget;
  opts.assembly.transport_attempts = cfg.thresholds.retry_budget;
  opts.judge_transport_attempts = cfg.thresholds.retry_budget;
  opts.score_attempts = cfg.thresholds.retry_budget;
  opts.quality_threshold = cfg.thresholds.quality;
  opts.seed = cfg.seeds.generation;
  const auto result = generate_dataset(hierarchy, *generator, judge_ptrs, scorer_ptrs, opts);

  write_dataset(out_path(cfg, "dataset.jsonl"), result.accepted);
  write_file(out_path(cfg, "generation_audit.jsonl"), audit_to_jsonl(result.audit));
  const auto queue = out_path(cfg, "review_queue.jsonl");
  fs::remove(queue);
  write_file(queue, "");
  append_review_queue(queue, result.review);

  std::map<int, std::size_t> per_level;
  for (const auto& m : result.accepted) ++per_level[m.level];
  const auto flagged = std::count_if(result.review.begin(), result.review.end(),
                                     [](const ReviewItem& r) { return r.reason == "quality_flag"; });
  io.out << fmt::format("dataset: {}\n", out_path(cfg, "dataset.jsonl"));
  io.out << fmt::format("  attempted: {}, accepted: {}, rejected by consensus: {}\n", result.attempted,
                        result.accepted.size(), result.rejected_by_consensus);
  for (int l = 1; l <= 5; ++l) io.out << fmt::format("  L{}: {}\n", l, per_level[l]);
  io.out << fmt::format("  quality flags: {}, sampled for review: {}\n", flagged,
                        result.review.size() - static_cast<std::size_t>(flagged));
  return kExitOk;
}

MapLibrary load_maps(const ProjectConfig& cfg) {
  if (cfg.maps.empty()) throw ConfigError("config lists no maps");
  MapLibrary lib;
  for (const auto& p : cfg.maps) {
    if (fs::is_directory(p)) {
      const auto dir = MapLibrary::load_dir(p);
      for (const auto& name : dir.names()) lib.add(dir.get(name));
    } else {
      lib.add(parse_road_network(read_file(p)));
    }
  }
  return lib;
}

std::vector<std::string> scene_files(const ProjectConfig& cfg, const std::vector<std::string>& explicit_files) {
  if (!explicit_files.empty()) return explicit_files;
  std::vector<std::string> out;
  if (cfg.scenes.empty()) return out;
  for (const auto& e : fs::directory_iterator(cfg.scenes))
    if (e.path().extension() == ".yaml" || e.path().extension() == ".yml") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_compile(const ProjectConfig& cfg, const std::vector<std::string>& explicit_files, Io io) {
  const auto files = scene_files(cfg, explicit_files);
  if (files.empty()) {
    io.out << "no scene docs to compile\n";
    return kExitOk;
  }
  if (cfg.catalog.empty()) throw ConfigError("config lists no asset catalog");
  const auto maps = load_maps(cfg);
  const auto catalog = AssetCatalog::parse(read_file(cfg.catalog));
  CompileOptions opts;
  opts.seed = cfg.seeds.placement;
  opts.placement.max_rounds = cfg.thresholds.resample_rounds;

  std::string failures;
  std::size_t compiled = 0;
  for (const auto& file : files) {
    const auto name = fs::path(file).stem().string();
    try {
      const auto doc = parse_scene_doc(read_file(file));
      const auto& map = maps.for_road_type(doc.road_network.road_type);
      const auto c = compile_scene(name, doc, map, catalog, opts);
      write_file(out_path(cfg, "scenarios/" + name + ".xosc"), c.xml);
      ++compiled;
    } catch (const UnsatisfiableConstraints& e) {
      failures += fmt::format("{}: unsatisfiable constraints\n", name);
      for (const auto& v : e.violated()) failures += "  " + v + "\n";
    } catch (const TopologyGap& e) {
      failures += fmt::format("{}: topology gap: {}\n", name, e.what());
    } catch (const TransportError&) {
      throw;
    } catch (const Error& e) {
      failures += fmt::format("{}: {}\n", name, e.what());
    }
  }
  write_file(out_path(cfg, "compile_failures.txt"), failures);
  io.out << fmt::format("compiled {} of {} scene doc(s) into {}\n", compiled, files.size(), out_path(cfg, "scenarios"));
  if (!failures.empty()) {
    io.err << failures;
    return kExitData;
  }
  return kExitOk;
}

struct EvalFlags {
  std::string dataset;
  std::string records;
  std::string variant;
  bool cot = false;
  bool rag = false;
  int repeats = 0;
  std::optional<std::uint64_t> seed;
  std::size_t concurrency = 0;
  bool all_questions = false;
};

Condition condition_of(const ProjectConfig& cfg, const EvalFlags& f) {
  Condition c = cfg.condition;
  if (!f.variant.empty()) {
    const auto v = parse_token<Variant>(f.variant);
    if (!v) throw ConfigError("unknown variant '" + f.variant + "'");
    c.variant = *v;
  }
  c.cot = c.cot || f.cot;
  c.rag = c.rag || f.rag;
  return c;
}

std::vector<Mcq> load_dataset(const ProjectConfig& cfg, const EvalFlags& f) {
  const auto path = f.dataset.empty() ? out_path(cfg, "dataset.jsonl") : f.dataset;
  if (!fs::exists(path)) throw ConfigError("dataset not found: " + path + " (run generate first)");
  return read_dataset(path);
}

std::string records_path(const ProjectConfig& cfg, const EvalFlags& f, const Condition& c) {
  return f.records.empty() ? out_path(cfg, "records_" + c.label() + ".jsonl") : f.records;
}

int cmd_eval(const ProjectConfig& cfg, const EvalFlags& f, Io io) {
  const auto dataset = load_dataset(cfg, f);
  const auto cond = condition_of(cfg, f);
  EvalOptions opts;
  opts.repeats = f.repeats > 0 ? f.repeats : cfg.repeats;
  opts.concurrency = f.concurrency > 0 ? f.concurrency : cfg.concurrency;
  opts.transport_attempts = cfg.thresholds.retry_budget;

  std::unique_ptr<Bm25Retriever> retriever;
  if (cond.rag) {
    if (cfg.corpus.empty()) throw ConfigError("the RAG condition needs 'corpus' in the config");
    retriever = std::make_unique<Bm25Retriever>(load_rule_books(cfg.corpus));
  }
  const auto model = make_endpoint(cfg.model, &dataset);

  std::vector<EvalRecord> records;
  if (f.all_questions) {
    records = run_evaluation(dataset, *model, cond, retriever.get(), opts);
  } else {
    const auto split = split_dataset(dataset, f.seed.value_or(cfg.seeds.split));
    for (const auto& w : split.warnings) io.err << "warning: " << w << "\n";
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["train"] = split.train;
    j["test"] = split.test;
    j["warnings"] = split.warnings;
    write_file(out_path(cfg, "split.json"), j.dump(2) + "\n");
    records = run_evaluation(split, dataset, *model, cond, retriever.get(), opts);
  }
  const auto path = records_path(cfg, f, cond);
  write_records(path, records);
  const auto failed = std::count_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.failed; });
  io.out << fmt::format("records: {} ({} record(s), {} transport failure(s), condition {})\n", path, records.size(),
                        failed, cond.label());
  return kExitOk;
}

int cmd_report(const ProjectConfig& cfg, const EvalFlags& f, Io io) {
  const auto cond = condition_of(cfg, f);
  const auto path = records_path(cfg, f, cond);
  if (!fs::exists(path)) throw Error("records file not found: " + path + " (run eval first)");
  const auto records = read_records(path);
  const auto dataset = load_dataset(cfg, f);
  const auto report = compute_report(records, dataset);
  const auto label = report.condition;
  write_file(out_path(cfg, "report_" + label + ".csv"), report_csv(report));
  write_file(out_path(cfg, "report_" + label + ".md"), report_markdown(report));
  io.out << report_markdown(report);
  return kExitOk;
}

int cmd_validate(const ProjectConfig& cfg, const std::vector<std::string>& explicit_files, Io io) {
  std::size_t problems = 0;
  try {
    const auto rules = parse_rule_file(read_file(cfg.rules), cfg.jurisdiction);
    io.out << fmt::format("{}: {} rule(s) valid\n", cfg.rules, rules.size());
  } catch (const ParseError& e) {
    io.err << cfg.rules << ": " << e.what() << "\n";
    ++problems;
  } catch (const ValidationError& e) {
    io.err << cfg.rules << ": " << e.what() << "\n";
    ++problems;
  }
  for (const auto& file : scene_files(cfg, explicit_files)) {
    try {
      const auto doc = parse_scene_doc(read_file(file));
      const auto findings = self_check(doc);
      for (const auto& f : findings) io.err << fmt::format("{}: {}: {}\n", file, f.kind, f.message);
      problems += findings.size();
      if (findings.empty()) io.out << file << ": ok\n";
    } catch (const ParseError& e) {
      io.err << file << ": " << e.what() << "\n";
      ++problems;
    } catch (const ValidationError& e) {
      io.err << file << ": " << e.what() << "\n";
      ++problems;
    }
  }
  return problems == 0 ? kExitOk : kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rule-combination benchmark pipeline: craft, generate, compile, eval, report."};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "Project config file")->required();

  auto* craft = app.add_subcommand("craft", "Build the hierarchical rule set from the rule file");
  auto* generate = app.add_subcommand("generate", "Generate and validate questions from the hierarchy");
  std::string hierarchy;
  generate->add_option("--hierarchy", hierarchy, "Hierarchy file (default: <output>/hierarchy.yaml)");
  auto* compile = app.add_subcommand("compile", "Compile scene docs into OpenSCENARIO files");
  std::vector<std::string> scenes;
  compile->add_option("--scene", scenes, "Scene doc(s) (default: every doc in the config's scenes directory)");
  auto* validate = app.add_subcommand("validate", "Validate the rule file and scene docs only");
  validate->add_option("--scene", scenes, "Scene doc(s) (default: the config's scenes directory)");

  EvalFlags flags;
  std::uint64_t seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate the model endpoint on the test split");
  auto* report = app.add_subcommand("report", "Compute accuracy tables from evaluation records");
  for (auto* sub : {eval, report}) {
    sub->add_option("--dataset", flags.dataset, "Question dataset (default: <output>/dataset.jsonl)");
    sub->add_option("--records", flags.records, "Records file (default: <output>/records_<condition>.jsonl)");
    sub->add_option("--variant", flags.variant, "visual or text")->check(CLI::IsMember({"visual", "text"}));
    sub->add_flag("--cot", flags.cot, "Chain-of-thought condition");
    sub->add_flag("--rag", flags.rag, "Retrieval-augmented condition");
  }
  eval->add_option("--repeats", flags.repeats, "Independent runs per question (1..3)")->check(CLI::Range(1, 3));
  auto* seed_opt = eval->add_option("--seed", seed, "Split seed (default: seeds.split)");
  eval->add_option("--concurrency", flags.concurrency, "Concurrent requests (1..64)")->check(CLI::Range(1, 64));
  eval->add_flag("--all-questions", flags.all_questions, "Evaluate every question instead of the test split");

  std::vector<std::string> argv_store{"drivecombo"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) flags.seed = seed;

  const Io io{out, err};
  try {
    const auto cfg = ProjectConfig::load(config_path);
    if (*craft) return cmd_craft(cfg, io);
    if (*generate) return cmd_generate(cfg, hierarchy, io);
    if (*compile) return cmd_compile(cfg, scenes, io);
    if (*validate) return cmd_validate(cfg, scenes, io);
    if (*eval) return cmd_eval(cfg, flags, io);
    if (*report) return cmd_report(cfg, flags, io);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TransportError& e) {
    err << "endpoint error: " << e.what() << "\n";
    return kExitUpstream;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace drivecombo
