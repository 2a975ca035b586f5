#include "drivecombo/eval_harness.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

namespace drivecombo {

using nlohmann::json;
using nlohmann::ordered_json;

// ── Split ───────────────────────────────────────────────────────────────────

namespace {

constexpr std::size_t kMinStratum = 5;  // one test item at a 20% share

struct Stratum {
  std::string key;
  std::vector<std::string> ids;
};

// Moves strata smaller than kMinStratum into a pool named by `pool_key` of
// each stratum, recording a warning per merge.
std::vector<Stratum> merge_small(std::vector<Stratum> strata, const std::function<std::string(const Stratum&)>& pool_key,
                                 std::vector<std::string>& warnings) {
  std::map<std::string, Stratum> pools;
  std::vector<Stratum> kept;
  for (auto& s : strata) {
    if (s.ids.size() >= kMinStratum) {
      kept.push_back(std::move(s));
      continue;
    }
    const auto key = pool_key(s);
    warnings.push_back(fmt::format("stratum {} has {} item(s); merged into {}", s.key, s.ids.size(), key));
    auto& pool = pools[key];
    pool.key = key;
    pool.ids.insert(pool.ids.end(), s.ids.begin(), s.ids.end());
  }
  for (auto& [key, pool] : pools) {
    std::sort(pool.ids.begin(), pool.ids.end());
    kept.push_back(std::move(pool));
  }
  std::sort(kept.begin(), kept.end(), [](const Stratum& a, const Stratum& b) { return a.key < b.key; });
  return kept;
}

}  // namespace

BenchmarkSplit split_dataset(const std::vector<Mcq>& questions, std::uint64_t seed) {
  if (questions.empty()) throw ValidationError("cannot split an empty question set");
  BenchmarkSplit split;
  split.seed = seed;

  std::set<std::string> seen;
  std::map<std::string, Stratum> by_key;
  std::size_t composites = 0;
  for (const auto& q : questions) {
    if (!seen.insert(q.id).second) throw ValidationError("duplicate question id " + q.id);
    if (q.level <= 1) {
      split.train.push_back(q.id);
      continue;
    }
    ++composites;
    const auto key = fmt::format("L{}/{}", q.level, to_token(q.jurisdiction));
    auto& s = by_key[key];
    s.key = key;
    s.ids.push_back(q.id);
  }
  if (composites == 0) split.warnings.push_back("no composite questions; the test split is empty");

  std::vector<Stratum> strata;
  for (auto& [key, s] : by_key) {
    std::sort(s.ids.begin(), s.ids.end());
    strata.push_back(std::move(s));
  }
  strata = merge_small(std::move(strata), [](const Stratum& s) { return s.key.substr(0, s.key.find('/')) + "/*"; },
                       split.warnings);
  strata = merge_small(std::move(strata), [](const Stratum&) { return std::string("*"); }, split.warnings);

  // round(n / 5) never ties, so integer rounding is exact.
  const std::size_t target = (composites + 2) / 5;
  std::vector<std::size_t> quota(strata.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    quota[i] = strata[i].ids.size() / 5;
    assigned += quota[i];
  }
  std::vector<std::size_t> order(strata.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return strata[a].ids.size() % 5 > strata[b].ids.size() % 5; });
  for (std::size_t i = 0; assigned < target && i < order.size(); ++i) {
    if (strata[order[i]].ids.size() % 5 == 0) break;
    ++quota[order[i]];
    ++assigned;
  }

  SeededRng rng(seed);
  for (std::size_t i = 0; i < strata.size(); ++i) {
    auto ids = strata[i].ids;
    rng.shuffle(ids);
    split.test.insert(split.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(quota[i]));
    split.train.insert(split.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(quota[i]), ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ── Conditions ──────────────────────────────────────────────────────────────

std::string Condition::label() const {
  std::string s(to_token(variant));
  if (cot) s += "+cot";
  if (rag) s += "+rag";
  return s;
}

Condition Condition::parse(std::string_view label) {
  Condition c;
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in{std::string(label)};
  while (std::getline(in, part, '+')) parts.push_back(part);
  if (parts.empty()) throw ParseError("empty condition label");
  const auto v = parse_token<Variant>(parts.front());
  if (!v) throw ParseError("unknown variant '" + parts.front() + "'");
  c.variant = *v;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "cot" && !c.cot && !c.rag) {
      c.cot = true;
    } else if (parts[i] == "rag" && !c.rag) {
      c.rag = true;
    } else {
      throw ParseError("bad condition label '" + std::string(label) + "'");
    }
  }
  return c;
}

Mcq derive_text_variant(const Mcq& mcq) {
  if (!mcq.scene_text || trim(*mcq.scene_text).empty())
    throw ValidationError("question " + mcq.id + " has no scene text for the text variant");
  Mcq out = mcq;
  out.frame_refs.clear();
  return out;
}

// ── Retrieval ───────────────────────────────────────────────────────────────

std::vector<Passage> chunk_rule_book(const std::string& text, const std::string& source,
                                     std::optional<Jurisdiction> jurisdiction) {
  static const std::regex heading(R"(^\s*(Article|Section|Rule|Regulation)\s+\d+)", std::regex::icase);
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  const bool has_headings =
      std::any_of(lines.begin(), lines.end(), [](const std::string& l) { return std::regex_search(l, heading); });

  std::vector<std::string> chunks;
  std::string current;
  auto flush = [&] {
    const auto t = trim(current);
    if (!t.empty()) chunks.push_back(std::string(t));
    current.clear();
  };
  for (const auto& line : lines) {
    const bool boundary = has_headings ? std::regex_search(line, heading) : trim(line).empty();
    if (boundary) flush();
    if (!has_headings && trim(line).empty()) continue;
    if (!current.empty()) current += '\n';
    current += line;
  }
  flush();

  std::vector<Passage> out;
  for (std::size_t i = 0; i < chunks.size(); ++i)
    out.push_back({fmt::format("{}#{}", source, i + 1), jurisdiction, chunks[i]});
  return out;
}

std::vector<Passage> load_rule_books(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("rule-book directory not found: " + dir);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Passage> out;
  for (const auto& f : files) {
    const auto stem = f.stem().string();
    auto chunks = chunk_rule_book(read_file(f.string()), stem, parse_token<Jurisdiction>(stem));
    out.insert(out.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  static const std::set<std::string, std::less<>> kStop{
      "a",    "an",   "and",  "are",  "as",   "at",   "be",    "by",   "for",  "from", "has",  "in",
      "is",   "it",   "its",  "of",   "on",   "or",   "that",  "the",  "this", "to",   "was",  "were",
      "will", "with", "which", "when", "what", "who", "shall", "should", "would", "there", "their", "they"};
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !kStop.contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Bm25Retriever::Bm25Retriever(std::vector<Passage> passages, double k1, double b)
    : passages_(std::move(passages)), k1_(k1), b_(b) {
  for (const auto& p : passages_) {
    const auto terms = tokenize(p.text);
    std::map<std::string, std::size_t> counts;
    for (const auto& t : terms) ++counts[t];
    term_counts_.push_back(std::move(counts));
    lengths_.push_back(terms.size());
  }
}

double Bm25Retriever::score(std::size_t doc, const std::vector<std::string>& query_terms,
                            const std::vector<std::size_t>& pool, const std::map<std::string, std::size_t>& df,
                            double avg_len) const {
  const double n = static_cast<double>(pool.size());
  double total = 0.0;
  for (const auto& term : query_terms) {
    const auto tf_it = term_counts_[doc].find(term);
    if (tf_it == term_counts_[doc].end()) continue;
    const double tf = static_cast<double>(tf_it->second);
    const double d = static_cast<double>(df.at(term));
    const double idf = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    const double norm_len = avg_len > 0 ? static_cast<double>(lengths_[doc]) / avg_len : 0.0;
    total += idf * tf * (k1_ + 1.0) / (tf + k1_ * (1.0 - b_ + b_ * norm_len));
  }
  return total;
}

std::vector<Passage> Bm25Retriever::retrieve(const std::string& query, std::size_t k,
                                             std::optional<Jurisdiction> jurisdiction) const {
  std::vector<std::size_t> pool;
  if (jurisdiction) {
    for (std::size_t i = 0; i < passages_.size(); ++i)
      if (passages_[i].jurisdiction == jurisdiction) pool.push_back(i);
  }
  if (pool.empty()) {
    pool.resize(passages_.size());
    std::iota(pool.begin(), pool.end(), 0);
  }

  auto terms = tokenize(query);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  std::map<std::string, std::size_t> df;
  double avg_len = 0.0;
  for (const auto i : pool) {
    avg_len += static_cast<double>(lengths_[i]);
    for (const auto& t : terms)
      if (term_counts_[i].contains(t)) ++df[t];
  }
  if (!pool.empty()) avg_len /= static_cast<double>(pool.size());

  std::vector<std::pair<double, std::size_t>> scored;
  for (const auto i : pool) scored.emplace_back(score(i, terms, pool, df, avg_len), i);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<Passage> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(passages_[scored[i].second]);
  return out;
}

// ── Prompts ─────────────────────────────────────────────────────────────────

ChatRequest build_prompt(const Mcq& mcq, const Condition& condition, const Retriever* retriever) {
  const auto options = render_options(mcq);
  prompts::ChatPrompt base;
  ChatRequest req;
  if (condition.variant == Variant::Visual) {
    if (mcq.frame_refs.empty()) throw ValidationError("question " + mcq.id + " has no frames for the visual condition");
    base = prompts::test_visual(std::string(kFramePlaceholder), mcq.question_stem, options);
    req.image_paths = mcq.frame_refs;
  } else {
    const auto text = derive_text_variant(mcq);
    base = prompts::test_text(*text.scene_text, mcq.question_stem, options);
  }

  const auto country = display_name(mcq.jurisdiction);
  std::string user = fmt::format("Jurisdiction: {0}. Answer according to the traffic laws of {0}.\n\n", country);
  if (condition.rag) {
    if (!retriever) throw ConfigError("RAG condition without a retriever");
    const auto passages = retriever->retrieve(mcq.question_stem + "\n" + options, kRagPassages, mcq.jurisdiction);
    user += "Relevant traffic rule passages:\n";
    for (std::size_t i = 0; i < passages.size(); ++i) user += fmt::format("[{}] {}\n", i + 1, passages[i].text);
    user += "\n";
  }
  if (condition.cot) user += std::string(prompts::kChainOfThought) + "\n\n";
  user += base.user;

  req.system = base.system;
  req.user = std::move(user);
  req.decoding = DecodingParams{};
  return req;
}

// ── Running ─────────────────────────────────────────────────────────────────

std::optional<char> extract_choice(std::string_view response) {
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < response.size(); ++i) {
    const char c = response[i];
    if (c < 'A' || c > 'D') continue;
    if (i > 0 && alnum(response[i - 1])) continue;
    if (i + 1 < response.size() && alnum(response[i + 1])) continue;
    return c;
  }
  return std::nullopt;
}

std::string eval_tag(const std::string& question_id, int repeat, const Condition& condition) {
  return fmt::format("{}/{}/{}", question_id, repeat, condition.label());
}

std::string record_to_jsonl(const EvalRecord& r) {
  ordered_json j;
  j["question_id"] = r.question_id;
  j["repeat"] = r.repeat;
  j["condition"] = r.condition.label();
  j["response"] = r.response;
  j["extracted"] = r.extracted ? ordered_json(std::string(1, *r.extracted)) : ordered_json(nullptr);
  j["correct"] = r.correct;
  j["latency_ms"] = r.latency_ms;
  j["failed"] = r.failed;
  j["error"] = r.error;
  return j.dump();
}

EvalRecord record_from_json(const std::string& line) {
  try {
    const auto j = json::parse(line);
    EvalRecord r;
    r.question_id = j.at("question_id").get<std::string>();
    r.repeat = j.at("repeat").get<int>();
    r.condition = Condition::parse(j.at("condition").get<std::string>());
    r.response = j.at("response").get<std::string>();
    if (!j.at("extracted").is_null()) {
      const auto s = j.at("extracted").get<std::string>();
      if (s.size() != 1 || s[0] < 'A' || s[0] > 'D') throw ParseError("bad extracted choice '" + s + "'");
      r.extracted = s[0];
    }
    r.correct = j.at("correct").get<bool>();
    r.latency_ms = j.value("latency_ms", 0.0);
    r.failed = j.value("failed", false);
    r.error = j.value("error", std::string());
    if (r.repeat < 1 || r.repeat > 3) throw ParseError(fmt::format("repeat {} outside 1..3", r.repeat));
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("eval record: ") + e.what());
  }
}

void write_records(const std::string& path, const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_to_jsonl(r) + "\n";
  write_file(path, out);
}

std::vector<EvalRecord> read_records(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), n);
    }
  }
  return out;
}

std::vector<EvalRecord> run_evaluation(const std::vector<Mcq>& questions, ChatEndpoint& model,
                                       const Condition& condition, const Retriever* retriever,
                                       const EvalOptions& options) {
  if (options.repeats < 1 || options.repeats > 3) throw ConfigError("repeats must be within 1..3");
  if (condition.variant == Variant::Visual && !model.supports_images())
    throw ConfigError("the visual condition needs an endpoint that accepts images; use the text variant");

  std::vector<const Mcq*> sorted;
  for (const auto& q : questions) sorted.push_back(&q);
  std::sort(sorted.begin(), sorted.end(), [](const Mcq* a, const Mcq* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->id == sorted[i - 1]->id) throw ValidationError("duplicate question id " + sorted[i]->id);

  struct Job {
    const Mcq* mcq;
    int repeat;
    ChatRequest request;
  };
  std::vector<Job> jobs;
  for (const auto* q : sorted) {
    const auto request = build_prompt(*q, condition, retriever);
    for (int r = 1; r <= options.repeats; ++r) {
      jobs.push_back({q, r, request});
      jobs.back().request.tag = eval_tag(q->id, r, condition);
    }
  }

  return parallel_map(
      jobs,
      [&](const Job& job) {
        EvalRecord rec;
        rec.question_id = job.mcq->id;
        rec.repeat = job.repeat;
        rec.condition = condition;
        try {
          const auto resp = complete_with_retry(model, job.request, options.transport_attempts);
          rec.response = resp.text;
          rec.latency_ms = resp.latency_ms;
          rec.extracted = extract_choice(resp.text);
        } catch (const TransportError& e) {
          rec.failed = true;
          rec.error = e.what();
        }
        rec.correct = rec.extracted == job.mcq->correct_option;
        return rec;
      },
      std::max<std::size_t>(1, options.concurrency));
}

std::vector<EvalRecord> run_evaluation(const BenchmarkSplit& split, const std::vector<Mcq>& dataset,
                                       ChatEndpoint& model, const Condition& condition, const Retriever* retriever,
                                       const EvalOptions& options) {
  std::map<std::string, const Mcq*> by_id;
  for (const auto& q : dataset) by_id[q.id] = &q;
  std::vector<Mcq> test;
  for (const auto& id : split.test) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("split names unknown question " + id);
    test.push_back(*it->second);
  }
  return run_evaluation(test, model, condition, retriever, options);
}

// ── Report ──────────────────────────────────────────────────────────────────

namespace {

using boost::multiprecision::cpp_int;

// p/q as a percent, half-up to two decimals.
std::string percent_of(const cpp_int& p, const cpp_int& q) {
  const cpp_int hundredths = (p * 20000 + q) / (q * 2);
  const auto whole = static_cast<long long>(hundredths / 100);
  const auto frac = static_cast<long long>(hundredths % 100);
  return fmt::format("{}.{:02}", whole, frac);
}

}  // namespace

std::string format_percent(std::size_t correct, std::size_t attempted) {
  if (attempted == 0) throw std::invalid_argument("empty stratum has no percentage");
  return percent_of(cpp_int(correct), cpp_int(attempted));
}

Cell ReportRow::total() const {
  Cell c;
  for (const auto& r : runs) {
    c.correct += r.correct;
    c.attempted += r.attempted;
  }
  return c;
}

std::optional<std::string> ReportRow::run_percent(std::size_t run) const {
  if (run >= runs.size() || runs[run].attempted == 0) return std::nullopt;
  return format_percent(runs[run].correct, runs[run].attempted);
}

std::optional<std::string> ReportRow::mean_percent() const {
  // Sum of c_i / a_i over non-empty runs, kept as one exact fraction.
  cpp_int num = 0;
  cpp_int den = 1;
  std::size_t used = 0;
  for (const auto& r : runs) {
    if (r.attempted == 0) continue;
    num = num * r.attempted + den * r.correct;
    den *= r.attempted;
    ++used;
  }
  if (used == 0) return std::nullopt;
  return percent_of(num, den * used);
}

const ReportRow& Report::row(std::string_view dimension, std::string_view stratum) const {
  for (const auto& r : rows)
    if (r.dimension == dimension && r.stratum == stratum) return r;
  throw std::out_of_range(fmt::format("no report row {}/{}", dimension, stratum));
}

Report compute_report(const std::vector<EvalRecord>& records, const std::vector<Mcq>& questions) {
  if (records.empty()) throw ValidationError("no evaluation records to report");
  std::map<std::string, const Mcq*> by_id;
  for (const auto& q : questions) by_id[q.id] = &q;

  Report rep;
  rep.condition = records.front().condition.label();
  rep.records = records.size();
  for (const auto& r : records) {
    if (!by_id.contains(r.question_id)) throw ValidationError("record names unknown question " + r.question_id);
    if (r.condition.label() != rep.condition) throw ValidationError("records mix conditions");
    if (r.repeat < 1 || r.repeat > 3) throw ValidationError(fmt::format("repeat {} outside 1..3", r.repeat));
    rep.repeats = std::max(rep.repeats, r.repeat);
  }

  rep.rows.push_back({"overall", "all", {}});
  for (int l = 1; l <= 5; ++l) rep.rows.push_back({"level", fmt::format("L{}", l), {}});
  for (const auto j : all_values<Jurisdiction>()) rep.rows.push_back({"jurisdiction", std::string(display_name(j)), {}});
  for (int n = 1; n <= 5; ++n) rep.rows.push_back({"num_rules", std::to_string(n), {}});
  for (auto& row : rep.rows) row.runs.assign(static_cast<std::size_t>(rep.repeats), Cell{});

  auto index_of = [&](std::string_view dim, const std::string& stratum) -> ReportRow* {
    for (auto& row : rep.rows)
      if (row.dimension == dim && row.stratum == stratum) return &row;
    return nullptr;
  };
  for (const auto& r : records) {
    const auto& q = *by_id.at(r.question_id);
    if (!r.extracted) ++rep.unparsed;
    if (r.failed) ++rep.transport_failures;
    const auto run = static_cast<std::size_t>(r.repeat - 1);
    for (auto* row : {index_of("overall", "all"), index_of("level", fmt::format("L{}", q.level)),
                      index_of("jurisdiction", std::string(display_name(q.jurisdiction))),
                      index_of("num_rules", std::to_string(q.num_rules))}) {
      if (!row) continue;
      ++row->runs[run].attempted;
      if (r.correct) ++row->runs[run].correct;
    }
  }
  return rep;
}

std::string report_csv(const Report& rep) {
  std::string out = "condition,dimension,stratum,attempted,correct";
  for (int r = 1; r <= rep.repeats; ++r) out += fmt::format(",run_{}", r);
  out += ",mean\n";
  for (const auto& row : rep.rows) {
    const auto total = row.total();
    out += fmt::format("{},{},{},{},{}", rep.condition, row.dimension, row.stratum, total.attempted, total.correct);
    for (std::size_t r = 0; r < row.runs.size(); ++r) out += "," + row.run_percent(r).value_or("");
    out += "," + row.mean_percent().value_or("") + "\n";
  }
  return out;
}

std::string report_markdown(const Report& rep) {
  auto cell = [](const std::optional<std::string>& v) { return v.value_or("n/a"); };
  std::string out = fmt::format("# Evaluation report: {}\n\n", rep.condition);
  out += fmt::format("Records: {} ({} repeat(s)). Unparsed answers: {} (transport failures: {}), scored as wrong.\n\n",
                     rep.records, rep.repeats, rep.unparsed, rep.transport_failures);

  out += "## Accuracy by level (mean of repeats)\n\n| Condition | L1 | L2 | L3 | L4 | L5 | Overall |\n";
  out += "|---|---|---|---|---|---|---|\n";
  out += "| " + rep.condition;
  for (int l = 1; l <= 5; ++l) out += " | " + cell(rep.row("level", fmt::format("L{}", l)).mean_percent());
  out += " | " + cell(rep.row("overall", "all").mean_percent()) + " |\n";

  const std::vector<std::pair<std::string, std::string>> sections{
      {"overall", "Overall"}, {"level", "By level"}, {"jurisdiction", "By jurisdiction"}, {"num_rules", "By number of rules"}};
  for (const auto& [dim, title] : sections) {
    out += fmt::format("\n## {}\n\n| Stratum | Attempted | Correct", title);
    for (int r = 1; r <= rep.repeats; ++r) out += fmt::format(" | Run {}", r);
    out += " | Mean |\n|---|---|---";
    for (int r = 0; r <= rep.repeats; ++r) out += "|---";
    out += "|\n";
    for (const auto& row : rep.rows) {
      if (row.dimension != dim) continue;
      const auto total = row.total();
      out += fmt::format("| {} | {} | {}", row.stratum, total.attempted, total.correct);
      for (std::size_t r = 0; r < row.runs.size(); ++r) out += " | " + cell(row.run_percent(r));
      out += " | " + cell(row.mean_percent()) + " |\n";
    }
  }
  return out;
}

}  // namespace drivecombo
