#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drivecombo/chat_endpoint.hpp"
#include "drivecombo/rule_model.hpp"

namespace drivecombo {

enum class PerceptualCombo { DoubleStatic, DoubleDynamic, Hybrid };
enum class NormRelation { NormHarmony, NormConflict };
enum class Coexistence { Unchecked, Feasible, Infeasible };

template <>
struct EnumTraits<PerceptualCombo> {
  static constexpr std::array entries{
      EnumEntry<PerceptualCombo>{PerceptualCombo::DoubleStatic, "double_static"},
      EnumEntry<PerceptualCombo>{PerceptualCombo::DoubleDynamic, "double_dynamic"},
      EnumEntry<PerceptualCombo>{PerceptualCombo::Hybrid, "hybrid"},
  };
};

template <>
struct EnumTraits<NormRelation> {
  static constexpr std::array entries{
      EnumEntry<NormRelation>{NormRelation::NormHarmony, "norm_harmony"},
      EnumEntry<NormRelation>{NormRelation::NormConflict, "norm_conflict"},
  };
};

template <>
struct EnumTraits<Coexistence> {
  static constexpr std::array entries{
      EnumEntry<Coexistence>{Coexistence::Unchecked, "unchecked"},
      EnumEntry<Coexistence>{Coexistence::Feasible, "feasible"},
      EnumEntry<Coexistence>{Coexistence::Infeasible, "infeasible"},
  };
};

// A candidate or accepted rule combination. Singletons are level-1 entries
// and carry no combo labels.
struct RuleCombo {
  std::vector<RuleId> members;  // sorted by id
  std::optional<PerceptualCombo> perceptual_combo;
  std::optional<NormRelation> norm_relation;
  int level = 0;  // 0 until labels are derived
  Coexistence coexistence = Coexistence::Unchecked;
  // Oracle reasoning kept for audit.
  std::string oracle_reasoning;
  // Set when the verdict was forced (unparseable oracle output).
  bool audit_flag = false;

  bool operator==(const RuleCombo&) const = default;
};

// Id -> rule lookup over a rule list. Holds pointers into `rules`, which must
// outlive the index.
class RuleIndex {
 public:
  explicit RuleIndex(const std::vector<AtomicRule>& rules);
  const AtomicRule& at(const RuleId& id) const;
  const AtomicRule* find(const RuleId& id) const;

 private:
  std::map<RuleId, const AtomicRule*> by_id_;
};

// All k-subsets of `rules` whose members share one action type, members
// ordered by id, combos ordered lexicographically by member ids.
// Throws ValidationError on mixed jurisdictions or k outside 2..5.
std::vector<RuleCombo> generate_candidate_combos(const std::vector<AtomicRule>& rules, int k);

// Fills perceptual_combo, norm_relation and level. Throws ValidationError on
// singletons, mixed action types, or a speed_limit member without a range.
RuleCombo derive_labels(const RuleCombo& combo, const RuleIndex& index);

struct CoexistenceVerdict {
  // nullopt when the oracle output could not be interpreted.
  std::optional<bool> feasible;
  std::string reasoning;
};

class CoexistenceOracle {
 public:
  virtual ~CoexistenceOracle() = default;
  // May throw TransportError.
  virtual CoexistenceVerdict judge(const std::vector<const AtomicRule*>& rules) = 0;
};

// Offline oracle over context tags: two rules clash when they both tag a
// namespace and their value sets there are disjoint. Namespaces listed as
// shared (default "agent") describe co-present participants and never clash.
class TagCoexistenceOracle final : public CoexistenceOracle {
 public:
  TagCoexistenceOracle() = default;
  explicit TagCoexistenceOracle(std::set<std::string> shared_namespaces)
      : shared_(std::move(shared_namespaces)) {}

  CoexistenceVerdict judge(const std::vector<const AtomicRule*>& rules) override;

 private:
  std::set<std::string> shared_{"agent"};
};

// Asks a chat endpoint with the coexistence prompt.
class ModelCoexistenceOracle final : public CoexistenceOracle {
 public:
  explicit ModelCoexistenceOracle(ChatEndpoint& endpoint) : endpoint_(endpoint) {}
  CoexistenceVerdict judge(const std::vector<const AtomicRule*>& rules) override;

 private:
  ChatEndpoint& endpoint_;
};

// Reads an "Output: 1" / "Output: 0" style verdict, or a bare leading digit.
std::optional<bool> parse_coexistence_output(const std::string& text);

struct CoexistenceOptions {
  // Total oracle attempts per combo, shared by transport and parse failures.
  int attempts = 3;
  std::size_t max_in_flight = 4;
};

// Transport failures are retried and propagate once the budget is spent.
// Uninterpretable verdicts are retried and end as Infeasible with audit_flag.
RuleCombo validate_coexistence(const RuleCombo& combo, const RuleIndex& index, CoexistenceOracle& oracle,
                               const CoexistenceOptions& options = {});

// Concurrent variant; result order follows the input order.
std::vector<RuleCombo> validate_coexistence_all(const std::vector<RuleCombo>& combos, const RuleIndex& index,
                                                CoexistenceOracle& oracle, const CoexistenceOptions& options = {});

struct HierarchicalRuleSet {
  Jurisdiction jurisdiction = Jurisdiction::China;
  std::vector<AtomicRule> atomic;
  std::vector<RuleCombo> combos;    // Feasible only
  std::vector<RuleCombo> rejected;  // Infeasible, kept for audit

  // Level-1 entries are the atomic rules as singleton combos.
  std::vector<RuleCombo> entries_at_level(int level) const;
  std::map<int, std::size_t> level_counts() const;
};

// Throws ValidationError for unknown member ids, unlabeled or unchecked combos.
HierarchicalRuleSet build_hierarchy(const std::vector<AtomicRule>& rules, const std::vector<RuleCombo>& combos);

// YAML export with a stable key order, and its reader.
std::string export_hierarchy(const HierarchicalRuleSet& set);
HierarchicalRuleSet import_hierarchy(std::string_view text, const RuleFileOptions& options = {});

}  // namespace drivecombo
