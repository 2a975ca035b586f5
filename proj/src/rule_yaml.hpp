#pragma once

// Rule-record YAML helpers shared by the rule file and the hierarchy export.

#include <yaml-cpp/yaml.h>

#include <string>
#include <string_view>

#include "drivecombo/rule_model.hpp"

namespace drivecombo {

AtomicRule rule_from_yaml(const YAML::Node& node, std::size_t index, Jurisdiction jurisdiction,
                          const RuleFileOptions& options);

void append_rule_record(std::string& out, const AtomicRule& rule, std::string_view indent);

}  // namespace drivecombo
