#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "core/model.hpp"
#include "syntax/minilang.hpp"

namespace mutforge::rulegen {

// Declared in name order; enumeration visits operators in this order.
enum class RuleOperator { AOR, LOR, LVR, ROR, SDL, UOI };

const char* to_string(RuleOperator op) noexcept;
std::optional<RuleOperator> rule_operator_from_string(std::string_view name) noexcept;
std::set<RuleOperator> all_operators();
/// Throws Error(Config) on an unknown name.
std::set<RuleOperator> parse_operators(const std::vector<std::string>& names);

/// Replacement operators for a binary operator under AOR, ROR or LOR
/// (empty when `op` is not one of theirs).
std::vector<std::string> operator_replacements(RuleOperator rule, std::string_view op);

/// LVR replacements for a literal: int n gives 0, 1, n+1, n-1 without n and
/// without repeats; a bool gives its negation.
std::vector<std::string> literal_replacements(std::string_view literal);

/// Rule mutants for every node of `unit` lying within `span` (which must
/// name unit.file). Order: pre-order node, operator, replacement. Each record
/// covers the full source lines of the mutated node. Ids are
/// "<id_prefix>-<n>" numbered from 1.
std::vector<MutationRecord> enumerate_rule_mutants(const syntax::ParsedUnit& unit,
                                                   std::string_view source,
                                                   const std::set<RuleOperator>& operators,
                                                   const SourceLocation& span,
                                                   std::string_view id_prefix = "rule");

/// Token-level AOR/ROR/LOR/LVR variants of a single line of code, usable on
/// fragments that do not parse on their own. Whitespace between tokens is
/// preserved. Order: token position, then replacement.
std::vector<std::string> line_substitutions(std::string_view line);

}  // namespace mutforge::rulegen
