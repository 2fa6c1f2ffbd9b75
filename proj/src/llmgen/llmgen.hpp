#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/model.hpp"

namespace mutforge::llmgen {

enum class PromptTemplate { P1, P2, P3, P4 };

const char* to_string(PromptTemplate t) noexcept;
std::optional<PromptTemplate> prompt_template_from_string(std::string_view s) noexcept;

struct FewShotExample {
  std::string correct;
  std::string buggy;
};

/// The six QuixBugs pairs used by P1 and P4.
const std::vector<FewShotExample>& default_examples();

struct PromptRequest {
  PromptTemplate tmpl = PromptTemplate::P1;
  std::string target;  // the lines to mutate
  SourceLocation target_location;
  std::optional<std::string> enclosing_function;  // P1, P2, P4
  std::optional<std::string> unit_tests;          // P4
  std::vector<FewShotExample> examples;           // P1, P4
  std::size_t budget = 0;
};

/// Non-blank lines of the target. Throws Error(InvalidArgument) when there are none.
std::size_t budget_for(std::string_view target);

/// Throws Error(InvalidArgument) naming the first missing field.
std::string build_prompt(const PromptRequest& req);

struct Candidate {
  SourceLocation location;
  std::string mutated_text;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ParseResult {
  std::vector<Candidate> candidates;
  bool parse_failure = false;  // no JSON array in the response
  std::size_t skipped = 0;
};

/// First well-formed JSON array wins; elements need an integer `line` inside
/// the target span and a non-empty string `mutated_code`.
ParseResult parse_response(std::string_view raw, const SourceLocation& target);

enum class BackendKind { HttpChat, Stub };

struct BackendDescriptor {
  BackendKind kind = BackendKind::Stub;
  std::string id = "stub";
  std::string endpoint;  // http only, e.g. http://host:port/v1/chat/completions
  std::string model_name = "stub";
  double price_prompt_per_1k = 0.0;
  double price_completion_per_1k = 0.0;
  std::size_t max_in_flight = 4;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int retries = 3;
  double backoff_seconds = 0.5;  // doubled after each failed attempt
  double request_timeout = 60.0;
  std::string api_key_env = "MUTFORGE_API_KEY";
};

/// Throws Error(Config) when a field is out of range.
void validate(const BackendDescriptor& d);

struct Completion {
  std::string text;
  TokenUsage usage;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual const BackendDescriptor& descriptor() const = 0;
  /// Thread-safe. Throws Error(Transport) or Error(Protocol).
  virtual Completion complete(const std::string& prompt) = 0;
};

std::unique_ptr<ChatBackend> make_backend(const BackendDescriptor& d);

struct GenerationResult {
  std::string raw_response;
  std::vector<Candidate> candidates;
  bool parse_failure = false;
  std::size_t skipped = 0;
  TokenUsage usage;
  double wall_time = 0.0;
};

GenerationResult request_mutations(ChatBackend& backend, const std::string& prompt,
                                   const SourceLocation& target);

/// Builds records from candidates against the fixed project. Ids are
/// prefix-N; origin is "<backend id>:<template>". Candidates naming a file or
/// line missing from the project are dropped.
std::vector<MutationRecord> to_records(const GenerationResult& result,
                                       const ProjectSnapshot& project,
                                       const std::string& origin, const std::string& id_prefix,
                                       std::size_t first_index = 1);

struct CostSummary {
  std::size_t mutations = 0;
  double wall_time = 0.0;
  double agt_seconds = 0.0;
  TokenUsage usage;
  double usd_total = 0.0;
  double usd_per_1k = 0.0;
};

/// Throws Error(InvalidArgument) when no candidate was produced.
CostSummary cost_of(const std::vector<GenerationResult>& results, const BackendDescriptor& d);

/// Deterministic offline response for a prompt built by build_prompt().
std::string stub_response(std::uint64_t seed, std::string_view prompt);

/// Whitespace-delimited word count.
std::uint64_t word_count(std::string_view s);

}  // namespace mutforge::llmgen
