#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness/harness.hpp"
#include "llmgen/llmgen.hpp"
#include "metrics/metrics.hpp"
#include "rulegen/rulegen.hpp"
#include "study/study.hpp"

namespace mutforge::study {

using json = nlohmann::json;

// ---- configuration -----------------------------------------------------------

struct AdapterSpec {
  std::string kind = "minilang";  // or "subprocess"
  harness::SubprocessConfig subprocess;
  std::vector<ClassifierRule> error_rules;  // empty: defaults for the kind
};

/// Error rules in effect for an adapter spec.
std::vector<ClassifierRule> effective_rules(const AdapterSpec& spec);

std::unique_ptr<harness::ToolchainAdapter> make_adapter(const AdapterSpec& spec);

enum class GeneratorType { Llm, Rule };

struct GeneratorSpec {
  std::string id;
  GeneratorType type = GeneratorType::Rule;
  std::string backend;  // llm only
  llmgen::PromptTemplate prompt = llmgen::PromptTemplate::P1;
  std::set<rulegen::RuleOperator> operators = rulegen::all_operators();  // rule only
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path out_dir = "mutforge-out";
  int context_length = 3;
  std::filesystem::path bugs_dir;
  std::vector<std::string> bugs;  // empty: every bug case under bugs_dir
  double confidence = 0.95;
  double margin = 0.05;
  std::size_t subsample_rounds = 10;
  std::optional<double> test_timeout;  // seconds per test
  AdapterSpec adapter;
  std::vector<llmgen::BackendDescriptor> backends;
  std::vector<GeneratorSpec> generators;
  std::map<std::string, std::filesystem::path> labels;  // generator id -> label CSV

  const llmgen::BackendDescriptor* backend(const std::string& id) const;
};

/// Where each key of a parsed config file came from ("file:line:col"),
/// keyed by dotted path such as "generators[1].prompt".
using SourceMap = std::map<std::string, std::string>;

struct ConfigDocument {
  json data;
  SourceMap where;
  std::filesystem::path base_dir;  // relative paths resolve against it
};

/// Parses TOML (.toml) or JSON (anything else). Throws Error(Config) with
/// the parser's position on malformed input, Error(Io) when unreadable.
ConfigDocument read_config_document(const std::filesystem::path& path);

/// Throws Error(Config) naming the offending key and, when known, its
/// position. Unknown keys are rejected.
ExperimentConfig config_from_document(const ConfigDocument& doc);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Snapshot for the manifest (paths as given, secrets never included).
json config_to_json(const ExperimentConfig& cfg);

// ---- generation ---------------------------------------------------------------

struct GenerationOutput {
  MutationPool pool;  // unclassified
  std::vector<llmgen::GenerationResult> results;  // llm only
  std::size_t prompted = 0;
};

/// Runs one generator against one bug's context. Record ids are
/// "<id_prefix>-<n>".
GenerationOutput generate(const BugCase& bug, const BugContext& ctx, const GeneratorSpec& gen,
                          llmgen::ChatBackend* backend, const std::string& id_prefix);

/// Classifies a pool by compiling what needs compiling on the fixed version.
MutationPool screen_and_classify(harness::ToolchainAdapter& adapter, const ProjectSnapshot& fixed,
                                 MutationPool pool, std::size_t workers = 1);

/// Kill matrix over the pool's viable records and every test of the fixed
/// version.
harness::KillRun execute(harness::ToolchainAdapter& adapter, const ProjectSnapshot& fixed,
                         const MutationPool& pool, const harness::ExecOptions& opts);

// ---- evaluation ---------------------------------------------------------------

struct CellCounts {
  std::size_t prompted = 0;
  std::size_t parsed = 0;  // responses holding a JSON array (rule: enumerations)
  std::size_t all = 0;
  std::size_t compilable = 0;
  std::size_t useless = 0;
  std::size_t viable = 0;
  std::size_t executed = 0;  // viable mutants in the kill matrix
  std::size_t killed = 0;
  std::size_t coupled = 0;
  std::size_t detected = 0;  // 1 when the bug is detected
  std::size_t exact_match = 0;
  std::size_t diversity_considered = 0;
  std::size_t deletions = 0;
  std::size_t bleu_scored = 0;
  std::size_t tree_scored = 0;
  std::map<ErrorType, std::size_t> error_types;
  std::map<syntax::NodeKind, std::size_t> origin_nodes;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
};

json to_json(const CellCounts& c);
CellCounts cell_counts_from_json(const json& j);

struct CellEvaluation {
  CellCounts counts;
  json report;  // deterministic metric tree for the cell
  std::map<std::string, bool> coupled_by_id;
};

struct EvaluationInput {
  const BugCase* bug = nullptr;
  const BugContext* context = nullptr;
  const MutationPool* pool = nullptr;  // classified
  const KillMatrix* matrix = nullptr;  // null: behavior not computed
  std::vector<ClassifierRule> rules = minilang_rules();
  const std::vector<metrics::LabelRow>* labels = nullptr;
  const llmgen::BackendDescriptor* backend = nullptr;  // for cost
  std::size_t prompted = 0;
  std::size_t parsed = 0;
};

/// Every per-cell metric. A missing matrix yields a behavior section
/// {"computed": false}.
CellEvaluation evaluate_cell(const EvaluationInput& in);

// ---- experiment ----------------------------------------------------------------

struct RunOptions {
  std::function<void(const std::string&)> warn;
};

struct RunResult {
  json report;    // report.json
  json manifest;  // manifest.json
  json timing;    // timing.json
  std::string summary;  // summary.md
  std::vector<std::filesystem::path> written;
  std::size_t failed_cells = 0;
};

/// Runs the bug x generator grid and writes the report bundle into
/// cfg.out_dir. Cell failures are recorded, not thrown.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Renders the Markdown summary from one or more report.json documents.
std::string render_summary(const std::vector<json>& reports);

}  // namespace mutforge::study
