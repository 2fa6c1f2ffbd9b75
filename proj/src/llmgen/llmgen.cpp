#include "llmgen/llmgen.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>

#include "core/error.hpp"

namespace mutforge::llmgen {

using nlohmann::json;

const char* to_string(PromptTemplate t) noexcept {
  switch (t) {
    case PromptTemplate::P1: return "P1";
    case PromptTemplate::P2: return "P2";
    case PromptTemplate::P3: return "P3";
    case PromptTemplate::P4: return "P4";
  }
  return "?";
}

std::optional<PromptTemplate> prompt_template_from_string(std::string_view s) noexcept {
  for (auto t : {PromptTemplate::P1, PromptTemplate::P2, PromptTemplate::P3, PromptTemplate::P4}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

const std::vector<FewShotExample>& default_examples() {
  static const std::vector<FewShotExample> examples = {
      {"n = (n & (n - 1));", "n = (n ^ (n - 1));"},
      {"while (!queue.isEmpty())", "while (true)"},
      {"return depth==0;", "return true;"},
      {"ArrayList r = new ArrayList();\nr.add(first).addll(subset);\nto_add(r);",
       "to_add.addAll(subset);"},
      {"c = bin_op.apply(b,a);", "c = bin_op.apply(a,b);"},
      {"while(Math.abs(x-approx*approx)>epsilon)", "while(Math.abs(x-approx)>epsilon)"},
  };
  return examples;
}

namespace {

bool blank(std::string_view line) { return line.find_first_not_of(" \t\r") == std::string_view::npos; }

std::string fenced(std::string_view code) {
  std::string out = "```\n";
  out += code;
  if (!code.empty() && code.back() != '\n') out += "\n";
  out += "```\n";
  return out;
}

std::string indented(std::string_view code) {
  std::string out;
  for (const auto& line : split_lines(code)) out += "    " + line + "\n";
  return out;
}

}  // namespace

std::size_t budget_for(std::string_view target) {
  std::size_t n = 0;
  for (const auto& line : split_lines(target)) n += blank(line) ? 0 : 1;
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "target excerpt has no code lines");
  return n;
}

std::string build_prompt(const PromptRequest& req) {
  bool wants_function = req.tmpl != PromptTemplate::P3;
  bool wants_examples = req.tmpl == PromptTemplate::P1 || req.tmpl == PromptTemplate::P4;
  bool wants_tests = req.tmpl == PromptTemplate::P4;
  auto missing = [&](const char* field) {
    return Error(ErrorCode::InvalidArgument,
                 std::string("prompt ") + to_string(req.tmpl) + " requires field '" + field + "'");
  };
  if (blank(req.target)) throw missing("target");
  if (req.budget < 1) throw missing("budget");
  if (wants_function && (!req.enclosing_function || blank(*req.enclosing_function))) {
    throw missing("enclosing_function");
  }
  if (wants_examples && req.examples.empty()) throw missing("examples");
  if (wants_tests && (!req.unit_tests || blank(*req.unit_tests))) throw missing("unit_tests");

  std::string p;
  p += "### Instruction\n";
  p += "Generate mutants for the target code element given under Input.\n\n";
  p += "### Context\n";
  p += "A mutant is a small syntactic change to a program that simulates a real bug. "
       "Mutation testing uses mutants to measure how well a test suite detects faults.\n";
  if (wants_function) {
    p += "\nThe target code element is part of this function:\n";
    p += fenced(*req.enclosing_function);
  }
  if (wants_examples) {
    p += "\nExamples of real bugs, each shown as the correct code and its buggy version:\n";
    for (std::size_t i = 0; i < req.examples.size(); ++i) {
      p += "Example " + std::to_string(i + 1) + "\n  Correct:\n" +
           indented(req.examples[i].correct) + "  Buggy:\n" + indented(req.examples[i].buggy);
    }
  }
  if (wants_tests) {
    p += "\nThe unit tests of this function:\n";
    p += fenced(*req.unit_tests);
  }
  p += "\n### Input\n";
  p += "Target code element in " + req.target_location.file + " (line number: code):\n";
  int line = req.target_location.line_start;
  for (const auto& text : split_lines(req.target)) {
    p += std::to_string(line++) + ": " + text + "\n";
  }
  p += "Generate " + std::to_string(req.budget) + " mutants, one per line of the target.\n\n";
  p += "### Output\n";
  p += "Answer with a JSON array of objects with the fields \"line\" (the line number of the "
       "mutated line) and \"mutated_code\" (the complete mutated line), for example:\n";
  p += "[{\"line\": " + std::to_string(req.target_location.line_start) +
       ", \"mutated_code\": \"...\"}]\n";
  return p;
}

namespace {

// Index one past the bracket matching raw[open], or npos.
std::size_t matching_bracket(std::string_view raw, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    char c = raw[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth == 0) return c == ']' ? i + 1 : std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

}  // namespace

ParseResult parse_response(std::string_view raw, const SourceLocation& target) {
  ParseResult out;
  std::optional<json> array;
  for (std::size_t pos = raw.find('['); pos != std::string_view::npos;
       pos = raw.find('[', pos + 1)) {
    std::size_t end = matching_bracket(raw, pos);
    if (end == std::string_view::npos) continue;
    json j = json::parse(raw.substr(pos, end - pos), nullptr, false);
    if (!j.is_discarded() && j.is_array()) {
      array = std::move(j);
      break;
    }
  }
  if (!array) {
    out.parse_failure = true;
    return out;
  }
  for (const auto& el : *array) {
    const json* line = el.is_object() && el.contains("line") ? &el["line"] : nullptr;
    const json* code = el.is_object() && el.contains("mutated_code") ? &el["mutated_code"] : nullptr;
    if (!line || !code || !line->is_number_integer() || !code->is_string() ||
        code->get_ref<const std::string&>().empty()) {
      ++out.skipped;
      continue;
    }
    auto n = line->get<long long>();
    if (n < target.line_start || n > target.line_end) {
      ++out.skipped;
      continue;
    }
    int ln = static_cast<int>(n);
    out.candidates.push_back({SourceLocation{target.file, ln, ln}, code->get<std::string>()});
  }
  return out;
}

void validate(const BackendDescriptor& d) {
  auto bad = [](const std::string& what) { return Error(ErrorCode::Config, "backend: " + what); };
  if (d.id.empty()) throw bad("id must not be empty");
  if (d.price_prompt_per_1k < 0 || d.price_completion_per_1k < 0) {
    throw bad("prices must be >= 0");
  }
  if (d.max_in_flight < 1) throw bad("max_in_flight must be >= 1");
  if (!(d.temperature >= 0.0 && d.temperature <= 2.0)) throw bad("temperature must lie in [0, 2]");
  if (d.retries < 0) throw bad("retries must be >= 0");
  if (d.backoff_seconds < 0) throw bad("backoff_seconds must be >= 0");
  if (!(d.request_timeout > 0)) throw bad("request_timeout must be > 0");
  if (d.kind == BackendKind::HttpChat && d.endpoint.empty()) {
    throw bad("http-chat backend '" + d.id + "' needs an endpoint");
  }
}

std::uint64_t word_count(std::string_view s) {
  std::uint64_t n = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

namespace {

class StubBackend final : public ChatBackend {
 public:
  explicit StubBackend(BackendDescriptor d) : d_(std::move(d)) {}
  const BackendDescriptor& descriptor() const override { return d_; }
  Completion complete(const std::string& prompt) override {
    Completion c;
    c.text = stub_response(d_.seed, prompt);
    c.usage.prompt_tokens = word_count(prompt);
    c.usage.completion_tokens = word_count(c.text);
    return c;
  }

 private:
  BackendDescriptor d_;
};

}  // namespace

std::unique_ptr<ChatBackend> make_http_backend(const BackendDescriptor& d);

std::unique_ptr<ChatBackend> make_backend(const BackendDescriptor& d) {
  validate(d);
  if (d.kind == BackendKind::Stub) return std::make_unique<StubBackend>(d);
  return make_http_backend(d);
}

GenerationResult request_mutations(ChatBackend& backend, const std::string& prompt,
                                   const SourceLocation& target) {
  auto start = std::chrono::steady_clock::now();
  Completion c = backend.complete(prompt);
  GenerationResult r;
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.raw_response = std::move(c.text);
  r.usage = c.usage;
  auto parsed = parse_response(r.raw_response, target);
  r.candidates = std::move(parsed.candidates);
  r.parse_failure = parsed.parse_failure;
  r.skipped = parsed.skipped;
  return r;
}

std::vector<MutationRecord> to_records(const GenerationResult& result,
                                       const ProjectSnapshot& project,
                                       const std::string& origin, const std::string& id_prefix,
                                       std::size_t first_index) {
  std::vector<MutationRecord> out;
  for (const auto& c : result.candidates) {
    const std::string* file = project.file(c.location.file);
    if (!file) continue;
    auto lines = split_lines(*file);
    if (c.location.line_start < 1 || static_cast<std::size_t>(c.location.line_end) > lines.size()) {
      continue;
    }
    MutationRecord r;
    r.origin = origin;
    r.location = c.location;
    for (int l = c.location.line_start; l <= c.location.line_end; ++l) {
      if (l > c.location.line_start) r.original_text += "\n";
      r.original_text += lines[static_cast<std::size_t>(l - 1)];
    }
    r.mutated_text = c.mutated_text;
    out.push_back(std::move(r));
  }
  // Spread time and tokens so that per-record values sum to the prompt's totals.
  std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = out[i];
    r.id = id_prefix + "-" + std::to_string(first_index + i);
    r.gen_wall_time = result.wall_time / static_cast<double>(n);
    TokenUsage u;
    u.prompt_tokens = result.usage.prompt_tokens / n + (i == 0 ? result.usage.prompt_tokens % n : 0);
    u.completion_tokens =
        result.usage.completion_tokens / n + (i == 0 ? result.usage.completion_tokens % n : 0);
    r.token_usage = u;
  }
  return out;
}

CostSummary cost_of(const std::vector<GenerationResult>& results, const BackendDescriptor& d) {
  CostSummary s;
  for (const auto& r : results) {
    s.mutations += r.candidates.size();
    s.wall_time += r.wall_time;
    s.usage.prompt_tokens += r.usage.prompt_tokens;
    s.usage.completion_tokens += r.usage.completion_tokens;
  }
  if (s.mutations == 0) {
    throw Error(ErrorCode::InvalidArgument, "cost is undefined when no mutation was generated");
  }
  s.usd_total = static_cast<double>(s.usage.prompt_tokens) / 1000.0 * d.price_prompt_per_1k +
                static_cast<double>(s.usage.completion_tokens) / 1000.0 * d.price_completion_per_1k;
  auto n = static_cast<double>(s.mutations);
  s.agt_seconds = s.wall_time / n;
  s.usd_per_1k = 1000.0 * s.usd_total / n;
  return s;
}

}  // namespace mutforge::llmgen
