#include "core/model.hpp"

#include <algorithm>

#include "core/error.hpp"
#include "syntax/token.hpp"

namespace mutforge {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Config: return "config";
    case ErrorCode::Integrity: return "integrity";
    case ErrorCode::Stale: return "stale";
    case ErrorCode::FixtureInvalid: return "fixture-invalid";
    case ErrorCode::Transport: return "transport";
    case ErrorCode::Protocol: return "protocol";
    case ErrorCode::Undefined: return "undefined";
    case ErrorCode::Flaky: return "flaky";
    case ErrorCode::Unclassified: return "unclassified";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

bool is_safe_relative_path(std::string_view path) noexcept {
  if (path.empty() || path.front() == '/' || path.front() == '\\') return false;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t end = path.find_first_of("/\\", start);
    if (end == std::string_view::npos) end = path.size();
    std::string_view seg = path.substr(start, end - start);
    if (seg.empty() || seg == "." || seg == "..") return false;
    start = end + 1;
  }
  return true;
}

SourceLocation SourceLocation::make(std::string file, int line_start, int line_end) {
  SourceLocation loc{std::move(file), line_start, line_end};
  if (!loc.valid()) {
    throw Error(ErrorCode::InvalidArgument, "invalid source location " + to_string(loc));
  }
  return loc;
}

bool SourceLocation::valid() const noexcept {
  return line_start >= 1 && line_end >= line_start && is_safe_relative_path(file);
}

std::string to_string(const SourceLocation& loc) {
  std::string out = loc.file + ":" + std::to_string(loc.line_start);
  if (loc.line_end != loc.line_start) out += "-" + std::to_string(loc.line_end);
  return out;
}

const char* to_string(StatusKind kind) noexcept {
  switch (kind) {
    case StatusKind::Pending: return "Pending";
    case StatusKind::NonCompilable: return "NonCompilable";
    case StatusKind::IdenticalToOriginal: return "IdenticalToOriginal";
    case StatusKind::Duplicate: return "Duplicate";
    case StatusKind::Viable: return "Viable";
    case StatusKind::EquivalentLabeled: return "EquivalentLabeled";
  }
  return "?";
}

std::optional<StatusKind> status_kind_from_string(std::string_view name) noexcept {
  for (auto k : {StatusKind::Pending, StatusKind::NonCompilable,
                 StatusKind::IdenticalToOriginal, StatusKind::Duplicate,
                 StatusKind::Viable, StatusKind::EquivalentLabeled}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

bool MutationPool::classified() const noexcept {
  return std::none_of(records.begin(), records.end(), [](const MutationRecord& r) {
    return r.status.kind == StatusKind::Pending;
  });
}

const MutationRecord* MutationPool::find(std::string_view id) const noexcept {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<const MutationRecord*> MutationPool::viable() const {
  std::vector<const MutationRecord*> out;
  for (const auto& r : records) {
    if (r.status.viable()) out.push_back(&r);
  }
  return out;
}

bool token_equal(std::string_view a, std::string_view b) {
  return syntax::normalized_tokens(a) == syntax::normalized_tokens(b);
}

namespace {

std::string token_key(std::string_view text) {
  std::string key;
  for (const auto& t : syntax::normalized_tokens(text)) {
    key += t;
    key.push_back('\x1f');
  }
  return key;
}

using SiteKey = std::pair<SourceLocation, std::string>;

}  // namespace

std::vector<std::string> needs_compilation(const MutationPool& pool) {
  std::vector<std::string> out;
  std::set<SiteKey> seen;
  for (const auto& r : pool.records) {
    std::string key = token_key(r.mutated_text);
    if (key == token_key(r.original_text)) continue;
    if (seen.insert({r.location, std::move(key)}).second) out.push_back(r.id);
  }
  return out;
}

MutationPool classify(MutationPool pool, const CompileResults& results) {
  std::set<std::string, std::less<>> ids;
  for (const auto& r : pool.records) {
    if (!ids.insert(r.id).second) {
      throw Error(ErrorCode::Integrity, "duplicate mutant id '" + r.id + "' in pool");
    }
  }
  for (const auto& [id, _] : results) {
    if (!ids.count(id)) {
      throw Error(ErrorCode::Integrity, "compile result for unknown mutant id '" + id + "'");
    }
  }

  std::map<SiteKey, const CompileOutcome*> outcome_by_site;
  std::map<SiteKey, std::string> first_viable;
  for (auto& r : pool.records) {
    std::string key = token_key(r.mutated_text);
    MutantStatus status;
    if (key == token_key(r.original_text)) {
      status.kind = StatusKind::IdenticalToOriginal;
      r.status = std::move(status);
      continue;
    }
    SiteKey site{r.location, std::move(key)};
    const CompileOutcome* outcome = nullptr;
    if (auto it = results.find(r.id); it != results.end()) {
      outcome = &it->second;
      outcome_by_site.emplace(site, outcome);
    } else if (auto it2 = outcome_by_site.find(site); it2 != outcome_by_site.end()) {
      outcome = it2->second;
    } else {
      throw Error(ErrorCode::Integrity, "no compile result for mutant '" + r.id + "'");
    }

    if (!outcome->ok) {
      status.kind = StatusKind::NonCompilable;
      status.diagnostics = outcome->diagnostics;
    } else if (auto v = first_viable.find(site); v != first_viable.end()) {
      status.kind = StatusKind::Duplicate;
      status.duplicate_of = v->second;
    } else {
      status.kind = r.status.kind == StatusKind::EquivalentLabeled
                        ? StatusKind::EquivalentLabeled
                        : StatusKind::Viable;
      first_viable.emplace(std::move(site), r.id);
    }
    r.status = std::move(status);
  }
  return pool;
}

SetCounts set_counts(const MutationPool& pool) {
  SetCounts c;
  for (const auto& r : pool.records) {
    if (r.status.kind == StatusKind::Pending) {
      throw Error(ErrorCode::Unclassified,
                  "pool '" + pool.generator_id + "' has unclassified record '" + r.id + "'");
    }
    ++c.all;
    if (r.status.in_compilable()) ++c.compilable;
    if (r.status.useless()) ++c.useless;
    if (r.status.viable()) ++c.viable;
  }
  return c;
}

char verdict_code(Verdict v) noexcept {
  switch (v) {
    case Verdict::Pass: return 'P';
    case Verdict::Fail: return 'F';
    case Verdict::Timeout: return 'T';
    case Verdict::Crash: return 'C';
    case Verdict::NotRun: return 'N';
  }
  return 'N';
}

std::optional<Verdict> verdict_from_code(char c) noexcept {
  switch (c) {
    case 'P': return Verdict::Pass;
    case 'F': return Verdict::Fail;
    case 'T': return Verdict::Timeout;
    case 'C': return Verdict::Crash;
    case 'N': return Verdict::NotRun;
    default: return std::nullopt;
  }
}

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Pass: return "Pass";
    case Verdict::Fail: return "Fail";
    case Verdict::Timeout: return "Timeout";
    case Verdict::Crash: return "Crash";
    case Verdict::NotRun: return "NotRun";
  }
  return "?";
}

KillMatrix::KillMatrix(std::vector<std::string> mutant_ids, std::vector<std::string> test_ids)
    : mutants_(std::move(mutant_ids)),
      tests_(std::move(test_ids)),
      cells_(mutants_.size() * tests_.size(), Verdict::NotRun),
      baseline_(tests_.size(), Verdict::NotRun) {}

Verdict KillMatrix::cell(std::size_t mutant, std::size_t test) const {
  if (mutant >= mutants_.size() || test >= tests_.size()) {
    throw Error(ErrorCode::InvalidArgument, "kill matrix index out of range");
  }
  return cells_[mutant * tests_.size() + test];
}

void KillMatrix::set_cell(std::size_t mutant, std::size_t test, Verdict v) {
  if (mutant >= mutants_.size() || test >= tests_.size()) {
    throw Error(ErrorCode::InvalidArgument, "kill matrix index out of range");
  }
  cells_[mutant * tests_.size() + test] = v;
}

std::optional<std::size_t> KillMatrix::mutant_index(std::string_view id) const {
  for (std::size_t i = 0; i < mutants_.size(); ++i) {
    if (mutants_[i] == id) return i;
  }
  return std::nullopt;
}

std::set<std::string> KillMatrix::killing_tests(std::size_t mutant) const {
  std::set<std::string> out;
  for (std::size_t t = 0; t < tests_.size(); ++t) {
    if (baseline_[t] == Verdict::Pass && is_kill_verdict(cell(mutant, t))) {
      out.insert(tests_[t]);
    }
  }
  return out;
}

bool KillMatrix::killed(std::size_t mutant) const {
  for (std::size_t t = 0; t < tests_.size(); ++t) {
    if (baseline_[t] == Verdict::Pass && is_kill_verdict(cell(mutant, t))) return true;
  }
  return false;
}

KillMatrix KillMatrix::restrict_tests(const std::set<std::string>& keep) const {
  std::vector<std::size_t> cols;
  std::vector<std::string> names;
  for (std::size_t t = 0; t < tests_.size(); ++t) {
    if (keep.count(tests_[t])) {
      cols.push_back(t);
      names.push_back(tests_[t]);
    }
  }
  KillMatrix out(mutants_, names);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.set_baseline(k, baseline_[cols[k]]);
    for (std::size_t m = 0; m < mutants_.size(); ++m) out.set_cell(m, k, cell(m, cols[k]));
  }
  return out;
}

const std::string* ProjectSnapshot::file(std::string_view path) const {
  auto it = files.find(std::string(path));
  return it == files.end() ? nullptr : &it->second;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(line);
    start = end + 1;
  }
  return out;
}

std::string line_span(std::string_view text, int first, int last) {
  auto lines = split_lines(text);
  std::string out;
  for (int l = first; l <= last; ++l) {
    if (l < 1 || static_cast<std::size_t>(l) > lines.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "line " + std::to_string(l) + " out of range (file has " +
                      std::to_string(lines.size()) + " lines)");
    }
    if (l > first) out.push_back('\n');
    out += lines[static_cast<std::size_t>(l - 1)];
  }
  return out;
}

}  // namespace mutforge
