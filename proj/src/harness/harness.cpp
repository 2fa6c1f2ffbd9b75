#include "harness/harness.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "core/error.hpp"
#include "core/serialize.hpp"

namespace mutforge::harness {

namespace fs = std::filesystem;

void Workspace::write_to(const fs::path& root) const {
  for (const auto& [rel, text] : project.files) write_file(root / rel, text);
}

ProjectSnapshot load_snapshot(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::Io, "not a directory: " + root.string());
  ProjectSnapshot snap;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
       ++it) {
    std::string name = it->path().filename().string();
    if (!name.empty() && name[0] == '.') {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file()) continue;
    std::string rel = fs::relative(it->path(), root).generic_string();
    snap.files[rel] = read_file(it->path());
  }
  return snap;
}

namespace {

std::string normalize_newlines(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') continue;
    out.push_back(s[i]);
  }
  return out;
}

std::string join(const std::vector<std::string>& lines, std::size_t first, std::size_t last,
                 std::string_view sep) {
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i > first) out += sep;
    out += lines[i];
  }
  return out;
}

}  // namespace

Workspace materialize(const ProjectSnapshot& project, const MutationRecord& m) {
  const std::string* text = project.file(m.location.file);
  if (!text) {
    throw Error(ErrorCode::InvalidArgument,
                "mutant '" + m.id + "': no file '" + m.location.file + "' in project");
  }
  auto lines = split_lines(*text);
  auto first = static_cast<std::size_t>(m.location.line_start - 1);
  auto last = static_cast<std::size_t>(m.location.line_end);
  if (!m.location.valid() || last > lines.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "mutant '" + m.id + "': location " + to_string(m.location) + " out of range");
  }
  std::string current = join(lines, first, last, "\n");
  std::string expected = normalize_newlines(m.original_text);
  if (!expected.empty() && expected.back() == '\n') expected.pop_back();
  if (current != expected) {
    throw Error(ErrorCode::Stale, "mutant '" + m.id + "': source at " + to_string(m.location) +
                                      " no longer matches the recorded original text");
  }
  std::string_view eol = text->find("\r\n") != std::string::npos ? "\r\n" : "\n";
  bool trailing = !text->empty() && text->back() == '\n';

  auto replacement = split_lines(normalize_newlines(m.mutated_text));
  if (replacement.empty()) replacement.emplace_back();
  std::vector<std::string> out_lines(lines.begin(), lines.begin() + static_cast<long>(first));
  out_lines.insert(out_lines.end(), replacement.begin(), replacement.end());
  out_lines.insert(out_lines.end(), lines.begin() + static_cast<long>(last), lines.end());

  Workspace ws;
  ws.project = project;
  ws.applied = m.id;
  std::string rebuilt = join(out_lines, 0, out_lines.size(), eol);
  if (trailing) rebuilt += eol;
  ws.project.files[m.location.file] = std::move(rebuilt);
  return ws;
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n || failure) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

CompileResults screen_compile(ToolchainAdapter& adapter, const ProjectSnapshot& project,
                              const std::vector<const MutationRecord*>& records,
                              std::size_t workers) {
  std::vector<CompileOutcome> outcomes(records.size());
  if (!adapter.concurrent()) workers = 1;
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const MutationRecord& r = *records[i];
    Workspace ws = materialize(project, r);
    try {
      outcomes[i] = adapter.check(ws);
    } catch (const std::exception& e) {
      outcomes[i] = CompileOutcome::failure(
          {{"toolchain-crash", std::string("adapter failed: ") + e.what(), r.location}});
    }
  });
  CompileResults out;
  for (std::size_t i = 0; i < records.size(); ++i) out[records[i]->id] = std::move(outcomes[i]);
  return out;
}

KillRun build_kill_matrix(ToolchainAdapter& adapter, const ProjectSnapshot& project,
                          const std::vector<const MutationRecord*>& viable,
                          const std::vector<std::string>& tests, const ExecOptions& opts) {
  Workspace base{project, {}};
  constexpr double kBaselineTimeout = 600.0;
  auto first = adapter.run_tests(base, tests, opts.timeout.value_or(kBaselineTimeout));
  auto second = adapter.run_tests(base, tests, opts.timeout.value_or(kBaselineTimeout));
  if (first.size() != tests.size() || second.size() != tests.size()) {
    throw Error(ErrorCode::Internal, "adapter returned the wrong number of test outcomes");
  }

  std::vector<std::string> mutant_ids;
  for (const auto* r : viable) mutant_ids.push_back(r->id);
  KillRun run;
  run.matrix = KillMatrix(mutant_ids, tests);
  double slowest = 0.0;
  for (std::size_t t = 0; t < tests.size(); ++t) {
    if (first[t].verdict != second[t].verdict) {
      throw Error(ErrorCode::Flaky, "test '" + tests[t] + "' is flaky on the baseline (" +
                                        to_string(first[t].verdict) + " then " +
                                        to_string(second[t].verdict) + ")");
    }
    run.matrix.set_baseline(t, first[t].verdict);
    slowest = std::max(slowest, std::max(first[t].wall_time, second[t].wall_time));
    run.baseline_wall_time += first[t].wall_time;
    if (first[t].verdict != Verdict::Pass) {
      run.excluded.push_back(tests[t]);
      if (opts.warn) {
        opts.warn("test '" + tests[t] + "' does not pass on the unmutated project (" +
                  to_string(first[t].verdict) + "); it is excluded from killing sets");
      }
    }
  }
  run.timeout = opts.timeout.value_or(std::max(1.0, 10.0 * slowest));

  std::vector<std::vector<TestOutcome>> results(viable.size());
  std::size_t workers = adapter.concurrent() ? opts.workers : 1;
  parallel_for(viable.size(), workers, [&](std::size_t i) {
    Workspace ws = materialize(project, *viable[i]);
    results[i] = adapter.run_tests(ws, tests, run.timeout);
    if (results[i].size() != tests.size()) {
      throw Error(ErrorCode::Internal, "adapter returned the wrong number of test outcomes");
    }
  });
  for (std::size_t i = 0; i < viable.size(); ++i) {
    for (std::size_t t = 0; t < tests.size(); ++t) run.matrix.set_cell(i, t, results[i][t].verdict);
  }
  return run;
}

double mutation_score(const KillMatrix& m) {
  if (m.mutant_ids().empty()) {
    throw Error(ErrorCode::InvalidArgument, "mutation score of an empty kill matrix is undefined");
  }
  std::size_t killed = 0;
  for (std::size_t i = 0; i < m.mutant_ids().size(); ++i) killed += m.killed(i) ? 1 : 0;
  return static_cast<double>(killed) / static_cast<double>(m.mutant_ids().size());
}

}  // namespace mutforge::harness
