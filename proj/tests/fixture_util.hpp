#pragma once

#include <filesystem>
#include <string>

#include "core/model.hpp"
#include "harness/harness.hpp"
#include "scratch.hpp"

namespace mutforge::testing {

inline std::filesystem::path fixture_dir(const std::string& bug) {
  return data_dir() / "fixtures" / bug;
}

/// fixed/ (or buggy/) plus tests/ mapped under "tests/".
inline ProjectSnapshot fixture_project(const std::string& bug, bool buggy = false) {
  auto dir = fixture_dir(bug);
  ProjectSnapshot snap = harness::load_snapshot(dir / (buggy ? "buggy" : "fixed"));
  for (auto& [rel, text] : harness::load_snapshot(dir / "tests").files) {
    snap.files["tests/" + rel] = text;
  }
  return snap;
}

inline MutationRecord line_mutant(const ProjectSnapshot& p, std::string id, std::string file,
                                  int line, std::string mutated) {
  MutationRecord r;
  r.id = std::move(id);
  r.origin = "manual";
  r.location = SourceLocation::make(file, line, line);
  r.original_text = line_span(*p.file(file), line, line);
  r.mutated_text = std::move(mutated);
  return r;
}

}  // namespace mutforge::testing
