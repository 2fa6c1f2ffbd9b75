#include "core/serialize.hpp"

#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace mutforge {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Parse, where + ": " + what);
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(where + "." + key, e.what());
  }
}

}  // namespace

json to_json(const SourceLocation& loc) {
  return {{"file", loc.file}, {"line_start", loc.line_start}, {"line_end", loc.line_end}};
}

SourceLocation location_from_json(const json& j) {
  SourceLocation loc{field<std::string>(j, "file", "location"),
                     field<int>(j, "line_start", "location"),
                     field<int>(j, "line_end", "location")};
  if (!loc.valid()) bad("location", "invalid span " + to_string(loc));
  return loc;
}

json to_json(const MutationRecord& r) {
  json status = {{"kind", to_string(r.status.kind)}};
  if (r.status.kind == StatusKind::NonCompilable) {
    json diags = json::array();
    for (const auto& d : r.status.diagnostics) {
      diags.push_back(
          {{"kind", d.kind}, {"message", d.message}, {"location", to_json(d.location)}});
    }
    status["diagnostics"] = std::move(diags);
  }
  if (r.status.kind == StatusKind::Duplicate) status["of"] = r.status.duplicate_of;
  json out = {{"id", r.id},
              {"origin", r.origin},
              {"location", to_json(r.location)},
              {"original_text", r.original_text},
              {"mutated_text", r.mutated_text},
              {"status", std::move(status)},
              {"gen_wall_time", r.gen_wall_time}};
  if (r.token_usage) {
    out["token_usage"] = {{"prompt_tokens", r.token_usage->prompt_tokens},
                          {"completion_tokens", r.token_usage->completion_tokens}};
  } else {
    out["token_usage"] = nullptr;
  }
  return out;
}

MutationRecord record_from_json(const json& j) {
  MutationRecord r;
  r.id = field<std::string>(j, "id", "record");
  const std::string where = "record '" + r.id + "'";
  r.origin = field<std::string>(j, "origin", where);
  if (!j.contains("location")) bad(where, "missing field 'location'");
  r.location = location_from_json(j.at("location"));
  r.original_text = field<std::string>(j, "original_text", where);
  r.mutated_text = field<std::string>(j, "mutated_text", where);
  r.gen_wall_time = j.value("gen_wall_time", 0.0);
  if (j.contains("token_usage") && !j.at("token_usage").is_null()) {
    const json& u = j.at("token_usage");
    r.token_usage = TokenUsage{field<std::uint64_t>(u, "prompt_tokens", where),
                               field<std::uint64_t>(u, "completion_tokens", where)};
  }
  if (j.contains("status")) {
    const json& s = j.at("status");
    auto kind = status_kind_from_string(field<std::string>(s, "kind", where + ".status"));
    if (!kind) bad(where + ".status", "unknown status kind");
    r.status.kind = *kind;
    if (s.contains("diagnostics")) {
      for (const auto& d : s.at("diagnostics")) {
        r.status.diagnostics.push_back({field<std::string>(d, "kind", where),
                                        field<std::string>(d, "message", where),
                                        location_from_json(d.at("location"))});
      }
    }
    if (*kind == StatusKind::Duplicate) {
      r.status.duplicate_of = field<std::string>(s, "of", where + ".status");
    }
  }
  if ((r.status.kind == StatusKind::IdenticalToOriginal) !=
          token_equal(r.original_text, r.mutated_text) &&
      r.status.kind != StatusKind::Pending) {
    bad(where, "status contradicts original/mutated text identity");
  }
  return r;
}

json to_json(const MutationPool& pool) {
  json records = json::array();
  for (const auto& r : pool.records) records.push_back(to_json(r));
  const auto& s = pool.stats;
  return {{"format", kPoolFormat},
          {"version", kPoolFormatVersion},
          {"project_id", pool.project_id},
          {"generator_id", pool.generator_id},
          {"generation",
           {{"prompts", s.prompts},
            {"responses_parsed", s.responses_parsed},
            {"parse_failures", s.parse_failures},
            {"skipped_elements", s.skipped_elements},
            {"wall_time", s.wall_time},
            {"prompt_tokens", s.usage.prompt_tokens},
            {"completion_tokens", s.usage.completion_tokens}}},
          {"records", std::move(records)}};
}

MutationPool pool_from_json(const json& j) {
  if (field<std::string>(j, "format", "pool") != kPoolFormat) {
    bad("pool.format", "expected '" + std::string(kPoolFormat) + "'");
  }
  if (field<int>(j, "version", "pool") != kPoolFormatVersion) {
    bad("pool.version", "unsupported version");
  }
  MutationPool pool;
  pool.project_id = field<std::string>(j, "project_id", "pool");
  pool.generator_id = field<std::string>(j, "generator_id", "pool");
  if (j.contains("generation")) {
    const json& g = j.at("generation");
    pool.stats.prompts = g.value("prompts", std::size_t{0});
    pool.stats.responses_parsed = g.value("responses_parsed", std::size_t{0});
    pool.stats.parse_failures = g.value("parse_failures", std::size_t{0});
    pool.stats.skipped_elements = g.value("skipped_elements", std::size_t{0});
    pool.stats.wall_time = g.value("wall_time", 0.0);
    pool.stats.usage.prompt_tokens = g.value("prompt_tokens", std::uint64_t{0});
    pool.stats.usage.completion_tokens = g.value("completion_tokens", std::uint64_t{0});
  }
  if (!j.contains("records") || !j.at("records").is_array()) {
    bad("pool", "missing array 'records'");
  }
  std::set<std::string> ids;
  for (const auto& r : j.at("records")) {
    pool.records.push_back(record_from_json(r));
    if (!ids.insert(pool.records.back().id).second) {
      throw Error(ErrorCode::Integrity, "duplicate mutant id '" + pool.records.back().id + "'");
    }
  }
  return pool;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void save_pool(const MutationPool& pool, const std::filesystem::path& path) {
  write_file(path, to_json(pool).dump(2) + "\n");
}

MutationPool load_pool(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return pool_from_json(j);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cur;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cur));
      cur.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cur.empty()) {
        row.push_back(std::move(cur));
        rows.push_back(std::move(row));
      }
      row.clear();
      cur.clear();
      any = false;
    } else {
      cur.push_back(c);
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::Parse, "csv: unterminated quoted field");
  if (any || !cur.empty()) {
    row.push_back(std::move(cur));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string kill_matrix_to_csv(const KillMatrix& m) {
  std::string out = "mutant_id";
  for (const auto& t : m.test_ids()) out += "," + csv_field(t);
  out += "\n";
  out += kBaselineRowId;
  for (std::size_t t = 0; t < m.test_ids().size(); ++t) {
    out += ',';
    out += verdict_code(m.baseline(t));
  }
  out += "\n";
  for (std::size_t i = 0; i < m.mutant_ids().size(); ++i) {
    out += csv_field(m.mutant_ids()[i]);
    for (std::size_t t = 0; t < m.test_ids().size(); ++t) {
      out += ',';
      out += verdict_code(m.cell(i, t));
    }
    out += "\n";
  }
  return out;
}

KillMatrix kill_matrix_from_csv(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "mutant_id") {
    throw Error(ErrorCode::Parse, "kill matrix csv: header must start with 'mutant_id'");
  }
  std::vector<std::string> tests(rows[0].begin() + 1, rows[0].end());
  if (rows.size() < 2 || rows[1].empty() || rows[1][0] != kBaselineRowId) {
    throw Error(ErrorCode::Parse, "kill matrix csv: second row must be '#baseline'");
  }
  std::vector<std::string> mutants;
  for (std::size_t r = 2; r < rows.size(); ++r) mutants.push_back(rows[r].at(0));
  KillMatrix m(mutants, tests);
  auto cell_of = [&](std::size_t r, std::size_t c) {
    const auto& row = rows[r];
    if (row.size() != tests.size() + 1) {
      throw Error(ErrorCode::Parse, "kill matrix csv: row " + std::to_string(r + 1) +
                                        " has " + std::to_string(row.size()) + " cells");
    }
    const std::string& s = row[c + 1];
    auto v = s.size() == 1 ? verdict_from_code(s[0]) : std::nullopt;
    if (!v) {
      throw Error(ErrorCode::Parse, "kill matrix csv: bad cell '" + s + "' in row " +
                                        std::to_string(r + 1));
    }
    return *v;
  };
  for (std::size_t t = 0; t < tests.size(); ++t) m.set_baseline(t, cell_of(1, t));
  for (std::size_t r = 2; r < rows.size(); ++r) {
    for (std::size_t t = 0; t < tests.size(); ++t) m.set_cell(r - 2, t, cell_of(r, t));
  }
  return m;
}

}  // namespace mutforge
