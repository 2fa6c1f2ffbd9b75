#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "core/model.hpp"

namespace mutforge {

using json = nlohmann::json;

inline constexpr std::string_view kPoolFormat = "mutforge-pool";
inline constexpr int kPoolFormatVersion = 1;

json to_json(const SourceLocation& loc);
SourceLocation location_from_json(const json& j);

json to_json(const MutationRecord& r);
MutationRecord record_from_json(const json& j);

json to_json(const MutationPool& pool);
/// Throws Error(Parse) naming the offending field.
MutationPool pool_from_json(const json& j);

void save_pool(const MutationPool& pool, const std::filesystem::path& path);
MutationPool load_pool(const std::filesystem::path& path);

// Kill matrix CSV: header "mutant_id,<test ids...>", then a "#baseline" row
// with the unmutated program's verdicts, then one row per mutant. Cells are
// P, F, T, C or N.
inline constexpr std::string_view kBaselineRowId = "#baseline";

std::string kill_matrix_to_csv(const KillMatrix& m);
KillMatrix kill_matrix_from_csv(std::string_view csv);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// RFC 4180 field quoting when needed.
std::string csv_field(std::string_view s);
/// Splits CSV text into rows of fields (quotes honoured).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace mutforge
