#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace slabsep::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2, kExitThreshold = 3 };

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Format { Csv, Jsonl, Json };

Format format_from_string(const std::string& name);
std::string to_string(Format f);
std::string extension(Format f);

/// Rows plus the metadata header embedded in every artifact.
struct Report {
  std::vector<std::string> columns;  // CSV column order
  std::vector<nlohmann::json> records;
  nlohmann::json meta = nlohmann::json::object();
};

/// Serializes a report. Throws ValidationError on an empty record list.
std::string emit_report(const Report& report, Format format);
/// Inverse of emit_report for the jsonl format.
Report parse_jsonl(const std::string& text);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// git-describe style version recorded at configure time.
std::string version_string();

/// Example invocations listed in --help; each one is exercised by the tests.
const std::vector<std::string>& examples();

/// Column headers of every CSV the tool writes, as printed by `--help schemas`.
std::string schemas_text();

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slabsep::cli
