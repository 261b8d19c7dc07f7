#pragma once

#include "json.hpp"

#include <iosfwd>
#include <string>
#include <string_view>

namespace sdecay::cli {

inline constexpr const char* kToolName = "sdecay";
inline constexpr const char* kToolVersion = "1.0.0";

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kValidationFailure = 1,
  kNumericFailure = 2,
  kInconclusive = 3,
  kUsage = 64,
};

/// Parses argv, runs one subcommand and writes <out>/{manifest.json, result.json, *.csv}.
/// `out` receives the usage text and result summaries, `err` diagnostics and logs.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// %.17g rendering used for every number in CSV output.
std::string format_number(double x);

/// Reads a JSON file; relative file references inside are not resolved here.
nlohmann::json read_json_file(const std::string& path);

}  // namespace sdecay::cli
