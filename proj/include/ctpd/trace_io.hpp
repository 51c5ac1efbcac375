#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctpd/trace.hpp"

namespace ctpd {

inline constexpr std::string_view kSchemaVersion = "ctpd/1";

using ordered_json = nlohmann::ordered_json;

/// Parses one JSONL record. Throws ParseError for malformed JSON or schema
/// shape, and the typed invariant errors for data that parses but is invalid.
PreferenceExample parse_example(std::string_view line_text, std::size_t line);

/// Like parse_example but skips invariant checks, so callers can collect a
/// full diagnostics report instead of stopping at the first violation.
PreferenceExample parse_example_unchecked(std::string_view line_text,
                                          std::size_t line);

/// Reads every non-blank line of a ctpd/1 JSONL file. Each example carries
/// its 1-based source line number.
std::vector<PreferenceExample>
load_examples(const std::filesystem::path &path,
              std::string_view schema_version = kSchemaVersion);

std::vector<PreferenceExample>
read_examples(std::istream &in, std::string_view schema_version = kSchemaVersion);

ordered_json to_json(const PreferenceExample &example);
ordered_json to_json(const AlignedPartition &partition);

/// One compact JSON object per line.
std::string serialize_examples(const std::vector<PreferenceExample> &examples);
void write_examples(const std::filesystem::path &path,
                    const std::vector<PreferenceExample> &examples);

} // namespace ctpd
