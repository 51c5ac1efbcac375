#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctpd/partition.hpp"

namespace ctpd {

inline constexpr std::string_view kTeacherSide = "teacher";
inline constexpr std::string_view kStudentSide = "student";

struct Utf8Doc {
  std::string text;

  std::size_t byte_len() const { return text.size(); }
  bool operator==(const Utf8Doc &) const = default;
};

/// A text plus the byte-offset tiling one tokenizer produced for it.
struct TokenizationTrace {
  Utf8Doc doc;
  std::string tokenizer_id;
  std::vector<ByteSpan> tokens;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenizationTrace &) const = default;
};

enum class RoleKind { policy, teacher_ref, positive, negative, custom };

/// Model role a log-prob track belongs to. Unknown role names survive as
/// `custom` with their original label.
struct TrackRole {
  RoleKind kind = RoleKind::custom;
  std::string label;

  static TrackRole from_name(std::string_view name);
  std::string name() const;
  bool operator==(const TrackRole &) const = default;
};

struct LogProbTrack {
  TrackRole role;
  std::string tokenizer_id;
  std::vector<double> values; // natural log, one per token

  bool operator==(const LogProbTrack &) const = default;
};

struct ResponseBundle {
  TokenizationTrace teacher_trace;
  TokenizationTrace student_trace;
  std::vector<LogProbTrack> tracks;
  std::optional<AlignedPartition> partition;
  std::optional<std::vector<double>> span_weights;

  const std::string &text() const { return teacher_trace.doc.text; }
  const LogProbTrack *find_track(std::string_view role) const;
  const LogProbTrack &track(std::string_view role) const; // throws MissingTrack
  const TokenizationTrace *trace_for(std::string_view tokenizer_id) const;

  bool operator==(const ResponseBundle &) const = default;
};

struct PreferenceExample {
  Utf8Doc prompt;
  ResponseBundle chosen;
  ResponseBundle rejected;
  std::size_t line = 0; // 1-based source line, 0 when built in memory

  bool operator==(const PreferenceExample &) const = default;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  invalid_utf8,
  tiling_gap,
  tiling_overlap,
  empty_token,
  token_out_of_range,
  split_codepoint,
  text_mismatch,
  track_length_mismatch,
  unknown_tokenizer,
  positive_logprob,
  non_finite_logprob,
  span_weight_count,
  bad_span_weight,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string where; // e.g. "chosen.teacher", "rejected.track[policy]"
  std::optional<std::size_t> byte;
  std::string detail;
};

using DiagnosticsReport = std::vector<Violation>;

bool is_valid_utf8(std::string_view text);

/// True when `offset` does not fall inside a multi-byte sequence.
bool is_codepoint_boundary(std::string_view text, std::size_t offset);

DiagnosticsReport validate_trace(const TokenizationTrace &trace,
                                 std::string_view where);
DiagnosticsReport validate_bundle(const ResponseBundle &bundle,
                                  std::string_view where);

/// Empty iff every invariant of the example holds.
DiagnosticsReport validate_example(const PreferenceExample &example);

/// Raises the typed error matching the first violation (if any), tagged
/// with `example.line`.
void require_valid(const PreferenceExample &example);

} // namespace ctpd
