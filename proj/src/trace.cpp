#include "ctpd/trace.hpp"

#include <cmath>

#include "ctpd/align.hpp"
#include "ctpd/error.hpp"

namespace ctpd {

TrackRole TrackRole::from_name(std::string_view name) {
  if (name == "policy")
    return {RoleKind::policy, {}};
  if (name == "teacher_ref")
    return {RoleKind::teacher_ref, {}};
  if (name == "positive")
    return {RoleKind::positive, {}};
  if (name == "negative")
    return {RoleKind::negative, {}};
  return {RoleKind::custom, std::string(name)};
}

std::string TrackRole::name() const {
  switch (kind) {
  case RoleKind::policy:
    return "policy";
  case RoleKind::teacher_ref:
    return "teacher_ref";
  case RoleKind::positive:
    return "positive";
  case RoleKind::negative:
    return "negative";
  case RoleKind::custom:
    break;
  }
  return label;
}

const LogProbTrack *ResponseBundle::find_track(std::string_view role) const {
  for (const auto &t : tracks)
    if (t.role.name() == role)
      return &t;
  return nullptr;
}

const LogProbTrack &ResponseBundle::track(std::string_view role) const {
  if (const auto *t = find_track(role))
    return *t;
  throw MissingTrack(std::string(role));
}

const TokenizationTrace *
ResponseBundle::trace_for(std::string_view tokenizer_id) const {
  if (tokenizer_id == teacher_trace.tokenizer_id)
    return &teacher_trace;
  if (tokenizer_id == student_trace.tokenizer_id)
    return &student_trace;
  return nullptr;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
  case ViolationKind::invalid_utf8:
    return "InvalidUtf8";
  case ViolationKind::tiling_gap:
    return "TilingGap";
  case ViolationKind::tiling_overlap:
    return "TilingOverlap";
  case ViolationKind::empty_token:
    return "EmptyToken";
  case ViolationKind::token_out_of_range:
    return "TokenOutOfRange";
  case ViolationKind::split_codepoint:
    return "SplitCodepoint";
  case ViolationKind::text_mismatch:
    return "TextMismatch";
  case ViolationKind::track_length_mismatch:
    return "TrackLengthMismatch";
  case ViolationKind::unknown_tokenizer:
    return "UnknownTokenizer";
  case ViolationKind::positive_logprob:
    return "PositiveLogProb";
  case ViolationKind::non_finite_logprob:
    return "NonFiniteLogProb";
  case ViolationKind::span_weight_count:
    return "SpanWeightCount";
  case ViolationKind::bad_span_weight:
    return "BadSpanWeight";
  }
  return "Unknown";
}

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

} // namespace

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n)
      return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if (!is_continuation(cc))
        return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

bool is_codepoint_boundary(std::string_view text, std::size_t offset) {
  if (offset == 0 || offset >= text.size())
    return offset <= text.size();
  return !is_continuation(static_cast<unsigned char>(text[offset]));
}

DiagnosticsReport validate_trace(const TokenizationTrace &trace,
                                 std::string_view where) {
  DiagnosticsReport out;
  const std::string w(where);
  const std::string &text = trace.doc.text;
  const bool utf8_ok = is_valid_utf8(text);
  if (!utf8_ok)
    out.push_back({ViolationKind::invalid_utf8, w, std::nullopt,
                   "text is not valid UTF-8"});

  std::size_t expected = 0;
  for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
    const ByteSpan &tok = trace.tokens[i];
    const std::string idx = "token " + std::to_string(i);
    if (tok.start > expected)
      out.push_back({ViolationKind::tiling_gap, w, expected,
                     idx + " starts at " + std::to_string(tok.start)});
    else if (tok.start < expected)
      out.push_back({ViolationKind::tiling_overlap, w, tok.start,
                     idx + " overlaps the previous token"});
    if (tok.end <= tok.start)
      out.push_back({ViolationKind::empty_token, w, tok.start, idx + " is empty"});
    if (tok.end > text.size()) {
      out.push_back({ViolationKind::token_out_of_range, w, tok.end,
                     idx + " ends past the text"});
    } else if (utf8_ok) {
      for (std::size_t b : {tok.start, tok.end})
        if (b <= text.size() && !is_codepoint_boundary(text, b)) {
          out.push_back({ViolationKind::split_codepoint, w, b,
                         idx + " splits a multi-byte codepoint"});
          break;
        }
    }
    expected = std::max(expected, tok.end);
  }
  if (expected < text.size())
    out.push_back({ViolationKind::tiling_gap, w, expected,
                   "tokens stop before the end of the text"});
  return out;
}

DiagnosticsReport validate_bundle(const ResponseBundle &bundle,
                                  std::string_view where) {
  DiagnosticsReport out;
  const std::string w(where);
  auto append = [&out](DiagnosticsReport more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()),
               std::make_move_iterator(more.end()));
  };
  append(validate_trace(bundle.teacher_trace, w + "." + bundle.teacher_trace.tokenizer_id));
  append(validate_trace(bundle.student_trace, w + "." + bundle.student_trace.tokenizer_id));
  const bool traces_ok = out.empty();

  const std::string &a = bundle.teacher_trace.doc.text;
  const std::string &b = bundle.student_trace.doc.text;
  bool texts_ok = true;
  if (a != b) {
    texts_ok = false;
    std::size_t first = 0;
    while (first < a.size() && first < b.size() && a[first] == b[first])
      ++first;
    out.push_back({ViolationKind::text_mismatch, w, first,
                   "teacher and student texts differ"});
  }

  for (const auto &track : bundle.tracks) {
    const std::string tw = w + ".track[" + track.role.name() + "]";
    const TokenizationTrace *trace = bundle.trace_for(track.tokenizer_id);
    if (trace == nullptr) {
      out.push_back({ViolationKind::unknown_tokenizer, tw, std::nullopt,
                     "tokenizer '" + track.tokenizer_id + "' has no trace"});
    } else if (track.values.size() != trace->tokens.size()) {
      out.push_back({ViolationKind::track_length_mismatch, tw, std::nullopt,
                     std::to_string(track.values.size()) + " values for " +
                         std::to_string(trace->tokens.size()) + " tokens"});
    }
    for (std::size_t i = 0; i < track.values.size(); ++i) {
      const double v = track.values[i];
      const auto at = trace != nullptr && i < trace->tokens.size()
                          ? std::optional<std::size_t>(trace->tokens[i].start)
                          : std::nullopt;
      if (!std::isfinite(v))
        out.push_back({ViolationKind::non_finite_logprob, tw, at,
                       "value " + std::to_string(i) + " is not finite"});
      else if (v > 0.0)
        out.push_back({ViolationKind::positive_logprob, tw, at,
                       "value " + std::to_string(i) + " is " + std::to_string(v)});
    }
  }

  if (bundle.span_weights) {
    const auto &weights = *bundle.span_weights;
    std::optional<std::size_t> span_count;
    if (bundle.partition)
      span_count = bundle.partition->size();
    else if (traces_ok && texts_ok)
      span_count = partition_aligned_spans(bundle.teacher_trace, bundle.student_trace).size();
    if (span_count && *span_count != weights.size())
      out.push_back({ViolationKind::span_weight_count, w + ".span_weights",
                     std::nullopt,
                     std::to_string(weights.size()) + " weights for " +
                         std::to_string(*span_count) + " spans"});
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (!std::isfinite(weights[i]) || weights[i] <= 0.0)
        out.push_back({ViolationKind::bad_span_weight, w + ".span_weights",
                       std::nullopt,
                       "weight " + std::to_string(i) + " is not finite and positive"});
  }
  return out;
}

DiagnosticsReport validate_example(const PreferenceExample &example) {
  DiagnosticsReport out;
  if (!is_valid_utf8(example.prompt.text))
    out.push_back({ViolationKind::invalid_utf8, "prompt", std::nullopt,
                   "prompt is not valid UTF-8"});
  for (auto *side : {"chosen", "rejected"}) {
    const auto &bundle = std::string_view(side) == "chosen" ? example.chosen
                                                            : example.rejected;
    auto more = validate_bundle(bundle, side);
    out.insert(out.end(), std::make_move_iterator(more.begin()),
               std::make_move_iterator(more.end()));
  }
  return out;
}

void require_valid(const PreferenceExample &example) {
  const auto report = validate_example(example);
  if (report.empty())
    return;
  const Violation &v = report.front();
  const std::size_t line = example.line;
  switch (v.kind) {
  case ViolationKind::tiling_gap:
  case ViolationKind::tiling_overlap:
  case ViolationKind::empty_token:
  case ViolationKind::token_out_of_range:
  case ViolationKind::split_codepoint: {
    const auto dot = v.where.find('.');
    const std::string tokenizer =
        dot == std::string::npos ? v.where : v.where.substr(dot + 1);
    throw TilingViolation(line, tokenizer, v.byte.value_or(0),
                          std::string(to_string(v.kind)) + ": " + v.detail);
  }
  case ViolationKind::text_mismatch:
    throw TextMismatch(line, v.where);
  case ViolationKind::track_length_mismatch: {
    const auto open = v.where.find('[');
    const auto close = v.where.find(']');
    throw TrackLengthMismatch(
        line, v.where.substr(open + 1, close - open - 1), v.detail);
  }
  default:
    throw ValidationError(line, std::string(to_string(v.kind)) + " at " +
                                    v.where + ": " + v.detail);
  }
}

} // namespace ctpd
