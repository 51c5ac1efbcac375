#include "ctpd/align.hpp"

#include <algorithm>

#include "ctpd/error.hpp"

namespace ctpd {

namespace {

void require_tiling(const TokenizationTrace &trace) {
  const auto report = validate_trace(trace, trace.tokenizer_id);
  if (report.empty())
    return;
  const auto &v = report.front();
  throw TilingViolation(0, trace.tokenizer_id, v.byte.value_or(0),
                        std::string(to_string(v.kind)) + ": " + v.detail);
}

} // namespace

std::vector<std::size_t> boundary_set(const TokenizationTrace &trace) {
  std::vector<std::size_t> out;
  out.reserve(trace.tokens.size() + 1);
  out.push_back(0);
  for (const auto &t : trace.tokens)
    out.push_back(t.end);
  return out;
}

std::vector<std::size_t> boundary_set(const AlignedPartition &partition) {
  std::vector<std::size_t> out;
  out.reserve(partition.spans.size() + 1);
  out.push_back(0);
  for (const auto &s : partition.spans)
    out.push_back(s.byte_end);
  return out;
}

AlignedPartition partition_aligned_spans(const TokenizationTrace &teacher,
                                         const TokenizationTrace &student) {
  if (teacher.doc.text != student.doc.text)
    throw TextMismatch(0, teacher.tokenizer_id + " vs " + student.tokenizer_id);
  require_tiling(teacher);
  require_tiling(student);

  AlignedPartition out;
  out.total_bytes = teacher.doc.byte_len();
  out.teacher_id = teacher.tokenizer_id;
  out.student_id = student.tokenizer_id;

  const auto &tt = teacher.tokens;
  const auto &st = student.tokens;
  std::size_t i = 0, j = 0;
  std::size_t span_start = 0, ti = 0, sj = 0;
  // Both traces tile [0, n), so the last tokens end together and the walk
  // below terminates with i == tt.size() and j == st.size().
  while (i < tt.size() && j < st.size()) {
    const std::size_t te = tt[i].end;
    const std::size_t se = st[j].end;
    if (te < se) {
      ++i;
    } else if (se < te) {
      ++j;
    } else {
      out.spans.push_back({span_start, te, {ti, i + 1}, {sj, j + 1}});
      span_start = te;
      ti = ++i;
      sj = ++j;
    }
  }
  return out;
}

const AlignedPartition &ensure_partition(ResponseBundle &bundle) {
  if (!bundle.partition)
    bundle.partition =
        partition_aligned_spans(bundle.teacher_trace, bundle.student_trace);
  return *bundle.partition;
}

SpanStats span_count_stats(const AlignedPartition &partition) {
  SpanStats s;
  s.span_count = partition.spans.size();
  if (s.span_count == 0)
    return s;
  std::size_t teacher_tokens = 0, student_tokens = 0;
  for (const auto &span : partition.spans) {
    s.max_span_bytes = std::max(s.max_span_bytes, span.byte_size());
    teacher_tokens += span.teacher_tokens.size();
    student_tokens += span.student_tokens.size();
    if (span.teacher_tokens.size() > 1 || span.student_tokens.size() > 1)
      ++s.multi_token_spans;
  }
  const auto n = static_cast<double>(s.span_count);
  s.mean_teacher_tokens_per_span = static_cast<double>(teacher_tokens) / n;
  s.mean_student_tokens_per_span = static_cast<double>(student_tokens) / n;
  return s;
}

} // namespace ctpd
