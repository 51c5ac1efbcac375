#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ctpd {

/// Half-open byte interval [start, end) into a UTF-8 buffer.
struct ByteSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const ByteSpan &) const = default;
};

/// Half-open range [begin, end) of token indices within one trace.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange &) const = default;
};

/// A teacher token run and a student token run covering the identical
/// byte interval of the source text.
struct AlignedSpan {
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  IndexRange teacher_tokens;
  IndexRange student_tokens;

  std::size_t byte_size() const { return byte_end - byte_start; }
  bool operator==(const AlignedSpan &) const = default;
};

/// Ordered minimal tiling of a text into aligned spans. The side labels
/// record which tokenizer ids the teacher/student ranges index into.
struct AlignedPartition {
  std::vector<AlignedSpan> spans;
  std::size_t total_bytes = 0;
  std::string teacher_id = "teacher";
  std::string student_id = "student";

  std::size_t size() const { return spans.size(); }
  bool operator==(const AlignedPartition &) const = default;
};

} // namespace ctpd
