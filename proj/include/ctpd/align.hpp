#pragma once

#include <cstddef>
#include <vector>

#include "ctpd/partition.hpp"
#include "ctpd/trace.hpp"

namespace ctpd {

/// {0} together with every token end offset, ascending.
std::vector<std::size_t> boundary_set(const TokenizationTrace &trace);

/// Splits two tokenizations of one text into the unique minimal sequence of
/// aligned spans: span edges are exactly the byte offsets that are token
/// boundaries in both traces. Linear in the total token count.
///
/// Throws TextMismatch when the texts differ and TilingViolation when either
/// trace does not tile its text. An empty text gives an empty partition.
AlignedPartition partition_aligned_spans(const TokenizationTrace &teacher,
                                         const TokenizationTrace &student);

/// Computes and stores the partition of a bundle if it has none yet.
const AlignedPartition &ensure_partition(ResponseBundle &bundle);

struct SpanStats {
  std::size_t span_count = 0;
  std::size_t max_span_bytes = 0;
  double mean_teacher_tokens_per_span = 0.0;
  double mean_student_tokens_per_span = 0.0;
  std::size_t multi_token_spans = 0; // spans with >1 token on either side
};

SpanStats span_count_stats(const AlignedPartition &partition);

/// Byte offsets at which the partition's spans start and end, in the same
/// form as boundary_set.
std::vector<std::size_t> boundary_set(const AlignedPartition &partition);

} // namespace ctpd
