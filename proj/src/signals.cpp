#include "ctpd/signals.hpp"

#include <stdexcept>

#include "ctpd/align.hpp"
#include "ctpd/error.hpp"

namespace ctpd {

double SpanSignal::at(std::string_view role) const {
  auto it = logprob_by_role.find(role);
  if (it == logprob_by_role.end())
    throw MissingTrack(std::string(role));
  return it->second;
}

namespace {

IndexRange side_range(const LogProbTrack &track, const AlignedSpan &span,
                      const AlignedPartition &partition) {
  if (track.tokenizer_id == partition.teacher_id)
    return span.teacher_tokens;
  if (track.tokenizer_id == partition.student_id)
    return span.student_tokens;
  throw TokenizerSideUnknown(track.tokenizer_id);
}

} // namespace

double span_logprob(const LogProbTrack &track, const AlignedPartition &partition,
                    std::size_t span_index) {
  if (span_index >= partition.spans.size())
    throw std::out_of_range("span index " + std::to_string(span_index) +
                            " out of range");
  const IndexRange r = side_range(track, partition.spans[span_index], partition);
  if (r.end > track.values.size())
    throw LengthMismatch("track '" + track.role.name() + "'",
                         track.values.size(), r.end);
  double acc = 0.0;
  for (std::size_t t = r.begin; t < r.end; ++t)
    acc += track.values[t];
  return acc;
}

std::vector<double> span_logprobs(const LogProbTrack &track,
                                  const AlignedPartition &partition) {
  std::vector<double> out(partition.spans.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = span_logprob(track, partition, i);
  return out;
}

std::vector<SpanSignal>
build_span_signals(const ResponseBundle &bundle,
                   std::span<const std::string> required_roles) {
  for (const auto &role : required_roles)
    if (bundle.find_track(role) == nullptr)
      throw MissingTrack(role);

  AlignedPartition local;
  const AlignedPartition *partition = nullptr;
  if (bundle.partition) {
    partition = &*bundle.partition;
  } else {
    local = partition_aligned_spans(bundle.teacher_trace, bundle.student_trace);
    partition = &local;
  }

  std::vector<SpanSignal> out(partition->spans.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].span_index = i;
  for (const auto &track : bundle.tracks) {
    const auto lps = span_logprobs(track, *partition);
    const std::string name = track.role.name();
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i].logprob_by_role.emplace(name, lps[i]);
  }
  return out;
}

} // namespace ctpd
