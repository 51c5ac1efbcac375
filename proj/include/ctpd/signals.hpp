#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctpd/partition.hpp"
#include "ctpd/trace.hpp"

namespace ctpd {

/// Per-span log-probabilities, one entry per role present on the bundle.
/// Each value sums that role's token log-probs over the tokens of the role's
/// own tokenizer that lie inside the span.
struct SpanSignal {
  std::size_t span_index = 0;
  std::map<std::string, double, std::less<>> logprob_by_role;

  double at(std::string_view role) const; // throws MissingTrack
};

/// Sum of the track's values over the span's token range on the track's side.
double span_logprob(const LogProbTrack &track, const AlignedPartition &partition,
                    std::size_t span_index);

/// span_logprob for every span, in order.
std::vector<double> span_logprobs(const LogProbTrack &track,
                                  const AlignedPartition &partition);

/// Log-ratio reward of a span. beta is applied once, in the loss.
inline double span_reward(double policy_lp, double ref_lp) {
  return policy_lp - ref_lp;
}

/// One signal per span of the bundle's partition (computed on the fly when
/// the bundle carries none). Throws MissingTrack for any absent role listed
/// in `required_roles`.
std::vector<SpanSignal>
build_span_signals(const ResponseBundle &bundle,
                   std::span<const std::string> required_roles = {});

} // namespace ctpd
