#include "ctpd/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctpd/align.hpp"
#include "ctpd/error.hpp"
#include "ctpd/rng.hpp"
#include "ctpd/signals.hpp"

namespace ctpd {

std::string_view to_string(WeightStrategy s) {
  switch (s) {
  case WeightStrategy::contrastive_teacher:
    return "contrastive_teacher";
  case WeightStrategy::random:
    return "random";
  case WeightStrategy::average:
    return "average";
  case WeightStrategy::student_estimate:
    return "student_estimate";
  case WeightStrategy::teacher_student_estimate:
    return "teacher_student_estimate";
  }
  return "unknown";
}

std::optional<WeightStrategy> parse_weight_strategy(std::string_view name) {
  for (auto s : {WeightStrategy::contrastive_teacher, WeightStrategy::random,
                 WeightStrategy::average, WeightStrategy::student_estimate,
                 WeightStrategy::teacher_student_estimate})
    if (to_string(s) == name)
      return s;
  return std::nullopt;
}

void WeightConfig::validate() const {
  if (!(k > 0.0) || !std::isfinite(k))
    throw std::invalid_argument("weight scale k must be positive");
  if (!(clamp_lower <= clamp_upper))
    throw std::invalid_argument("clamp lower bound exceeds upper bound");
}

double contrastive_span_weight(double pos_lp, double neg_lp,
                               const WeightConfig &cfg, Polarity polarity) {
  const double ratio = std::clamp(pos_lp - neg_lp, cfg.clamp_lower, cfg.clamp_upper);
  return cfg.k * std::exp(cfg.mu(polarity) * ratio);
}

std::pair<double, double> contrastive_weight_bounds(const WeightConfig &cfg,
                                                    Polarity polarity) {
  const double a = cfg.mu(polarity) * cfg.clamp_lower;
  const double b = cfg.mu(polarity) * cfg.clamp_upper;
  return {cfg.k * std::exp(std::min(a, b)), cfg.k * std::exp(std::max(a, b))};
}

namespace {

const LogProbTrack &side_track(const ResponseBundle &bundle,
                               const std::string &role,
                               const std::string &side_id) {
  const LogProbTrack *t = bundle.find_track(role);
  if (t == nullptr || t->tokenizer_id != side_id)
    throw MissingTrack(role + " (" + side_id + " side)");
  return *t;
}

} // namespace

SpanWeights compute_span_weights(const ResponseBundle &bundle,
                                 const WeightConfig &cfg, Polarity polarity,
                                 std::optional<std::uint64_t> seed) {
  cfg.validate();
  AlignedPartition local;
  const AlignedPartition *partition = nullptr;
  if (bundle.partition) {
    partition = &*bundle.partition;
  } else {
    local = partition_aligned_spans(bundle.teacher_trace, bundle.student_trace);
    partition = &local;
  }
  const std::size_t n = partition->spans.size();

  SpanWeights out{std::vector<double>(n), cfg, polarity};
  auto contrastive = [&](const std::string &pos_side, const std::string &neg_side) {
    const auto pos = span_logprobs(side_track(bundle, cfg.positive_role, pos_side), *partition);
    const auto neg = span_logprobs(side_track(bundle, cfg.negative_role, neg_side), *partition);
    for (std::size_t i = 0; i < n; ++i)
      out.values[i] = contrastive_span_weight(pos[i], neg[i], cfg, polarity);
  };

  const std::string &teacher = partition->teacher_id;
  const std::string &student = partition->student_id;
  switch (cfg.strategy) {
  case WeightStrategy::contrastive_teacher:
    contrastive(teacher, teacher);
    break;
  case WeightStrategy::average:
    contrastive(teacher, teacher);
    for (std::size_t i = 0; i < n; ++i)
      out.values[i] /= static_cast<double>(partition->spans[i].student_tokens.size());
    break;
  case WeightStrategy::student_estimate:
    contrastive(student, student);
    break;
  case WeightStrategy::teacher_student_estimate:
    contrastive(teacher, student);
    break;
  case WeightStrategy::random: {
    if (!seed)
      throw SeedRequired();
    const CounterRng rng(*seed, polarity == Polarity::winner ? 1 : 2);
    for (std::size_t i = 0; i < n; ++i)
      out.values[i] = cfg.k * std::exp(rng.uniform_open(i, -1.0, 1.0));
    break;
  }
  }

  if (cfg.normalize && n > 0) {
    double mean = 0.0;
    for (double w : out.values)
      mean += w;
    mean /= static_cast<double>(n);
    for (double &w : out.values)
      w /= mean;
  }
  return out;
}

} // namespace ctpd
