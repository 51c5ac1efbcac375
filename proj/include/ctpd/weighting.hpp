#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctpd/trace.hpp"

namespace ctpd {

enum class WeightStrategy {
  contrastive_teacher,
  random,
  average,
  student_estimate,
  teacher_student_estimate,
};

std::string_view to_string(WeightStrategy s);
std::optional<WeightStrategy> parse_weight_strategy(std::string_view name);

enum class Polarity { winner, loser };

/// Defaults: k = 1, mu = +1 / -1 for winner / loser, clamp [-0.5, 1.5].
struct WeightConfig {
  double k = 1.0;
  double mu_pos = 1.0;
  double mu_neg = -1.0;
  double clamp_lower = -0.5;
  double clamp_upper = 1.5;
  WeightStrategy strategy = WeightStrategy::contrastive_teacher;
  bool normalize = false; // rescale each sequence's weights to mean 1
  std::string positive_role = "positive";
  std::string negative_role = "negative";

  double mu(Polarity p) const { return p == Polarity::winner ? mu_pos : mu_neg; }
  /// Throws std::invalid_argument unless k > 0 and L <= U.
  void validate() const;
};

struct SpanWeights {
  std::vector<double> values;
  WeightConfig config;
  Polarity polarity = Polarity::winner;
};

/// k * exp(mu * clamp(pos_lp - neg_lp, L, U)). The clamp acts on the raw
/// log-ratio, before the sign flip by mu.
double contrastive_span_weight(double pos_lp, double neg_lp,
                               const WeightConfig &cfg, Polarity polarity);

/// Closed interval every contrastive weight falls into under `cfg`.
std::pair<double, double> contrastive_weight_bounds(const WeightConfig &cfg,
                                                    Polarity polarity);

/// Per-span weights of one response under the configured strategy. Uses the
/// bundle's partition, or computes one. `seed` is required by the random
/// strategy (SeedRequired otherwise) and ignored by the others.
SpanWeights compute_span_weights(const ResponseBundle &bundle,
                                 const WeightConfig &cfg, Polarity polarity,
                                 std::optional<std::uint64_t> seed = std::nullopt);

} // namespace ctpd
