#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ctpd::theory {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

struct BoundResult {
  double bound = 1.0;
  bool vacuous = false; // gap <= 0: the bound says nothing, reported as 1
};

/// Hoeffding bound on P(S_w <= S_l) for averages of independent bounded
/// span rewards:
///   exp(-2 gap^2 / (sum c_w^2 / n_w^2 + sum c_l^2 / n_l^2)),  c = hi - lo.
BoundResult hoeffding_noise_bound(double gap, std::span<const Range> ranges_w,
                                  std::span<const Range> ranges_l);

/// Bounded reward distribution of one span: uniform on [lo, hi] or a
/// finite distribution whose values lie in the declared support.
struct SpanRewardDistribution {
  enum class Kind { uniform, discrete };
  Kind kind = Kind::uniform;
  Range support;
  std::vector<double> values;
  std::vector<double> probs;

  static SpanRewardDistribution uniform(double lo, double hi);
  static SpanRewardDistribution discrete(std::vector<double> values,
                                         std::vector<double> probs);
  static SpanRewardDistribution point(double value);

  double mean() const;
  /// Inverse-CDF draw from u in [0, 1).
  double sample(double u) const;
  void validate() const;
};

struct SpanRewardModel {
  std::vector<SpanRewardDistribution> winner;
  std::vector<SpanRewardDistribution> loser;

  /// E[S_w] - E[S_l]
  double gap() const;
  std::vector<Range> winner_ranges() const;
  std::vector<Range> loser_ranges() const;
  void validate() const;
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::size_t hits = 0;
};

/// Monte Carlo estimate of P(S_w <= S_l) with its binomial standard error.
/// Every draw comes from a counter-based generator keyed by (seed, draw,
/// variable), so the result does not depend on `jobs`. Needs >= 10^4 samples.
McEstimate mc_noise_probability(const SpanRewardModel &model, std::size_t samples,
                                std::uint64_t seed, unsigned jobs = 1);

/// Random model with a strictly positive gap: 1..max_spans spans per side,
/// each uniform or discrete on a random bounded support.
SpanRewardModel random_span_reward_model(std::mt19937_64 &gen,
                                         std::size_t max_spans = 6);

// ---------------------------------------------------------------------------
// Constant-expected-reward reweighting

struct ToySpanDistribution {
  std::string context_id;
  std::vector<std::string> support;
  std::vector<double> probs;
  std::vector<double> rewards;

  std::size_t size() const { return probs.size(); }
  double expected(std::span<const double> f) const;
  double expected_reward() const { return expected(rewards); }
  void validate() const; // probs >= 0 summing to 1 within 1e-12
};

struct ReweightSolution {
  double mu = 0.0;
  double k = 1.0;
  ToySpanDistribution d_star;
  std::size_t iterations = 0;

  /// w(p) = k * exp(mu * r(p)) for every support element.
  std::vector<double> weights(const ToySpanDistribution &d) const;
};

/// Finds the reweighting D* = D / w with w = k exp(mu r) whose expected
/// reward is target. mu is located by bisection on [-50, 50]; k normalizes
/// D*. Throws TargetOutsideSupport when target is not strictly between the
/// smallest and largest reward carrying mass (or not reachable inside the
/// bracket) and DegenerateRewards when all rewards are equal but differ from
/// target.
ReweightSolution solve_optimal_reweight(const ToySpanDistribution &d, double target);

/// max - min over the support of D(p) / (D*(p) w(p)); 0 for an exact
/// reweighting.
double reweight_ratio_spread(const ToySpanDistribution &d,
                             const ReweightSolution &solution);

struct IsCheck {
  double lhs = 0.0;        // E_{D*}[f]
  double rhs = 0.0;        // E_D[f / w]
  double abs_diff = 0.0;
  double normalizer = 1.0; // sum_p D(p) / w(p)
  bool normalizable = true;
};

/// Importance-sampling identity E_{D*}[f] = E_D[f / w] with D* = D / w.
IsCheck importance_sampling_check(const ToySpanDistribution &d,
                                  std::span<const double> w,
                                  std::span<const double> f);

/// Same identity with an explicitly supplied D* (for instance the solver's
/// output); `normalizable` still refers to sum_p D(p) / w(p).
IsCheck importance_sampling_check(const ToySpanDistribution &d,
                                  const ToySpanDistribution &d_star,
                                  std::span<const double> w,
                                  std::span<const double> f);

ToySpanDistribution random_toy_distribution(std::mt19937_64 &gen,
                                            std::size_t min_support = 2,
                                            std::size_t max_support = 8);

// ---------------------------------------------------------------------------

/// Runs a bounds experiment description (see README) and returns the report.
nlohmann::ordered_json run_bounds_experiment(const nlohmann::json &spec,
                                             unsigned jobs = 1);

} // namespace ctpd::theory
