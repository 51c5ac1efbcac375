#include <doctest.h>

#include <cmath>

#include "ctpd/error.hpp"
#include "ctpd/theory.hpp"

using namespace ctpd;
using namespace ctpd::theory;

namespace {

SpanRewardDistribution bernoulli(double p_one) {
  return SpanRewardDistribution::discrete({0.0, 1.0}, {1.0 - p_one, p_one});
}

// Independent estimate with a plain std::mt19937_64 stream.
double plain_mc(const SpanRewardModel &m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double sw = 0.0, sl = 0.0;
    for (const auto &d : m.winner)
      sw += d.sample(u(gen));
    for (const auto &d : m.loser)
      sl += d.sample(u(gen));
    sw /= static_cast<double>(m.winner.size());
    sl /= static_cast<double>(m.loser.size());
    hits += sw <= sl ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

} // namespace

TEST_CASE("hoeffding bound spot values") {
  const std::vector<Range> one{{0.0, 1.0}};
  CHECK(std::abs(hoeffding_noise_bound(0.5, one, one).bound - 0.7788007830714049) < 1e-12);
  const std::vector<Range> four(4, Range{0.0, 1.0});
  CHECK(std::abs(hoeffding_noise_bound(0.5, four, four).bound - 0.36787944117144233) < 1e-12);
  CHECK(hoeffding_noise_bound(1e-9, one, one).bound == doctest::Approx(1.0));
  const auto none = hoeffding_noise_bound(-0.1, one, one);
  CHECK(none.vacuous);
  CHECK(none.bound == 1.0);
  const std::vector<Range> point{{0.3, 0.3}};
  CHECK(hoeffding_noise_bound(0.2, point, point).bound == 0.0);
}

TEST_CASE("distributions") {
  const auto u = SpanRewardDistribution::uniform(-1.0, 3.0);
  CHECK(u.mean() == 1.0);
  CHECK(u.sample(0.25) == 0.0);
  const auto d = SpanRewardDistribution::discrete({0.0, 2.0, 5.0}, {0.5, 0.25, 0.25});
  CHECK(d.mean() == 1.75);
  CHECK(d.sample(0.1) == 0.0);
  CHECK(d.sample(0.6) == 2.0);
  CHECK(d.sample(0.99) == 5.0);
  CHECK(SpanRewardDistribution::point(0.4).sample(0.7) == 0.4);
  CHECK_THROWS(SpanRewardDistribution::uniform(2.0, 1.0));
  CHECK_THROWS(SpanRewardDistribution::discrete({0.0}, {0.5}));
}

TEST_CASE("monte carlo spot cases") {
  SpanRewardModel sure{{SpanRewardDistribution::point(1.0)}, {SpanRewardDistribution::point(0.0)}};
  CHECK(mc_noise_probability(sure, 10000, 1).estimate == 0.0);

  SpanRewardModel same{{SpanRewardDistribution::uniform(0, 1)}, {SpanRewardDistribution::uniform(0, 1)}};
  const auto s = mc_noise_probability(same, 100000, 2);
  CHECK(s.estimate >= 0.5 - 4 * s.std_error);

  SpanRewardModel ties{{bernoulli(0.5)}, {bernoulli(0.5)}};
  CHECK(mc_noise_probability(ties, 100000, 3).estimate == doctest::Approx(0.75).epsilon(0.02));

  // four uniform spans per side, supports shifted by 0.5
  SpanRewardModel shifted;
  for (int i = 0; i < 4; ++i) {
    shifted.winner.push_back(SpanRewardDistribution::uniform(0.5, 1.5));
    shifted.loser.push_back(SpanRewardDistribution::uniform(0.0, 1.0));
  }
  CHECK(shifted.gap() == doctest::Approx(0.5));
  const auto e = mc_noise_probability(shifted, 100000, 4);
  const auto b = hoeffding_noise_bound(shifted.gap(), shifted.winner_ranges(), shifted.loser_ranges());
  CHECK(b.bound == doctest::Approx(std::exp(-1.0)));
  CHECK(e.estimate <= b.bound + 3 * e.std_error);

  CHECK_THROWS_AS(mc_noise_probability(shifted, 100, 4), std::invalid_argument);
}

TEST_CASE("monte carlo agrees with an independent sampler and ignores jobs") {
  std::mt19937_64 gen(9);
  for (int i = 0; i < 10; ++i) {
    const auto m = random_span_reward_model(gen);
    const auto a = mc_noise_probability(m, 50000, 100 + i, 1);
    const auto b = mc_noise_probability(m, 50000, 100 + i, 3);
    CHECK(a.estimate == b.estimate);
    CHECK(a.hits == b.hits);
    const double ref = plain_mc(m, 50000, 500 + i);
    const double se = std::sqrt(std::max(a.estimate * (1 - a.estimate), 1e-4) / 50000.0);
    CHECK(std::abs(a.estimate - ref) <= 6 * std::sqrt(2.0) * se);
  }
}

TEST_CASE("bound soundness on random models") {
  std::mt19937_64 gen(21);
  for (int i = 0; i < 40; ++i) {
    const auto m = random_span_reward_model(gen);
    CHECK(m.gap() > 0.0);
    const auto b = hoeffding_noise_bound(m.gap(), m.winner_ranges(), m.loser_ranges());
    const auto e = mc_noise_probability(m, 20000, 1000 + i);
    CHECK(e.estimate <= b.bound + 3 * e.std_error);
  }
}

TEST_CASE("optimal reweight worked cases") {
  ToySpanDistribution flat{"c", {"x", "y"}, {0.3, 0.7}, {2.0, 2.0}};
  const auto f = solve_optimal_reweight(flat, 2.0);
  CHECK(f.mu == 0.0);
  CHECK(f.d_star.probs == flat.probs);
  CHECK_THROWS_AS(solve_optimal_reweight(flat, 1.0), DegenerateRewards);

  ToySpanDistribution sym{"c", {"x", "y"}, {0.5, 0.5}, {0.0, 1.0}};
  CHECK(std::abs(solve_optimal_reweight(sym, 0.5).mu) < 1e-9);

  ToySpanDistribution skew{"c", {"x", "y"}, {0.8, 0.2}, {0.0, 1.0}};
  const auto s = solve_optimal_reweight(skew, 0.5);
  CHECK(std::abs(s.mu - (-std::log(4.0))) < 1e-9);
  CHECK(std::abs(s.d_star.expected_reward() - 0.5) < 1e-10);
  // direct normalization: D* = (0.8, 0.2*4) / 1.6
  CHECK(std::abs(s.d_star.probs[0] - 0.5) < 1e-10);
  CHECK(std::abs(s.k - 1.6) < 1e-9);
  CHECK(reweight_ratio_spread(skew, s) < 1e-10);

  CHECK_THROWS_AS(solve_optimal_reweight(skew, 1.0), TargetOutsideSupport);
  CHECK_THROWS_AS(solve_optimal_reweight(skew, -0.1), TargetOutsideSupport);
  ToySpanDistribution bad{"c", {"x", "y"}, {0.5, 0.6}, {0.0, 1.0}};
  CHECK_THROWS(solve_optimal_reweight(bad, 0.5));
}

TEST_CASE("optimal reweight on random distributions") {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 200; ++i) {
    const auto d = random_toy_distribution(gen);
    std::uniform_real_distribution<double> t(0.05, 0.95);
    double lo = 1e9, hi = -1e9;
    for (double r : d.rewards) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const double target = lo + t(gen) * (hi - lo);
    ReweightSolution sol;
    try {
      sol = solve_optimal_reweight(d, target);
    } catch (const TargetOutsideSupport &) {
      continue; // needs |mu| > 50
    }
    double mean = 0.0, mass = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p) {
      mean += sol.d_star.probs[p] * d.rewards[p];
      mass += sol.d_star.probs[p];
    }
    CHECK(std::abs(mean - target) <= 1e-10);
    CHECK(std::abs(mass - 1.0) <= 1e-12);
    CHECK(reweight_ratio_spread(d, sol) <= 1e-10);
  }
}

TEST_CASE("importance sampling identity") {
  ToySpanDistribution d{"c", {"a", "b", "c"}, {0.2, 0.5, 0.3}, {1.0, -1.0, 0.5}};
  const std::vector<double> ones(3, 1.0), f{3.0, -2.0, 7.0}, zero(3, 0.0);
  const auto id = importance_sampling_check(d, ones, f);
  CHECK(id.lhs == doctest::Approx(0.2 * 3 - 1.0 + 2.1));
  CHECK(id.lhs == id.rhs);
  const auto z = importance_sampling_check(d, ones, zero);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);

  std::mt19937_64 gen(8);
  for (int i = 0; i < 100; ++i) {
    const auto dd = random_toy_distribution(gen);
    const auto sol = solve_optimal_reweight(dd, dd.expected_reward() * 0.5 + 0.25 * (dd.rewards[0] + dd.rewards[1]));
    const auto w = sol.weights(dd);
    const auto via_solver = importance_sampling_check(dd, sol.d_star, w, dd.rewards);
    CHECK(via_solver.normalizable);
    CHECK(via_solver.abs_diff <= 1e-12);
    const auto direct = importance_sampling_check(dd, w, dd.rewards);
    CHECK(direct.abs_diff <= 1e-12);
  }
}

TEST_CASE("bounds experiment report") {
  const nlohmann::json spec = {
      {"seed", 3},
      {"samples", 20000},
      {"models", {{{"winner", {{{"uniform", {0.5, 1.5}}}}}, {"loser", {{{"point", 0.2}}}}}}},
      {"random_models", {{"count", 5}}}};
  const auto a = run_bounds_experiment(spec, 1);
  const auto b = run_bounds_experiment(spec, 4);
  CHECK(a.dump() == b.dump());
  CHECK(a["total"] == 6);
  CHECK(a["all_pass"] == true);
  CHECK(a["cases"][0]["gap"].get<double>() == doctest::Approx(0.8));
}
