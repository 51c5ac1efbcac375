#include "ctpd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ctpd/error.hpp"
#include "ctpd/numeric.hpp"
#include "ctpd/parallel.hpp"
#include "ctpd/rng.hpp"

namespace ctpd::theory {

BoundResult hoeffding_noise_bound(double gap, std::span<const Range> ranges_w,
                                  std::span<const Range> ranges_l) {
  if (ranges_w.empty() || ranges_l.empty())
    throw std::invalid_argument("each response needs at least one span");
  for (const auto &r : {ranges_w, ranges_l})
    for (const Range &x : r)
      if (!std::isfinite(x.lo) || !std::isfinite(x.hi) || x.hi < x.lo)
        throw std::invalid_argument("span reward ranges must be bounded with hi >= lo");
  if (!(gap > 0.0))
    return {1.0, true};

  auto spread = [](std::span<const Range> ranges) {
    const double n = static_cast<double>(ranges.size());
    double acc = 0.0;
    for (const Range &r : ranges)
      acc += r.width() * r.width();
    return acc / (n * n);
  };
  const double denom = spread(ranges_w) + spread(ranges_l);
  if (denom == 0.0)
    return {0.0, false}; // point masses with a positive gap: the event is impossible
  return {std::exp(-2.0 * gap * gap / denom), false};
}

// ---------------------------------------------------------------------------

SpanRewardDistribution SpanRewardDistribution::uniform(double lo, double hi) {
  SpanRewardDistribution d;
  d.kind = Kind::uniform;
  d.support = {lo, hi};
  d.validate();
  return d;
}

SpanRewardDistribution SpanRewardDistribution::discrete(std::vector<double> values,
                                                        std::vector<double> probs) {
  SpanRewardDistribution d;
  d.kind = Kind::discrete;
  if (values.empty())
    throw std::invalid_argument("discrete distribution needs values");
  d.support = {*std::min_element(values.begin(), values.end()),
               *std::max_element(values.begin(), values.end())};
  d.values = std::move(values);
  d.probs = std::move(probs);
  d.validate();
  return d;
}

SpanRewardDistribution SpanRewardDistribution::point(double value) {
  return discrete({value}, {1.0});
}

double SpanRewardDistribution::mean() const {
  if (kind == Kind::uniform)
    return 0.5 * (support.lo + support.hi);
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    acc += values[i] * probs[i];
  return acc;
}

double SpanRewardDistribution::sample(double u) const {
  if (kind == Kind::uniform)
    return support.lo + u * support.width();
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    cum += probs[i];
    if (u < cum)
      return values[i];
  }
  return values.back();
}

void SpanRewardDistribution::validate() const {
  if (!std::isfinite(support.lo) || !std::isfinite(support.hi) ||
      support.hi < support.lo)
    throw std::invalid_argument("span reward support must be bounded");
  if (kind == Kind::discrete) {
    if (values.size() != probs.size() || values.empty())
      throw std::invalid_argument("discrete distribution: values/probs mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(probs[i] >= 0.0))
        throw std::invalid_argument("discrete distribution: negative probability");
      if (values[i] < support.lo || values[i] > support.hi)
        throw std::invalid_argument("discrete distribution: value outside support");
      total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("discrete distribution: probabilities must sum to 1");
  }
}

double SpanRewardModel::gap() const {
  auto avg = [](const std::vector<SpanRewardDistribution> &side) {
    double acc = 0.0;
    for (const auto &d : side)
      acc += d.mean();
    return acc / static_cast<double>(side.size());
  };
  return avg(winner) - avg(loser);
}

std::vector<Range> SpanRewardModel::winner_ranges() const {
  std::vector<Range> out;
  for (const auto &d : winner)
    out.push_back(d.support);
  return out;
}

std::vector<Range> SpanRewardModel::loser_ranges() const {
  std::vector<Range> out;
  for (const auto &d : loser)
    out.push_back(d.support);
  return out;
}

void SpanRewardModel::validate() const {
  if (winner.empty() || loser.empty())
    throw std::invalid_argument("span reward model needs n_w, n_l >= 1");
  for (const auto &d : winner)
    d.validate();
  for (const auto &d : loser)
    d.validate();
}

McEstimate mc_noise_probability(const SpanRewardModel &model, std::size_t samples,
                                std::uint64_t seed, unsigned jobs) {
  if (samples < 10000)
    throw std::invalid_argument("Monte Carlo needs at least 10^4 samples");
  model.validate();
  const CounterRng rng(seed);
  const std::size_t nw = model.winner.size();
  const std::size_t nl = model.loser.size();
  const std::uint64_t stride = nw + nl;

  constexpr std::size_t kShard = 1 << 14;
  const std::size_t shards = (samples + kShard - 1) / kShard;
  std::vector<std::size_t> hits(shards, 0);
  parallel_for(shards, jobs, [&](std::size_t s) {
    const std::size_t begin = s * kShard;
    const std::size_t end = std::min(samples, begin + kShard);
    std::size_t local = 0;
    for (std::size_t draw = begin; draw < end; ++draw) {
      const std::uint64_t base = static_cast<std::uint64_t>(draw) * stride;
      double sw = 0.0, sl = 0.0;
      for (std::size_t i = 0; i < nw; ++i)
        sw += model.winner[i].sample(rng.uniform(base + i));
      for (std::size_t j = 0; j < nl; ++j)
        sl += model.loser[j].sample(rng.uniform(base + nw + j));
      if (sw / static_cast<double>(nw) <= sl / static_cast<double>(nl))
        ++local;
    }
    hits[s] = local;
  });

  McEstimate out;
  out.samples = samples;
  out.hits = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
  out.estimate = static_cast<double>(out.hits) / static_cast<double>(samples);
  out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(samples));
  return out;
}

SpanRewardModel random_span_reward_model(std::mt19937_64 &gen, std::size_t max_spans) {
  std::uniform_int_distribution<std::size_t> count(1, max_spans);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto make_span = [&] {
    const double lo = -1.0 + unit(gen);
    const double hi = lo + 0.05 + 1.45 * unit(gen);
    if (unit(gen) < 0.5)
      return SpanRewardDistribution::uniform(lo, hi);
    const std::size_t k = 2 + static_cast<std::size_t>(3 * unit(gen));
    std::vector<double> values{lo, hi};
    while (values.size() < k)
      values.push_back(lo + (hi - lo) * unit(gen));
    std::vector<double> probs(values.size());
    for (double &p : probs)
      p = 0.05 + unit(gen);
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (double &p : probs)
      p /= total;
    return SpanRewardDistribution::discrete(std::move(values), std::move(probs));
  };
  SpanRewardModel m;
  const std::size_t nw = count(gen), nl = count(gen);
  for (std::size_t i = 0; i < nw; ++i)
    m.winner.push_back(make_span());
  for (std::size_t j = 0; j < nl; ++j)
    m.loser.push_back(make_span());

  // Shift the winner side so the gap lands in [0.01, 1.01].
  const double shift = 0.01 + unit(gen) - m.gap();
  for (auto &d : m.winner) {
    d.support.lo += shift;
    d.support.hi += shift;
    for (double &v : d.values)
      v += shift;
  }
  return m;
}

// ---------------------------------------------------------------------------

double ToySpanDistribution::expected(std::span<const double> f) const {
  if (f.size() != probs.size())
    throw LengthMismatch("function values", f.size(), probs.size());
  numeric::CompensatedSum acc;
  for (std::size_t i = 0; i < probs.size(); ++i)
    acc.add(probs[i] * f[i]);
  return acc.value();
}

void ToySpanDistribution::validate() const {
  if (probs.empty())
    throw std::invalid_argument("distribution has empty support");
  if (rewards.size() != probs.size() ||
      (!support.empty() && support.size() != probs.size()))
    throw std::invalid_argument("support, probs and rewards must align");
  numeric::CompensatedSum total;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("probabilities must be nonnegative");
    total.add(p);
  }
  if (std::abs(total.value() - 1.0) > 1e-12)
    throw std::invalid_argument("probabilities must sum to 1");
  for (double r : rewards)
    if (!std::isfinite(r))
      throw std::invalid_argument("rewards must be finite");
}

std::vector<double> ReweightSolution::weights(const ToySpanDistribution &d) const {
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = k * std::exp(mu * d.rewards[i]);
  return out;
}

namespace {

// D*(mu)(p) proportional to D(p) exp(-mu r(p)); also returns log of the
// normalizer sum_p D(p) exp(-mu r(p)).
std::vector<double> tilted(const ToySpanDistribution &d, double mu, double *log_norm) {
  std::vector<double> logits;
  logits.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.probs[i] > 0.0)
      logits.push_back(std::log(d.probs[i]) - mu * d.rewards[i]);
  const double lse = numeric::log_sum_exp(logits);
  std::vector<double> out(d.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.probs[i] > 0.0)
      out[i] = std::exp(std::log(d.probs[i]) - mu * d.rewards[i] - lse);
  if (log_norm != nullptr)
    *log_norm = lse;
  return out;
}

double tilted_mean(const ToySpanDistribution &d, double mu) {
  const auto p = tilted(d, mu, nullptr);
  numeric::CompensatedSum acc;
  for (std::size_t i = 0; i < p.size(); ++i)
    acc.add(p[i] * d.rewards[i]);
  return acc.value();
}

} // namespace

ReweightSolution solve_optimal_reweight(const ToySpanDistribution &d, double target) {
  d.validate();
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = -rmin;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.probs[i] > 0.0) {
      rmin = std::min(rmin, d.rewards[i]);
      rmax = std::max(rmax, d.rewards[i]);
    }

  ReweightSolution sol;
  if (rmax - rmin <= 1e-15 * std::max(1.0, std::abs(rmax))) {
    if (std::abs(target - rmin) > 1e-12)
      throw DegenerateRewards("all rewards equal " + std::to_string(rmin) +
                              " but the target is " + std::to_string(target));
    sol.d_star = d;
    return sol;
  }
  if (!(target > rmin && target < rmax))
    throw TargetOutsideSupport("target reward " + std::to_string(target) +
                               " is outside (" + std::to_string(rmin) + ", " +
                               std::to_string(rmax) + ")");

  // g(mu) = E_{D*(mu)}[r] - target is nonincreasing in mu.
  constexpr double kTol = 1e-12;
  double lo = -50.0, hi = 50.0;
  if (tilted_mean(d, lo) - target < 0.0 || tilted_mean(d, hi) - target > 0.0)
    throw TargetOutsideSupport("target reward not reachable with |mu| <= 50");
  double mu = 0.5 * (lo + hi);
  for (sol.iterations = 1; sol.iterations <= 2000; ++sol.iterations) {
    mu = 0.5 * (lo + hi);
    const double g = tilted_mean(d, mu) - target;
    if (std::abs(g) <= kTol || mu == lo || mu == hi)
      break;
    if (g > 0.0)
      lo = mu;
    else
      hi = mu;
  }

  double log_norm = 0.0;
  sol.mu = mu;
  sol.d_star = d;
  sol.d_star.context_id = d.context_id + "*";
  sol.d_star.probs = tilted(d, mu, &log_norm);
  sol.k = std::exp(log_norm);
  return sol;
}

double reweight_ratio_spread(const ToySpanDistribution &d,
                             const ReweightSolution &solution) {
  const auto w = solution.weights(d);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.probs[i] <= 0.0)
      continue;
    const double ratio = d.probs[i] / (solution.d_star.probs[i] * w[i]);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return hi - lo;
}

IsCheck importance_sampling_check(const ToySpanDistribution &d,
                                  const ToySpanDistribution &d_star,
                                  std::span<const double> w,
                                  std::span<const double> f) {
  if (w.size() != d.size())
    throw LengthMismatch("importance weights", w.size(), d.size());
  if (f.size() != d.size() || d_star.size() != d.size())
    throw LengthMismatch("function values", f.size(), d.size());
  IsCheck out;
  numeric::CompensatedSum norm, rhs;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(w[i] > 0.0))
      throw std::invalid_argument("importance weights must be positive");
    norm.add(d.probs[i] / w[i]);
    rhs.add(d.probs[i] * f[i] / w[i]);
  }
  out.normalizer = norm.value();
  out.normalizable = std::abs(out.normalizer - 1.0) <= 1e-10;
  out.lhs = d_star.expected(f);
  out.rhs = rhs.value();
  out.abs_diff = std::abs(out.lhs - out.rhs);
  return out;
}

IsCheck importance_sampling_check(const ToySpanDistribution &d,
                                  std::span<const double> w,
                                  std::span<const double> f) {
  if (w.size() != d.size())
    throw LengthMismatch("importance weights", w.size(), d.size());
  ToySpanDistribution d_star = d;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(w[i] > 0.0))
      throw std::invalid_argument("importance weights must be positive");
    d_star.probs[i] = d.probs[i] / w[i];
  }
  return importance_sampling_check(d, d_star, w, f);
}

ToySpanDistribution random_toy_distribution(std::mt19937_64 &gen,
                                            std::size_t min_support,
                                            std::size_t max_support) {
  std::uniform_int_distribution<std::size_t> count(min_support, max_support);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ToySpanDistribution d;
  const std::size_t n = count(gen);
  d.context_id = "ctx";
  for (std::size_t i = 0; i < n; ++i) {
    d.support.push_back("span" + std::to_string(i));
    d.probs.push_back(0.05 + unit(gen));
    d.rewards.push_back(-2.0 + 4.0 * unit(gen));
  }
  const double total = numeric::sum(d.probs);
  for (double &p : d.probs)
    p /= total;
  return d;
}

// ---------------------------------------------------------------------------

namespace {

SpanRewardDistribution parse_distribution(const nlohmann::json &j) {
  if (j.contains("uniform")) {
    const auto &r = j.at("uniform");
    return SpanRewardDistribution::uniform(r.at(0).get<double>(), r.at(1).get<double>());
  }
  if (j.contains("discrete")) {
    const auto &body = j.at("discrete");
    return SpanRewardDistribution::discrete(body.at("values").get<std::vector<double>>(),
                                            body.at("probs").get<std::vector<double>>());
  }
  if (j.contains("point"))
    return SpanRewardDistribution::point(j.at("point").get<double>());
  throw std::invalid_argument("distribution must be uniform, discrete or point");
}

} // namespace

nlohmann::ordered_json run_bounds_experiment(const nlohmann::json &spec, unsigned jobs) {
  const std::uint64_t seed = spec.at("seed").get<std::uint64_t>();
  const std::size_t samples = spec.value("samples", std::size_t{100000});

  std::vector<SpanRewardModel> models;
  if (spec.contains("models"))
    for (const auto &m : spec.at("models")) {
      SpanRewardModel model;
      for (const auto &d : m.at("winner"))
        model.winner.push_back(parse_distribution(d));
      for (const auto &d : m.at("loser"))
        model.loser.push_back(parse_distribution(d));
      model.validate();
      models.push_back(std::move(model));
    }
  if (spec.contains("random_models")) {
    const auto &r = spec.at("random_models");
    std::mt19937_64 gen(r.value("seed", seed));
    const std::size_t n = r.at("count").get<std::size_t>();
    const std::size_t max_spans = r.value("max_spans", std::size_t{6});
    for (std::size_t i = 0; i < n; ++i)
      models.push_back(random_span_reward_model(gen, max_spans));
  }

  struct Row {
    double gap;
    BoundResult bound;
    McEstimate mc;
  };
  std::vector<Row> rows(models.size());
  parallel_for(models.size(), jobs, [&](std::size_t i) {
    const auto &m = models[i];
    const auto rw = m.winner_ranges();
    const auto rl = m.loser_ranges();
    rows[i].gap = m.gap();
    rows[i].bound = hoeffding_noise_bound(rows[i].gap, rw, rl);
    rows[i].mc = mc_noise_probability(m, samples, CounterRng::mix(seed + i), 1);
  });

  nlohmann::ordered_json report;
  report["samples"] = samples;
  report["seed"] = seed;
  auto cases = nlohmann::ordered_json::array();
  std::size_t passed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row &r = rows[i];
    const bool pass = r.mc.estimate <= r.bound.bound + 3.0 * r.mc.std_error;
    passed += pass ? 1 : 0;
    nlohmann::ordered_json c;
    c["index"] = i;
    c["n_w"] = models[i].winner.size();
    c["n_l"] = models[i].loser.size();
    c["gap"] = r.gap;
    c["bound"] = r.bound.bound;
    c["vacuous"] = r.bound.vacuous;
    c["estimate"] = r.mc.estimate;
    c["std_error"] = r.mc.std_error;
    c["pass"] = pass;
    cases.push_back(std::move(c));
  }
  report["cases"] = std::move(cases);
  report["passed"] = passed;
  report["total"] = rows.size();
  report["all_pass"] = passed == rows.size();
  return report;
}

} // namespace ctpd::theory
