// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cli.hpp"
#include "ctpd/align.hpp"
#include "ctpd/error.hpp"
#include "ctpd/gradcheck.hpp"
#include "ctpd/numeric.hpp"
#include "ctpd/objective.hpp"
#include "ctpd/signals.hpp"
#include "ctpd/theory.hpp"
#include "ctpd/toy/experiment.hpp"
#include "ctpd/toy/train.hpp"
#include "ctpd/weighting.hpp"
#include "helpers.hpp"

using namespace ctpd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(const std::string &name, const std::function<Outcome()> &fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fs", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << buf << "]"
            << std::endl;
  failures += o.pass ? 0 : 1;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome alignment() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> rate(0.05, 0.95);
  const int cases = 10000;
  int bad = 0;
  for (int i = 0; i < cases; ++i) {
    const std::string text = testing::random_text(gen, 40);
    const auto t = testing::random_tiling(gen, text, "teacher", rate(gen));
    const auto s = testing::random_tiling(gen, text, "student", rate(gen));
    const auto p = partition_aligned_spans(t, s);
    bool ok = p == testing::oracle_partition(t, s);

    std::size_t at = 0;
    for (const auto &sp : p.spans) {
      ok = ok && sp.byte_start == at && sp.byte_end > sp.byte_start;
      at = sp.byte_end;
    }
    ok = ok && at == text.size();

    const auto bt = boundary_set(t), bs = boundary_set(s);
    std::vector<std::size_t> common;
    std::set_intersection(bt.begin(), bt.end(), bs.begin(), bs.end(), std::back_inserter(common));
    ok = ok && boundary_set(p) == common;
    for (const auto &sp : p.spans)
      for (std::size_t b = sp.byte_start + 1; b < sp.byte_end; ++b)
        ok = ok && !(std::binary_search(bt.begin(), bt.end(), b) &&
                     std::binary_search(bs.begin(), bs.end(), b));

    const auto q = partition_aligned_spans(s, t);
    ok = ok && q.size() == p.size();
    for (std::size_t k = 0; ok && k < p.size(); ++k)
      ok = q.spans[k].byte_start == p.spans[k].byte_start &&
           q.spans[k].byte_end == p.spans[k].byte_end &&
           q.spans[k].teacher_tokens == p.spans[k].student_tokens &&
           q.spans[k].student_tokens == p.spans[k].teacher_tokens;
    bad += ok ? 0 : 1;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 60.0,
          std::to_string(cases) + " cases, " + std::to_string(bad) + " failures, " + fmt(secs) +
              "s (limit 60s)"};
}

// Sums token values by byte containment, without the partition's index ranges.
double tokens_inside(const TokenizationTrace &trace, const LogProbTrack &track, std::size_t lo,
                     std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = 0; i < trace.tokens.size(); ++i)
    if (trace.tokens[i].start >= lo && trace.tokens[i].end <= hi)
      s += track.values[i];
  return s;
}

Outcome conservation() {
  std::mt19937_64 gen(77);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto b = testing::random_bundle(gen, {"teacher_ref", "positive", "negative"}, {"policy"});
    ensure_partition(b);
    const auto signals = build_span_signals(b);
    for (const auto &t : b.tracks) {
      const auto &trace = *b.trace_for(t.tokenizer_id);
      const std::string role = t.role.name();
      double total = 0.0;
      for (std::size_t k = 0; k < signals.size(); ++k) {
        const auto &sp = b.partition->spans[k];
        const double v = signals[k].at(role);
        worst = std::max(worst, std::abs(v - tokens_inside(trace, t, sp.byte_start, sp.byte_end)));
        total += v;
      }
      double direct = 0.0;
      for (double v : t.values)
        direct += v;
      worst = std::max(worst, std::abs(total - direct));
    }
  }
  return {worst <= 1e-12, "1000 examples x 4 roles, max |diff| " + fmt(worst) + " (limit 1e-12)"};
}

Outcome reduction() {
  std::mt19937_64 gen(31337);
  std::uniform_real_distribution<double> betas(0.01, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    PreferenceExample ex;
    ex.chosen = testing::random_bundle(gen, {"teacher_ref"}, {"policy"});
    ex.rejected = testing::random_bundle(gen, {"teacher_ref"}, {"policy"});
    ObjectiveConfig cfg;
    cfg.beta = betas(gen);
    const std::vector<double> ones_w(partition_aligned_spans(ex.chosen.teacher_trace, ex.chosen.student_trace).size(), 1.0);
    const std::vector<double> ones_l(partition_aligned_spans(ex.rejected.teacher_trace, ex.rejected.student_trace).size(), 1.0);
    const double span_level = ctpd_gradient(ex, ones_w, ones_l, cfg).loss;
    auto seq = [](const ResponseBundle &b) {
      return numeric::sum(b.track("policy").values) - numeric::sum(b.track("teacher_ref").values);
    };
    const double m = cfg.beta * (seq(ex.chosen) - seq(ex.rejected));
    const double oracle = m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    worst = std::max(worst, std::abs(span_level - oracle));
    worst = std::max(worst, std::abs(dpo_loss(seq(ex.chosen), seq(ex.rejected), cfg.beta).loss - oracle));
  }
  return {worst <= 1e-12, "1000 instances, max |ctpd - dpo| " + fmt(worst) + " (limit 1e-12)"};
}

Outcome gradients() {
  std::mt19937_64 gen(4242);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto [w, l] = random_ctpd_pair(gen);
    worst = std::max(worst, check_ctpd_gradient(w, l, ObjectiveConfig{}).max_rel_err);
  }

  // end to end through the toy LM's log-softmax
  using namespace ctpd::toy;
  const ToyTask task;
  std::vector<std::string> alpha;
  for (char c : task.alphabet)
    alpha.emplace_back(1, c);
  const ToyTokenizer tt("teacher_toy", {"ac", "ef", "gh", "ch", "de", "fa", "efa"}, alpha);
  const ToyTokenizer st("student_toy", {"ce", "ag", "hd", "ea", "bc", "cg", "fe"}, alpha);
  const auto prefs = generate_preferences(ToyGrammar(task), 32, {0.4, 0.08}, 9);
  ToyLM student(st, 2), ref(tt, 3), pos(tt, 3), neg(tt, 3);
  student.randomize(1, 0.5);
  ref.randomize(2, 0.5);
  pos.randomize(3, 0.5);
  neg.randomize(4, 0.5);
  auto examples = build_examples(prefs, tt, st, {&ref, &pos, &neg, &student, nullptr, nullptr});
  attach_weights(examples, WeightConfig{});
  const ObjectiveConfig cfg;
  const auto pairs = prepare_pairs(student, examples, cfg);
  const auto grad = ctpd_param_gradient(student, pairs, cfg);
  SeqRng rng(17);
  double toy_worst = 0.0;
  int checked = 0;
  for (int n = 0; n < 20000 && checked < 50; ++n) {
    const std::size_t i = rng.below(grad.size());
    if (std::abs(grad[i]) < 1e-5)
      continue;
    ToyLM p = student;
    p.params()[i] += 1e-4;
    const double up = ctpd_objective(p, pairs, cfg);
    p.params()[i] -= 2e-4;
    const double down = ctpd_objective(p, pairs, cfg);
    toy_worst = std::max(toy_worst, relative_error(grad[i], (up - down) / 2e-4));
    ++checked;
  }
  return {worst <= 1e-6 && toy_worst <= 1e-5 && checked == 50,
          "200 instances max rel err " + fmt(worst) + " (limit 1e-6); toy LM " +
              std::to_string(checked) + " params max rel err " + fmt(toy_worst) + " (limit 1e-5)"};
}

Outcome weight_formula() {
  const WeightConfig c;
  bool ok = c.k == 1.0 && c.mu_pos == 1.0 && c.mu_neg == -1.0 && c.clamp_lower == -0.5 &&
            c.clamp_upper == 1.5 && !c.normalize;
  const double s1 = contrastive_span_weight(3.0, 0.0, c, Polarity::winner);
  const double s2 = contrastive_span_weight(0.5, 0.0, c, Polarity::winner);
  const double s3 = contrastive_span_weight(0.0, 2.0, c, Polarity::loser);
  ok = ok && std::abs(s1 - 4.481689) < 1e-6 && std::abs(s1 - std::exp(1.5)) <= 1e-9;
  ok = ok && std::abs(s2 - 1.648721) < 1e-6 && std::abs(s2 - std::exp(0.5)) <= 1e-9;
  ok = ok && std::abs(s3 - std::exp(0.5)) <= 1e-9;
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> r(-6.0, 6.0);
  int bad = 0;
  for (auto pol : {Polarity::winner, Polarity::loser}) {
    const double lo = std::exp(std::min(c.mu(pol) * c.clamp_lower, c.mu(pol) * c.clamp_upper));
    const double hi = std::exp(std::max(c.mu(pol) * c.clamp_lower, c.mu(pol) * c.clamp_upper));
    for (int i = 0; i < 10000; ++i) {
      double a = r(gen), b = r(gen);
      if (a > b)
        std::swap(a, b);
      const double wa = contrastive_span_weight(a, 0.0, c, pol);
      const double wb = contrastive_span_weight(b, 0.0, c, pol);
      const bool mono = c.mu(pol) > 0 ? wa <= wb : wa >= wb;
      const bool bounded = wa >= lo && wa <= hi && wb >= lo && wb <= hi;
      bad += mono && bounded ? 0 : 1;
    }
  }
  return {ok && bad == 0, "defaults k=1 mu=+-1 [-0.5,1.5]; exp(1.5)=" + fmt(s1) + ", exp(0.5)=" +
                              fmt(s2) + "; 20000 random ratios, " + std::to_string(bad) +
                              " violations"};
}

Outcome hoeffding() {
  using namespace ctpd::theory;
  const std::vector<Range> one{{0.0, 1.0}};
  const std::vector<Range> four(4, Range{0.0, 1.0});
  const double b1 = hoeffding_noise_bound(0.5, one, one).bound;
  const double b4 = hoeffding_noise_bound(0.5, four, four).bound;
  const bool spots = std::abs(b1 - 0.778801) < 1e-6 && std::abs(b1 - std::exp(-0.25)) <= 1e-12 &&
                     std::abs(b4 - 0.367879) < 1e-6 && std::abs(b4 - std::exp(-1.0)) <= 1e-12;
  std::mt19937_64 gen(1001);
  const int models = 1000;
  int bad = 0;
  double worst_slack = -1.0;
  std::size_t draws = 0;
  for (int i = 0; i < models; ++i) {
    const auto m = random_span_reward_model(gen);
    const auto b = hoeffding_noise_bound(m.gap(), m.winner_ranges(), m.loser_ranges());
    const auto e = mc_noise_probability(m, 100000, 5000 + i);
    draws += e.samples;
    const double slack = e.estimate - (b.bound + 3 * e.std_error);
    worst_slack = std::max(worst_slack, slack);
    bad += m.gap() > 0 && slack <= 0 ? 0 : 1;
  }
  return {spots && bad == 0,
          "bounds " + fmt(b1) + ", " + fmt(b4) + "; " + std::to_string(models) +
              " models, " + std::to_string(draws) + " draws total, " + std::to_string(bad) +
              " above bound + 3 SE (max estimate - allowance " + fmt(worst_slack) + ")"};
}

Outcome reweight() {
  using namespace ctpd::theory;
  const ToySpanDistribution skew{"c", {"x", "y"}, {0.8, 0.2}, {0.0, 1.0}};
  const auto s = solve_optimal_reweight(skew, 0.5);
  const bool worked = std::abs(s.mu + std::log(4.0)) <= 1e-9 && std::abs(s.k - 1.6) <= 1e-9 &&
                      std::abs(s.d_star.probs[0] - 0.5) <= 1e-9;
  std::mt19937_64 gen(2718);
  std::uniform_real_distribution<double> t(0.05, 0.95);
  int solved = 0, skipped = 0, bad = 0;
  double worst_mean = 0.0, worst_spread = 0.0;
  while (solved < 100) {
    const auto d = random_toy_distribution(gen);
    const auto [lo, hi] = std::minmax_element(d.rewards.begin(), d.rewards.end());
    const double target = *lo + t(gen) * (*hi - *lo);
    ReweightSolution sol;
    try {
      sol = solve_optimal_reweight(d, target);
    } catch (const TargetOutsideSupport &) {
      ++skipped;
      continue;
    }
    ++solved;
    const double err = std::abs(sol.d_star.expected_reward() - target);
    const double spread = reweight_ratio_spread(d, sol);
    worst_mean = std::max(worst_mean, err);
    worst_spread = std::max(worst_spread, spread);
    bad += err <= 1e-10 && spread <= 1e-10 ? 0 : 1;
  }
  return {worked && bad == 0,
          "mu=-ln4 case mu=" + fmt(s.mu) + " k=" + fmt(s.k) + "; 100 distributions, max |E-R*| " +
              fmt(worst_mean) + ", max ratio spread " + fmt(worst_spread) + " (limit 1e-10; " +
              std::to_string(skipped) + " targets beyond |mu|<=50 redrawn)"};
}

Outcome importance_sampling() {
  using namespace ctpd::theory;
  std::mt19937_64 gen(1618);
  std::uniform_real_distribution<double> fv(-5.0, 5.0);
  double worst = 0.0;
  int cases = 0;
  while (cases < 100) {
    const auto d = random_toy_distribution(gen);
    const auto [lo, hi] = std::minmax_element(d.rewards.begin(), d.rewards.end());
    ReweightSolution sol;
    try {
      sol = solve_optimal_reweight(d, 0.5 * (*lo + *hi));
    } catch (const TargetOutsideSupport &) {
      continue;
    }
    std::vector<double> f(d.size());
    for (double &x : f)
      x = fv(gen);
    const auto w = sol.weights(d);
    const auto chk = importance_sampling_check(d, sol.d_star, w, f);
    if (!chk.normalizable)
      continue;
    // exact enumeration, independent of the library's sums
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p) {
      lhs += sol.d_star.probs[p] * f[p];
      rhs += d.probs[p] * f[p] / w[p];
    }
    worst = std::max({worst, std::abs(lhs - rhs), chk.abs_diff});
    ++cases;
  }
  return {worst <= 1e-12, "100 cases, max |E_D*[f] - E_D[f/w]| " + fmt(worst) + " (limit 1e-12)"};
}

int run_cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  if (code != 0)
    std::cerr << err.str();
  return code;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct ToyRuns {
  fs::path dir;
  double first_secs = 0.0;
  int code_a = -1, code_b = -1;
};

ToyRuns &toy_runs() {
  static ToyRuns runs = [] {
    ToyRuns r;
    r.dir = fs::temp_directory_path() / "ctpd_acceptance";
    fs::create_directories(r.dir);
    const std::string spec = std::string(CTPD_SOURCE_DIR) + "/specs/standard_noisy.json";
    const auto t0 = Clock::now();
    r.code_a = run_cli({"toy-run", "--spec", spec, "--out", (r.dir / "a.json").string()});
    r.first_secs = seconds_since(t0);
    r.code_b = run_cli({"toy-run", "--spec", spec, "--out", (r.dir / "b.json").string(), "--jobs", "3"});
    return r;
  }();
  return runs;
}

Outcome toy_orderings() {
  auto &r = toy_runs();
  if (r.code_a != 0)
    return {false, "toy-run exited " + std::to_string(r.code_a)};
  const auto rep = nlohmann::json::parse(slurp(r.dir / "a.json"));
  const auto &acc = rep["mean_accuracy"];
  const double ctpd = acc["ctpd"], dpo = acc["dpo"], rnd = acc["random"], sref = acc["student_ref"];
  const double multi = rep["alignment"]["multi_token_span_fraction"];
  const bool ok = ctpd >= dpo && ctpd > rnd && ctpd >= sref && multi >= 0.2 &&
                  r.first_secs <= 900.0 && rep["seeds"].size() == 5;
  return {ok, "ctpd " + fmt(ctpd) + " vs dpo " + fmt(dpo) + ", random " + fmt(rnd) +
                  ", student_ref " + fmt(sref) + "; multi-token spans " + fmt(100 * multi) +
                  "%; " + fmt(r.first_secs) + "s (limit 900s)"};
}

Outcome determinism() {
  auto &r = toy_runs();
  if (r.code_a != 0 || r.code_b != 0)
    return {false, "toy-run failed"};
  const auto a = slurp(r.dir / "a.json"), b = slurp(r.dir / "b.json");
  return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " +
                                    (a == b ? "identical" : "different") +
                                    " across two runs (jobs 1 and 3)"};
}

} // namespace

int main() {
  criterion("span alignment", alignment);
  criterion("conservation", conservation);
  criterion("reduction to DPO", reduction);
  criterion("gradient check", gradients);
  criterion("weight formula", weight_formula);
  criterion("noise bound soundness", hoeffding);
  criterion("optimal reweighting", reweight);
  criterion("importance sampling identity", importance_sampling);
  criterion("toy experiment orderings", toy_orderings);
  criterion("toy-run determinism", determinism);
  fs::remove_all(fs::temp_directory_path() / "ctpd_acceptance");
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
