#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "ctpd/align.hpp"
#include "ctpd/error.hpp"
#include "ctpd/gradcheck.hpp"
#include "ctpd/numeric.hpp"
#include "ctpd/objective.hpp"
#include "ctpd/parallel.hpp"
#include "ctpd/rng.hpp"
#include "ctpd/theory.hpp"
#include "ctpd/trace_io.hpp"
#include "ctpd/weighting.hpp"
#include "ctpd/toy/experiment.hpp"

namespace ctpd::cli {

namespace {

/// Bad flag values found after CLI11 parsing; reported as usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string in;
  std::string out;
  std::string spec;
  std::optional<std::uint64_t> seed;
  bool fail_fast = false;
  unsigned jobs = default_jobs();

  std::string strategy = "contrastive_teacher";
  WeightConfig weights;

  double beta = 0.1;
  std::string loss = "ctpd";
  std::string reference = "teacher_ref";
  bool unit_weights = false;

  std::size_t random = 0;
  double tol = 0.0;
};

void add_weight_flags(CLI::App *cmd, Options &o) {
  cmd->add_option("--strategy", o.strategy,
                  "contrastive_teacher | random | average | student_estimate | "
                  "teacher_student_estimate");
  cmd->add_option("--k", o.weights.k, "weight scale k");
  cmd->add_option("--mu-pos", o.weights.mu_pos, "mu for chosen responses");
  cmd->add_option("--mu-neg", o.weights.mu_neg, "mu for rejected responses");
  cmd->add_option("--clamp-lo", o.weights.clamp_lower, "lower clamp L of the log-ratio");
  cmd->add_option("--clamp-hi", o.weights.clamp_upper, "upper clamp U of the log-ratio");
  cmd->add_flag("--normalize", o.weights.normalize, "rescale each response's weights to mean 1");
  cmd->add_option("--positive-role", o.weights.positive_role, "track used as pi+");
  cmd->add_option("--negative-role", o.weights.negative_role, "track used as pi-");
}

void add_objective_flags(CLI::App *cmd, Options &o) {
  cmd->add_option("--beta", o.beta, "loss temperature beta");
  cmd->add_option("--loss", o.loss, "ctpd | dpo | tis_dpo_token");
  cmd->add_option("--reference", o.reference, "teacher_ref | student_ref");
}

WeightConfig weight_config(const Options &o) {
  WeightConfig cfg = o.weights;
  const auto s = parse_weight_strategy(o.strategy);
  if (!s)
    throw UsageError("--strategy: unknown strategy '" + o.strategy + "'");
  cfg.strategy = *s;
  try {
    cfg.validate();
  } catch (const std::invalid_argument &e) {
    throw UsageError(std::string("--k/--clamp-lo/--clamp-hi: ") + e.what());
  }
  return cfg;
}

ObjectiveConfig objective_config(const Options &o) {
  ObjectiveConfig cfg;
  cfg.beta = o.beta;
  const auto loss = parse_loss_kind(o.loss);
  if (!loss)
    throw UsageError("--loss: unknown loss '" + o.loss + "'");
  cfg.loss_kind = *loss;
  const auto ref = parse_reference_role(o.reference);
  if (!ref)
    throw UsageError("--reference: unknown role '" + o.reference + "'");
  cfg.reference_role = *ref;
  if (!(cfg.beta > 0.0))
    throw UsageError("--beta must be positive");
  return cfg;
}

/// Writes to --out when given, otherwise to `out`.
class Sink {
public:
  Sink(const std::string &path, std::ostream &fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_)
        throw std::runtime_error("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream &operator*() { return *stream_; }

private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream *stream_;
};

nlohmann::json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(0, path + ": " + e.what());
  }
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream &err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("ctpd", sink);
  log->set_pattern("[%l] %v");
  auto level = spdlog::level::warn;
  if (const char *env = std::getenv("CTPD_LOG"); env != nullptr && *env != '\0') {
    level = spdlog::level::from_str(env);
    // from_str maps unknown names to off
    if (level == spdlog::level::off && std::string_view(env) != "off")
      level = spdlog::level::warn;
  }
  log->set_level(level);
  return log;
}

// ---------------------------------------------------------------------------

int cmd_validate(const Options &o, std::ostream &out, std::ostream &err, spdlog::logger &log) {
  std::ifstream in(o.in);
  if (!in)
    throw std::runtime_error("cannot open '" + o.in + "'");
  Sink sink(o.out, out);
  std::string text;
  std::size_t line = 0, checked = 0, bad = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    ++checked;
    nlohmann::ordered_json rec;
    rec["line"] = line;
    auto violations = nlohmann::ordered_json::array();
    try {
      const auto ex = parse_example_unchecked(text, line);
      for (const auto &v : validate_example(ex)) {
        nlohmann::ordered_json j;
        j["kind"] = std::string(to_string(v.kind));
        j["where"] = v.where;
        if (v.byte)
          j["byte"] = *v.byte;
        j["detail"] = v.detail;
        violations.push_back(j);
      }
    } catch (const DataError &e) {
      violations.push_back({{"kind", "ParseError"}, {"where", ""}, {"detail", e.what()}});
    }
    rec["valid"] = violations.empty();
    rec["violations"] = violations;
    *sink << rec.dump() << '\n';
    if (!violations.empty()) {
      ++bad;
      err << "line " << line << ": " << violations.size() << " violation(s), first: "
          << violations[0]["kind"].get<std::string>() << " "
          << violations[0]["detail"].get<std::string>() << '\n';
      if (o.fail_fast)
        break;
    }
  }
  log.info("validated {} example(s), {} invalid", checked, bad);
  return bad == 0 ? kOk : kDataError;
}

int cmd_align(const Options &o, std::ostream &out, spdlog::logger &log) {
  const auto examples = load_examples(o.in);
  Sink sink(o.out, out);
  for (const auto &ex : examples) {
    nlohmann::ordered_json rec;
    rec["line"] = ex.line;
    rec["chosen"] = to_json(partition_aligned_spans(ex.chosen.teacher_trace, ex.chosen.student_trace));
    rec["rejected"] =
        to_json(partition_aligned_spans(ex.rejected.teacher_trace, ex.rejected.student_trace));
    *sink << rec.dump() << '\n';
  }
  log.info("aligned {} example(s)", examples.size());
  return kOk;
}

int cmd_weights(const Options &o, std::ostream &out, spdlog::logger &log) {
  const WeightConfig cfg = weight_config(o);
  if (cfg.strategy == WeightStrategy::random && !o.seed)
    throw UsageError("--seed is required for the random strategy");
  auto examples = load_examples(o.in);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto &ex = examples[i];
    std::optional<std::uint64_t> seed;
    if (o.seed)
      seed = CounterRng::mix(*o.seed ^ CounterRng::mix(i));
    ex.chosen.span_weights = compute_span_weights(ex.chosen, cfg, Polarity::winner, seed).values;
    ex.rejected.span_weights = compute_span_weights(ex.rejected, cfg, Polarity::loser, seed).values;
  }
  Sink sink(o.out, out);
  *sink << serialize_examples(examples);
  log.info("weighted {} example(s) with {}", examples.size(), to_string(cfg.strategy));
  return kOk;
}

std::vector<double> weights_or_unit(const ResponseBundle &b, bool unit) {
  const std::size_t n = b.partition ? b.partition->spans.size() : 0;
  if (unit || !b.span_weights)
    return std::vector<double>(n, 1.0);
  return *b.span_weights;
}

int cmd_loss_check(const Options &o, std::ostream &out, std::ostream &err,
                   spdlog::logger &log) {
  const ObjectiveConfig cfg = objective_config(o);
  const double tol = o.tol > 0.0 ? o.tol : 1e-12;
  Sink sink(o.out, out);
  double worst = 0.0;
  std::size_t count = 0;
  if (o.random > 0) {
    if (!o.seed)
      throw UsageError("--seed is required with --random");
    std::mt19937_64 gen(*o.seed);
    for (std::size_t i = 0; i < o.random; ++i) {
      auto [w, l] = random_ctpd_pair(gen);
      std::fill(w.weights.begin(), w.weights.end(), 1.0);
      std::fill(l.weights.begin(), l.weights.end(), 1.0);
      const double span_level = ctpd_loss(w.reward(), l.reward(), cfg.beta).loss;
      const double seq_w = numeric::sum(w.policy_token_lp) - numeric::sum(w.ref_span_lp);
      const double seq_l = numeric::sum(l.policy_token_lp) - numeric::sum(l.ref_span_lp);
      worst = std::max(worst, std::abs(span_level - dpo_loss(seq_w, seq_l, cfg.beta).loss));
      ++count;
    }
  } else {
    if (o.in.empty())
      throw UsageError("loss-check needs --in or --random");
    auto examples = load_examples(o.in);
    for (auto &ex : examples) {
      ensure_partition(ex.chosen);
      ensure_partition(ex.rejected);
      const auto ww = weights_or_unit(ex.chosen, o.unit_weights);
      const auto wl = weights_or_unit(ex.rejected, o.unit_weights);
      const LossOutput r = ctpd_gradient(ex, ww, wl, cfg);
      ObjectiveConfig unit = cfg;
      unit.loss_kind = LossKind::dpo;
      const CtpdSide uw = make_ctpd_side(ex.chosen, {}, unit);
      const CtpdSide ul = make_ctpd_side(ex.rejected, {}, unit);
      const double seq_w = numeric::sum(uw.policy_token_lp) - numeric::sum(uw.ref_span_lp);
      const double seq_l = numeric::sum(ul.policy_token_lp) - numeric::sum(ul.ref_span_lp);
      const double diff = std::abs(ctpd_loss(uw.reward(), ul.reward(), cfg.beta).loss -
                                   dpo_loss(seq_w, seq_l, cfg.beta).loss);
      worst = std::max(worst, diff);
      ++count;
      nlohmann::ordered_json rec;
      rec["line"] = ex.line;
      rec["loss"] = r.loss;
      rec["margin"] = r.margin;
      rec["reward_w"] = r.reward_w;
      rec["reward_l"] = r.reward_l;
      rec["unit_weight_vs_dpo"] = diff;
      *sink << rec.dump() << '\n';
    }
  }
  const bool pass = worst <= tol;
  nlohmann::ordered_json summary{{"instances", count},
                                 {"max_abs_diff_unit_vs_dpo", worst},
                                 {"tol", tol},
                                 {"pass", pass}};
  if (o.random > 0)
    *sink << summary.dump() << '\n';
  else
    log.info("{}", summary.dump());
  if (!pass)
    err << "reduction check failed: max difference " << worst << " > " << tol << '\n';
  return pass ? kOk : kDataError;
}

int cmd_grad_check(const Options &o, std::ostream &out, std::ostream &err) {
  const ObjectiveConfig cfg = objective_config(o);
  const double tol = o.tol > 0.0 ? o.tol : 1e-6;
  double worst_rel = 0.0, worst_abs = 0.0;
  std::size_t count = 0;
  if (o.random > 0 || o.in.empty()) {
    if (!o.seed)
      throw UsageError("--seed is required for random instances");
    std::mt19937_64 gen(*o.seed);
    const std::size_t n = o.random > 0 ? o.random : 200;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [w, l] = random_ctpd_pair(gen);
      const auto r = check_ctpd_gradient(w, l, cfg);
      worst_rel = std::max(worst_rel, r.max_rel_err);
      worst_abs = std::max(worst_abs, r.max_abs_err);
      ++count;
    }
  } else {
    auto examples = load_examples(o.in);
    for (auto &ex : examples) {
      ensure_partition(ex.chosen);
      ensure_partition(ex.rejected);
      const auto ww = weights_or_unit(ex.chosen, o.unit_weights);
      const auto wl = weights_or_unit(ex.rejected, o.unit_weights);
      const auto r = check_ctpd_gradient(make_ctpd_side(ex.chosen, ww, cfg),
                                         make_ctpd_side(ex.rejected, wl, cfg), cfg);
      worst_rel = std::max(worst_rel, r.max_rel_err);
      worst_abs = std::max(worst_abs, r.max_abs_err);
      ++count;
    }
  }
  const bool pass = worst_rel <= tol;
  Sink sink(o.out, out);
  nlohmann::ordered_json summary{{"instances", count},
                                 {"max_rel_err", worst_rel},
                                 {"max_abs_err", worst_abs},
                                 {"tol", tol},
                                 {"pass", pass}};
  *sink << summary.dump() << '\n';
  if (!pass)
    err << "gradient check failed: max relative error " << worst_rel << " > " << tol << '\n';
  return pass ? kOk : kDataError;
}

int cmd_bounds(const Options &o, std::ostream &out, std::ostream &err) {
  nlohmann::json spec = read_json_file(o.spec);
  if (o.seed)
    spec["seed"] = *o.seed;
  if (!spec.contains("seed"))
    throw UsageError("--seed is required when the spec has no seed");
  const auto report = theory::run_bounds_experiment(spec, o.jobs);
  Sink sink(o.out, out);
  *sink << report.dump(2) << '\n';
  if (!report["all_pass"].get<bool>()) {
    err << "bound violated in " << (report["total"].get<std::size_t>() - report["passed"].get<std::size_t>())
        << " case(s)\n";
    return kDataError;
  }
  return kOk;
}

int cmd_toy_run(const Options &o, std::ostream &out, spdlog::logger &log) {
  const auto spec = toy::parse_experiment_spec(read_json_file(o.spec));
  log.info("running '{}': {} seed(s) x {} arm(s)", spec.name, spec.seeds.size(), spec.arms.size());
  const auto report = toy::run_experiment(spec, o.jobs);
  Sink sink(o.out, out);
  *sink << report.dump(2) << '\n';
  for (const auto &[arm, acc] : report["mean_accuracy"].items())
    log.info("{}: {}", arm, acc.get<double>());
  return kOk;
}

} // namespace

int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Cross-tokenizer preference distillation tools", "ctpd"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  auto *validate = app.add_subcommand("validate-trace", "check ctpd/1 JSONL against every invariant");
  validate->add_option("--in", o.in, "input JSONL")->required()->check(CLI::ExistingFile);
  validate->add_option("--out", o.out, "report file (default stdout)");
  validate->add_flag("--fail-fast", o.fail_fast, "stop at the first invalid line");

  auto *align = app.add_subcommand("align", "print the aligned partition of every response");
  align->add_option("--in", o.in, "input JSONL")->required()->check(CLI::ExistingFile);
  align->add_option("--out", o.out, "output JSONL (default stdout)");

  auto *weights = app.add_subcommand("weights", "attach span weights to every response");
  weights->add_option("--in", o.in, "input JSONL")->required()->check(CLI::ExistingFile);
  weights->add_option("--out", o.out, "output JSONL (default stdout)");
  weights->add_option("--seed", o.seed, "seed (required by the random strategy)");
  add_weight_flags(weights, o);

  auto *loss = app.add_subcommand("loss-check", "losses per example, and the unit-weight reduction to DPO");
  loss->add_option("--in", o.in, "input JSONL")->check(CLI::ExistingFile);
  loss->add_option("--out", o.out, "output file (default stdout)");
  loss->add_option("--random", o.random, "check N random instances instead of --in");
  loss->add_option("--seed", o.seed, "seed for --random");
  loss->add_option("--tol", o.tol, "max |unit-weight loss - DPO loss| (0 means 1e-12)");
  loss->add_flag("--unit-weights", o.unit_weights, "ignore stored span weights");
  add_objective_flags(loss, o);

  auto *grad = app.add_subcommand("grad-check", "analytic gradient vs central differences");
  grad->add_option("--in", o.in, "input JSONL")->check(CLI::ExistingFile);
  grad->add_option("--out", o.out, "output file (default stdout)");
  grad->add_option("--random", o.random, "number of random instances (0 with no --in means 200)");
  grad->add_option("--seed", o.seed, "seed for random instances");
  grad->add_option("--tol", o.tol, "max relative error (0 means 1e-6)");
  grad->add_flag("--unit-weights", o.unit_weights, "ignore stored span weights");
  add_objective_flags(grad, o);

  auto *bounds = app.add_subcommand("bounds", "Monte Carlo check of the span-noise bound");
  bounds->add_option("--spec", o.spec, "bounds spec JSON")->required()->check(CLI::ExistingFile);
  bounds->add_option("--out", o.out, "report file (default stdout)");
  bounds->add_option("--seed", o.seed, "overrides the spec seed");
  bounds->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto *toy_run = app.add_subcommand("toy-run", "run a toy experiment spec");
  toy_run->add_option("--spec", o.spec, "experiment spec JSON")->required()->check(CLI::ExistingFile);
  toy_run->add_option("--out", o.out, "report file (default stdout)");
  toy_run->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  auto log = make_logger(err);
  try {
    if (validate->parsed())
      return cmd_validate(o, out, err, *log);
    if (align->parsed())
      return cmd_align(o, out, *log);
    if (weights->parsed())
      return cmd_weights(o, out, *log);
    if (loss->parsed())
      return cmd_loss_check(o, out, err, *log);
    if (grad->parsed())
      return cmd_grad_check(o, out, err);
    if (bounds->parsed())
      return cmd_bounds(o, out, err);
    if (toy_run->parsed())
      return cmd_toy_run(o, out, *log);
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const SeedRequired &e) {
    err << "usage error: --seed: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

int dispatch(int argc, char **argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
    args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

} // namespace ctpd::cli
