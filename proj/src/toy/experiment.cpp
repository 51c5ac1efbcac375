#include "ctpd/toy/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ctpd/align.hpp"
#include "ctpd/error.hpp"
#include "ctpd/gradcheck.hpp"
#include "ctpd/numeric.hpp"
#include "ctpd/parallel.hpp"
#include "ctpd/rng.hpp"
#include "ctpd/toy/train.hpp"

namespace ctpd::toy {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr Arm kAllArms[] = {Arm::dpo,     Arm::tis_dpo_token,    Arm::ctpd,
                            Arm::random,  Arm::average,          Arm::student_estimate,
                            Arm::teacher_student_estimate,       Arm::student_ref};

} // namespace

std::string_view to_string(Arm arm) {
  switch (arm) {
  case Arm::dpo:
    return "dpo";
  case Arm::tis_dpo_token:
    return "tis_dpo_token";
  case Arm::ctpd:
    return "ctpd";
  case Arm::random:
    return "random";
  case Arm::average:
    return "average";
  case Arm::student_estimate:
    return "student_estimate";
  case Arm::teacher_student_estimate:
    return "teacher_student_estimate";
  case Arm::student_ref:
    return "student_ref";
  }
  return "unknown";
}

std::optional<Arm> parse_arm(std::string_view name) {
  for (Arm a : kAllArms)
    if (to_string(a) == name)
      return a;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// spec parsing

namespace {

class Section {
public:
  Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw SpecInvalid(path_ + " must be an object");
  }

  void allow(std::initializer_list<const char *> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto &[k, v] : j_.items())
      if (!ok.contains(k))
        throw SpecInvalid("unknown key " + path_ + "." + k);
  }

  bool has(const char *key) const { return j_.contains(key); }
  Section sub(const char *key) const { return Section(j_.at(key), path_ + "." + key); }

  template <class T> void read(const char *key, T &out) const {
    if (!j_.contains(key))
      return;
    const json &v = j_.at(key);
    const std::string where = path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean())
        throw SpecInvalid(where + " must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string())
        throw SpecInvalid(where + " must be a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number())
        throw SpecInvalid(where + " must be a number");
      out = v.get<T>();
      if (!std::isfinite(out))
        throw SpecInvalid(where + " must be finite");
    } else {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw SpecInvalid(where + " must be a non-negative integer");
      out = v.get<T>();
    }
  }

  const json &raw(const char *key) const { return j_.at(key); }
  const std::string &path() const { return path_; }

private:
  const json &j_;
  std::string path_;
};

void read_model(const Section &s, ModelSpec &m) {
  s.allow({"order", "sft_docs", "sft_corrupt_fraction", "sft_steps", "sft_lr", "init_scale"});
  s.read("order", m.order);
  s.read("sft_docs", m.sft_docs);
  s.read("sft_corrupt_fraction", m.sft_corrupt_fraction);
  s.read("sft_steps", m.sft_steps);
  s.read("sft_lr", m.sft_lr);
  s.read("init_scale", m.init_scale);
  if (m.order < 1 || m.order > 6)
    throw SpecInvalid(s.path() + ".order must be in [1, 6]");
  if (!(m.sft_lr > 0.0))
    throw SpecInvalid(s.path() + ".sft_lr must be positive");
  if (m.sft_corrupt_fraction < 0.0 || m.sft_corrupt_fraction > 1.0)
    throw SpecInvalid(s.path() + ".sft_corrupt_fraction must be in [0, 1]");
}

void read_stage(const Section &s, StageSpec &st) {
  s.allow({"beta", "lr", "steps"});
  s.read("beta", st.beta);
  s.read("lr", st.lr);
  s.read("steps", st.steps);
  if (!(st.beta > 0.0) || !(st.lr > 0.0))
    throw SpecInvalid(s.path() + " needs beta > 0 and lr > 0");
}

void read_tokenizer(const Section &s, TokenizerSpec &t) {
  s.allow({"id", "merges"});
  s.read("id", t.id);
  if (s.has("merges")) {
    const json &m = s.raw("merges");
    if (!m.is_array())
      throw SpecInvalid(s.path() + ".merges must be an array of strings");
    t.merges.clear();
    for (const auto &p : m) {
      if (!p.is_string() || p.get<std::string>().empty())
        throw SpecInvalid(s.path() + ".merges must hold non-empty strings");
      t.merges.push_back(p.get<std::string>());
    }
  }
}

} // namespace

ExperimentSpec parse_experiment_spec(const json &j) {
  ExperimentSpec spec;
  const Section root(j, "spec");
  root.allow({"name", "seeds", "arms", "task", "data", "noise", "tokenizers", "teacher",
              "student", "contrastive", "weights", "objective", "curve_every",
              "grad_check_params"});
  root.read("name", spec.name);
  if (root.has("seeds")) {
    const json &s = root.raw("seeds");
    if (!s.is_array() || s.empty())
      throw SpecInvalid("spec.seeds must be a non-empty array");
    spec.seeds.clear();
    for (const auto &v : s) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw SpecInvalid("spec.seeds must hold non-negative integers");
      spec.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  if (root.has("arms")) {
    const json &a = root.raw("arms");
    if (!a.is_array() || a.empty())
      throw SpecInvalid("spec.arms must be a non-empty array");
    spec.arms.clear();
    for (const auto &v : a) {
      const auto arm = v.is_string() ? parse_arm(v.get<std::string>()) : std::nullopt;
      if (!arm)
        throw SpecInvalid("unknown arm " + v.dump());
      if (std::find(spec.arms.begin(), spec.arms.end(), *arm) != spec.arms.end())
        throw SpecInvalid("duplicate arm " + v.dump());
      spec.arms.push_back(*arm);
    }
  }
  if (root.has("task")) {
    const Section t = root.sub("task");
    t.allow({"alphabet", "grammar_seed", "successors", "min_len", "max_len", "prompt_min",
             "prompt_max", "rejected_bad_span_rate", "bad_span_min", "bad_span_max"});
    t.read("alphabet", spec.task.alphabet);
    t.read("grammar_seed", spec.task.grammar_seed);
    t.read("successors", spec.task.successors);
    t.read("min_len", spec.task.min_len);
    t.read("max_len", spec.task.max_len);
    t.read("prompt_min", spec.task.prompt_min);
    t.read("prompt_max", spec.task.prompt_max);
    t.read("rejected_bad_span_rate", spec.task.rejected_bad_span_rate);
    t.read("bad_span_min", spec.task.bad_span_min);
    t.read("bad_span_max", spec.task.bad_span_max);
  }
  if (root.has("data")) {
    const Section d = root.sub("data");
    d.allow({"train_pairs", "heldout_pairs"});
    d.read("train_pairs", spec.train_pairs);
    d.read("heldout_pairs", spec.heldout_pairs);
  }
  if (root.has("noise")) {
    const Section n = root.sub("noise");
    n.allow({"flip_fraction", "bad_span_rate"});
    n.read("flip_fraction", spec.noise.flip_fraction);
    n.read("bad_span_rate", spec.noise.bad_span_rate);
    if (spec.noise.flip_fraction < 0.0 || spec.noise.flip_fraction > 1.0)
      throw SpecInvalid("spec.noise.flip_fraction must be in [0, 1]");
  }
  if (root.has("tokenizers")) {
    const Section t = root.sub("tokenizers");
    t.allow({"teacher", "student"});
    if (t.has("teacher"))
      read_tokenizer(t.sub("teacher"), spec.teacher_tokenizer);
    if (t.has("student"))
      read_tokenizer(t.sub("student"), spec.student_tokenizer);
  }
  if (root.has("teacher"))
    read_model(root.sub("teacher"), spec.teacher);
  if (root.has("student"))
    read_model(root.sub("student"), spec.student);
  if (root.has("contrastive"))
    read_stage(root.sub("contrastive"), spec.contrastive);
  if (root.has("objective"))
    read_stage(root.sub("objective"), spec.objective);
  if (root.has("weights")) {
    const Section w = root.sub("weights");
    w.allow({"k", "mu_pos", "mu_neg", "clamp_lower", "clamp_upper", "normalize"});
    w.read("k", spec.weights.k);
    w.read("mu_pos", spec.weights.mu_pos);
    w.read("mu_neg", spec.weights.mu_neg);
    w.read("clamp_lower", spec.weights.clamp_lower);
    w.read("clamp_upper", spec.weights.clamp_upper);
    w.read("normalize", spec.weights.normalize);
    try {
      spec.weights.validate();
    } catch (const std::invalid_argument &e) {
      throw SpecInvalid(std::string("spec.weights: ") + e.what());
    }
  }
  root.read("curve_every", spec.curve_every);
  root.read("grad_check_params", spec.grad_check_params);

  if (spec.train_pairs == 0 || spec.heldout_pairs == 0)
    throw SpecInvalid("spec.data needs at least one train and one held-out pair");
  try {
    ToyGrammar check(spec.task);
  } catch (const std::invalid_argument &e) {
    throw SpecInvalid(std::string("spec.task: ") + e.what());
  }
  return spec;
}

ordered_json to_json(const ExperimentSpec &spec) {
  ordered_json j;
  j["name"] = spec.name;
  j["seeds"] = spec.seeds;
  auto arms = ordered_json::array();
  for (Arm a : spec.arms)
    arms.push_back(std::string(to_string(a)));
  j["arms"] = arms;
  const ToyTask &t = spec.task;
  j["task"] = {{"alphabet", t.alphabet},
               {"grammar_seed", t.grammar_seed},
               {"successors", t.successors},
               {"min_len", t.min_len},
               {"max_len", t.max_len},
               {"prompt_min", t.prompt_min},
               {"prompt_max", t.prompt_max},
               {"rejected_bad_span_rate", t.rejected_bad_span_rate},
               {"bad_span_min", t.bad_span_min},
               {"bad_span_max", t.bad_span_max}};
  j["data"] = {{"train_pairs", spec.train_pairs}, {"heldout_pairs", spec.heldout_pairs}};
  j["noise"] = {{"flip_fraction", spec.noise.flip_fraction},
                {"bad_span_rate", spec.noise.bad_span_rate}};
  j["tokenizers"] = {
      {"teacher", {{"id", spec.teacher_tokenizer.id}, {"merges", spec.teacher_tokenizer.merges}}},
      {"student", {{"id", spec.student_tokenizer.id}, {"merges", spec.student_tokenizer.merges}}}};
  auto model = [](const ModelSpec &m) {
    return ordered_json{{"order", m.order},
                        {"sft_docs", m.sft_docs},
                        {"sft_corrupt_fraction", m.sft_corrupt_fraction},
                        {"sft_steps", m.sft_steps},
                        {"sft_lr", m.sft_lr},
                        {"init_scale", m.init_scale}};
  };
  auto stage = [](const StageSpec &s) {
    return ordered_json{{"beta", s.beta}, {"lr", s.lr}, {"steps", s.steps}};
  };
  j["teacher"] = model(spec.teacher);
  j["student"] = model(spec.student);
  j["contrastive"] = stage(spec.contrastive);
  j["weights"] = {{"k", spec.weights.k},
                  {"mu_pos", spec.weights.mu_pos},
                  {"mu_neg", spec.weights.mu_neg},
                  {"clamp_lower", spec.weights.clamp_lower},
                  {"clamp_upper", spec.weights.clamp_upper},
                  {"normalize", spec.weights.normalize}};
  j["objective"] = stage(spec.objective);
  j["curve_every"] = spec.curve_every;
  j["grad_check_params"] = spec.grad_check_params;
  return j;
}

// ---------------------------------------------------------------------------
// running

namespace {

std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
  return CounterRng::mix(CounterRng::mix(seed) ^ tag);
}

std::vector<std::string> alphabet_pieces(const std::string &alphabet) {
  std::vector<std::string> out;
  for (char c : alphabet)
    out.emplace_back(1, c);
  return out;
}

bool needs_student_pair(const ExperimentSpec &spec) {
  for (Arm a : spec.arms)
    if (a == Arm::tis_dpo_token || a == Arm::student_estimate)
      return true;
  return false;
}

/// Everything an arm needs that does not depend on the arm.
struct SeedStage {
  std::uint64_t seed = 0;
  ToyPreferenceSet train;
  ToyPreferenceSet heldout;
  ToyLM teacher_sft;
  ToyLM student_sft;
  ToyLM teacher_pos, teacher_neg;
  ToyLM student_pos, student_neg;
  std::vector<PreferenceExample> examples;
  ordered_json info;
};

double mean_chosen_logratio(const ToyLM &model, const ToyLM &ref, const ToyPreferenceSet &prefs) {
  numeric::CompensatedSum acc;
  for (const auto &p : prefs.pairs)
    acc.add(model.sequence_logprob(p.prompt, p.chosen) - ref.sequence_logprob(p.prompt, p.chosen));
  return prefs.pairs.empty() ? 0.0 : acc.value() / static_cast<double>(prefs.pairs.size());
}

bool overlaps(const AlignedSpan &s, const std::vector<ByteSpan> &bad) {
  for (const auto &b : bad)
    if (s.byte_start < b.end && b.start < s.byte_end)
      return true;
  return false;
}

ordered_json weight_stats(const SeedStage &st, const WeightConfig &wcfg) {
  // Winner weights of noisy chosen responses, split by corrupted vs clean spans.
  numeric::CompensatedSum bad_sum, clean_sum, gap_sum;
  std::size_t bad_n = 0, clean_n = 0, responses = 0, lower = 0;
  for (std::size_t i = 0; i < st.examples.size(); ++i) {
    const ToyPair &pair = st.train.pairs[i];
    if (pair.corrupted_chosen.empty())
      continue;
    const auto &b = st.examples[i].chosen;
    const auto w = compute_span_weights(b, wcfg, Polarity::winner).values;
    double rb = 0.0, rc = 0.0;
    std::size_t nb = 0, nc = 0;
    for (std::size_t s = 0; s < w.size(); ++s) {
      if (overlaps(b.partition->spans[s], pair.corrupted_chosen)) {
        rb += w[s];
        ++nb;
      } else {
        rc += w[s];
        ++nc;
      }
    }
    bad_sum.add(rb);
    clean_sum.add(rc);
    bad_n += nb;
    clean_n += nc;
    if (nb > 0 && nc > 0) {
      const double gap = rc / static_cast<double>(nc) - rb / static_cast<double>(nb);
      gap_sum.add(gap);
      ++responses;
      lower += gap > 0.0 ? 1 : 0;
    }
  }
  ordered_json j;
  j["noisy_responses"] = responses;
  j["mean_weight_corrupted"] = bad_n ? bad_sum.value() / static_cast<double>(bad_n) : 0.0;
  j["mean_weight_clean"] = clean_n ? clean_sum.value() / static_cast<double>(clean_n) : 0.0;
  j["mean_clean_minus_corrupted"] =
      responses ? gap_sum.value() / static_cast<double>(responses) : 0.0;
  j["responses_with_lower_corrupted"] = lower;
  return j;
}

SeedStage run_seed_stage(const ExperimentSpec &spec, std::uint64_t seed,
                         const ToyGrammar &grammar, const ToyTokenizer &teacher_tok,
                         const ToyTokenizer &student_tok) {
  SeedStage st;
  st.seed = seed;
  st.train = generate_preferences(grammar, spec.train_pairs, spec.noise, derive(seed, 1));
  st.heldout = generate_preferences(grammar, spec.heldout_pairs, NoiseSpec{}, derive(seed, 2));

  auto sft = [&](const ToyTokenizer &tok, const ModelSpec &m, std::uint64_t tag) {
    ToyLM model(tok, m.order);
    model.randomize(derive(seed, tag), m.init_scale);
    const auto corpus =
        generate_corpus(grammar, m.sft_docs, m.sft_corrupt_fraction, derive(seed, tag + 1));
    return train_mle(std::move(model), corpus, {m.sft_lr, m.sft_steps, seed, 0});
  };
  auto teacher = sft(teacher_tok, spec.teacher, 10);
  auto student = sft(student_tok, spec.student, 20);
  st.teacher_sft = std::move(teacher.model);
  st.student_sft = std::move(student.model);

  const TrainOptions copts{spec.contrastive.lr, spec.contrastive.steps, seed, 0};
  st.teacher_pos = train_dpo_pair(st.teacher_sft, st.train, spec.contrastive.beta, copts, false).model;
  st.teacher_neg = train_dpo_pair(st.teacher_sft, st.train, spec.contrastive.beta, copts, true).model;
  const bool student_pair = needs_student_pair(spec);
  if (student_pair) {
    st.student_pos = train_dpo_pair(st.student_sft, st.train, spec.contrastive.beta, copts, false).model;
    st.student_neg = train_dpo_pair(st.student_sft, st.train, spec.contrastive.beta, copts, true).model;
  }

  TrackSources src;
  src.teacher_ref = &st.teacher_sft;
  src.positive = &st.teacher_pos;
  src.negative = &st.teacher_neg;
  src.student = &st.student_sft;
  if (student_pair) {
    src.student_positive = &st.student_pos;
    src.student_negative = &st.student_neg;
  }
  st.examples = build_examples(st.train, teacher_tok, student_tok, src);

  ordered_json info;
  info["seed"] = seed;
  info["teacher_sft_loss"] = teacher.loss_curve.back();
  info["student_sft_loss"] = student.loss_curve.back();
  info["teacher_sft_accuracy"] = eval_preference_accuracy(st.teacher_sft, st.heldout);
  info["student_sft_accuracy"] = eval_preference_accuracy(st.student_sft, st.heldout);
  info["teacher_pos_accuracy"] = eval_preference_accuracy(st.teacher_pos, st.heldout);
  info["teacher_neg_accuracy"] = eval_preference_accuracy(st.teacher_neg, st.heldout);
  info["teacher_pos_heldout_chosen_logratio"] =
      mean_chosen_logratio(st.teacher_pos, st.teacher_sft, st.heldout);
  info["teacher_neg_heldout_chosen_logratio"] =
      mean_chosen_logratio(st.teacher_neg, st.teacher_sft, st.heldout);
  std::size_t noisy = 0;
  for (const auto &p : st.train.pairs)
    noisy += p.noisy ? 1 : 0;
  info["noisy_train_pairs"] = noisy;
  WeightConfig wcfg = spec.weights;
  wcfg.strategy = WeightStrategy::contrastive_teacher;
  info["winner_weights"] = weight_stats(st, wcfg);
  st.info = std::move(info);
  return st;
}

struct ArmPlan {
  WeightConfig weights;
  ObjectiveConfig objective;
  bool token_level = false;
};

ArmPlan plan_for(Arm arm, const ExperimentSpec &spec) {
  ArmPlan p;
  p.weights = spec.weights;
  p.objective.beta = spec.objective.beta;
  p.objective.loss_kind = LossKind::ctpd;
  p.objective.reference_role = ReferenceRole::teacher_ref;
  switch (arm) {
  case Arm::dpo:
    p.objective.loss_kind = LossKind::dpo;
    p.objective.reference_role = ReferenceRole::student_ref;
    break;
  case Arm::tis_dpo_token:
    p.objective.loss_kind = LossKind::tis_dpo_token;
    p.objective.reference_role = ReferenceRole::student_ref;
    p.weights.positive_role = "student_positive";
    p.weights.negative_role = "student_negative";
    p.token_level = true;
    break;
  case Arm::ctpd:
    p.weights.strategy = WeightStrategy::contrastive_teacher;
    break;
  case Arm::random:
    p.weights.strategy = WeightStrategy::random;
    break;
  case Arm::average:
    p.weights.strategy = WeightStrategy::average;
    break;
  case Arm::student_estimate:
    p.weights.strategy = WeightStrategy::student_estimate;
    p.weights.positive_role = "student_positive";
    p.weights.negative_role = "student_negative";
    break;
  case Arm::teacher_student_estimate:
    p.weights.strategy = WeightStrategy::teacher_student_estimate;
    p.weights.positive_role = "teacher_ref";
    p.weights.negative_role = "student_ref";
    break;
  case Arm::student_ref:
    p.weights.strategy = WeightStrategy::contrastive_teacher;
    p.objective.reference_role = ReferenceRole::student_ref;
    break;
  }
  return p;
}

ordered_json grad_check(const ToyLM &model, const std::vector<PreparedPair> &pairs,
                        const ObjectiveConfig &cfg, std::size_t count, std::uint64_t seed) {
  const auto analytic = ctpd_param_gradient(model, pairs, cfg);
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    if (std::abs(analytic[i]) > 1e-5)
      live.push_back(i);
  ToyLM probe = model;
  const double h = 1e-4;
  double worst = 0.0;
  std::size_t checked = 0;
  SeqRng rng(seed);
  for (std::size_t n = 0; n < count && !live.empty(); ++n) {
    const std::size_t idx = live[rng.below(live.size())];
    const double saved = probe.params()[idx];
    probe.params()[idx] = saved + h;
    const double up = ctpd_objective(probe, pairs, cfg);
    probe.params()[idx] = saved - h;
    const double down = ctpd_objective(probe, pairs, cfg);
    probe.params()[idx] = saved;
    worst = std::max(worst, relative_error(analytic[idx], (up - down) / (2.0 * h)));
    ++checked;
  }
  return {{"params", checked}, {"max_rel_err", worst}};
}

ordered_json run_arm(const ExperimentSpec &spec, const SeedStage &st, Arm arm) {
  const ArmPlan plan = plan_for(arm, spec);
  std::vector<PreparedPair> pairs;
  if (plan.token_level) {
    pairs = prepare_token_pairs(st.student_sft, st.examples, plan.weights);
  } else {
    auto examples = st.examples;
    if (plan.objective.loss_kind != LossKind::dpo)
      attach_weights(examples, plan.weights, derive(st.seed, 100));
    pairs = prepare_pairs(st.student_sft, examples, plan.objective);
  }
  ordered_json run;
  run["arm"] = std::string(to_string(arm));
  run["seed"] = st.seed;
  if (spec.grad_check_params > 0)
    run["gradient_check"] = grad_check(st.student_sft, pairs, plan.objective,
                                       spec.grad_check_params, derive(st.seed, 200));
  const TrainOptions opts{spec.objective.lr, spec.objective.steps, st.seed, spec.curve_every};
  const TrainResult trained = train_prepared(st.student_sft, pairs, plan.objective, opts);
  run["accuracy"] = eval_preference_accuracy(trained.model, st.heldout);
  run["train_accuracy"] = eval_preference_accuracy(trained.model, st.train);
  run["final_loss"] = trained.loss_curve.back();
  run["loss_curve"] = trained.loss_curve;
  return run;
}

double mean_of(const std::vector<double> &xs) {
  return xs.empty() ? 0.0 : numeric::sum(xs) / static_cast<double>(xs.size());
}

} // namespace

ordered_json run_experiment(const ExperimentSpec &spec, unsigned jobs) {
  const ToyGrammar grammar(spec.task);
  const auto alphabet = alphabet_pieces(spec.task.alphabet);
  const ToyTokenizer teacher_tok(spec.teacher_tokenizer.id, spec.teacher_tokenizer.merges, alphabet);
  const ToyTokenizer student_tok(spec.student_tokenizer.id, spec.student_tokenizer.merges, alphabet);

  std::vector<SeedStage> stages(spec.seeds.size());
  parallel_for(stages.size(), jobs, [&](std::size_t i) {
    stages[i] = run_seed_stage(spec, spec.seeds[i], grammar, teacher_tok, student_tok);
  });

  const std::size_t n_arms = spec.arms.size();
  std::vector<ordered_json> runs(stages.size() * n_arms);
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    runs[i] = run_arm(spec, stages[i / n_arms], spec.arms[i % n_arms]);
  });

  // Alignment statistics over every train response.
  std::size_t spans = 0, multi = 0, teacher_tokens = 0, student_tokens = 0, max_bytes = 0;
  for (const auto &st : stages)
    for (const auto &ex : st.examples)
      for (const ResponseBundle *b : {&ex.chosen, &ex.rejected}) {
        const SpanStats s = span_count_stats(*b->partition);
        spans += s.span_count;
        multi += s.multi_token_spans;
        teacher_tokens += b->teacher_trace.size();
        student_tokens += b->student_trace.size();
        max_bytes = std::max(max_bytes, s.max_span_bytes);
      }

  ordered_json report;
  report["name"] = spec.name;
  report["spec"] = to_json(spec);
  report["alignment"] = {
      {"spans", spans},
      {"multi_token_spans", multi},
      {"multi_token_span_fraction", spans ? static_cast<double>(multi) / static_cast<double>(spans) : 0.0},
      {"mean_teacher_tokens_per_span",
       spans ? static_cast<double>(teacher_tokens) / static_cast<double>(spans) : 0.0},
      {"mean_student_tokens_per_span",
       spans ? static_cast<double>(student_tokens) / static_cast<double>(spans) : 0.0},
      {"max_span_bytes", max_bytes}};
  auto seeds = ordered_json::array();
  for (const auto &st : stages)
    seeds.push_back(st.info);
  report["seeds"] = seeds;
  report["runs"] = runs;

  ordered_json summary = ordered_json::object();
  std::vector<double> student_sft;
  for (const auto &st : stages)
    student_sft.push_back(st.info["student_sft_accuracy"].get<double>());
  summary["student_sft"] = mean_of(student_sft);
  for (std::size_t a = 0; a < n_arms; ++a) {
    std::vector<double> acc;
    for (std::size_t s = 0; s < stages.size(); ++s)
      acc.push_back(runs[s * n_arms + a]["accuracy"].get<double>());
    summary[std::string(to_string(spec.arms[a]))] = mean_of(acc);
  }
  report["mean_accuracy"] = summary;

  ordered_json orderings = ordered_json::object();
  auto has = [&](const char *k) { return summary.contains(k); };
  if (has("ctpd") && has("dpo"))
    orderings["ctpd_ge_dpo"] = summary["ctpd"].get<double>() >= summary["dpo"].get<double>();
  if (has("ctpd") && has("random"))
    orderings["ctpd_gt_random"] = summary["ctpd"].get<double>() > summary["random"].get<double>();
  if (has("ctpd") && has("student_ref"))
    orderings["teacher_ref_ge_student_ref"] =
        summary["ctpd"].get<double>() >= summary["student_ref"].get<double>();
  report["orderings"] = orderings;
  return report;
}

} // namespace ctpd::toy
