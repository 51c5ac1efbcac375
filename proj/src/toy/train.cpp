#include "ctpd/toy/train.hpp"

#include <cmath>
#include <stdexcept>

#include "ctpd/align.hpp"
#include "ctpd/error.hpp"
#include "ctpd/numeric.hpp"
#include "ctpd/rng.hpp"

namespace ctpd::toy {

namespace {

bool record_step(const TrainOptions &opts, std::size_t step) {
  return step == 0 || (opts.curve_every > 0 && step % opts.curve_every == 0);
}

void apply_step(ToyLM &model, const std::vector<double> &grad, double lr) {
  auto &params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i] -= lr * grad[i];
}

std::vector<EncodedSeq> encode_corpus(const ToyLM &model, const std::vector<ToyDoc> &corpus) {
  std::vector<EncodedSeq> out;
  out.reserve(corpus.size());
  for (const auto &doc : corpus)
    out.push_back(model.encode(doc.prompt, doc.text));
  return out;
}

double mle_step(const ToyLM &model, const std::vector<EncodedSeq> &seqs,
                std::vector<double> *grad) {
  const auto norms = model.row_normalizers();
  std::size_t tokens = 0;
  for (const auto &s : seqs)
    tokens += s.size();
  if (tokens == 0) {
    if (grad != nullptr)
      grad->assign(model.params().size(), 0.0);
    return 0.0;
  }
  const double scale = 1.0 / static_cast<double>(tokens);
  numeric::CompensatedSum nll;
  LogitGradient acc(model);
  for (const auto &s : seqs) {
    const auto lps = model.token_logprobs(s, norms);
    for (double lp : lps)
      nll.add(-lp);
    if (grad != nullptr)
      acc.add(s, std::vector<double>(s.size(), -scale));
  }
  if (grad != nullptr)
    *grad = acc.finish(model, norms);
  return nll.value() * scale;
}

} // namespace

double mle_loss(const ToyLM &model, const std::vector<EncodedSeq> &corpus) {
  return mle_step(model, corpus, nullptr);
}

TrainResult train_mle(ToyLM model, const std::vector<ToyDoc> &corpus,
                      const TrainOptions &opts) {
  if (!(opts.lr > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  const auto seqs = encode_corpus(model, corpus);
  TrainResult result;
  std::vector<double> grad;
  for (std::size_t step = 0; step < opts.steps; ++step) {
    const double loss = mle_step(model, seqs, &grad);
    if (record_step(opts, step))
      result.loss_curve.push_back(loss);
    apply_step(model, grad, opts.lr);
  }
  result.loss_curve.push_back(mle_loss(model, seqs));
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------

TrainResult train_dpo(ToyLM policy, const ToyLM &reference, const ToyPreferenceSet &prefs,
                      double beta, const TrainOptions &opts, bool reverse) {
  if (!(opts.lr > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("learning rate and beta must be positive");
  struct Pair {
    EncodedSeq w, l;
    double ref_w, ref_l;
  };
  std::vector<Pair> pairs;
  pairs.reserve(prefs.pairs.size());
  for (const auto &p : prefs.pairs) {
    const std::string &win = reverse ? p.rejected : p.chosen;
    const std::string &lose = reverse ? p.chosen : p.rejected;
    Pair q{policy.encode(p.prompt, win), policy.encode(p.prompt, lose), 0.0, 0.0};
    q.ref_w = numeric::sum(reference.token_logprobs(reference.encode(p.prompt, win)));
    q.ref_l = numeric::sum(reference.token_logprobs(reference.encode(p.prompt, lose)));
    pairs.push_back(std::move(q));
  }
  const double inv_n = pairs.empty() ? 0.0 : 1.0 / static_cast<double>(pairs.size());

  auto step_fn = [&](const ToyLM &model, std::vector<double> *grad) {
    const auto norms = model.row_normalizers();
    LogitGradient acc(model);
    numeric::CompensatedSum total;
    for (const auto &q : pairs) {
      const auto lw = model.token_logprobs(q.w, norms);
      const auto ll = model.token_logprobs(q.l, norms);
      const LossOutput out =
          dpo_loss(numeric::sum(lw) - q.ref_w, numeric::sum(ll) - q.ref_l, beta);
      total.add(out.loss);
      if (grad != nullptr) {
        const double g = beta * numeric::sigmoid(-out.margin) * inv_n;
        acc.add(q.w, std::vector<double>(q.w.size(), -g));
        acc.add(q.l, std::vector<double>(q.l.size(), +g));
      }
    }
    if (grad != nullptr)
      *grad = acc.finish(model, norms);
    return total.value() * inv_n;
  };

  TrainResult result;
  std::vector<double> grad;
  for (std::size_t step = 0; step < opts.steps; ++step) {
    const double loss = step_fn(policy, &grad);
    if (record_step(opts, step))
      result.loss_curve.push_back(loss);
    apply_step(policy, grad, opts.lr);
  }
  result.loss_curve.push_back(step_fn(policy, nullptr));
  result.model = std::move(policy);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

LogProbTrack make_track(const ToyLM &model, const std::string &role,
                        const std::string &side, const std::string &prompt,
                        const std::string &text, std::size_t expected_tokens) {
  LogProbTrack t{TrackRole::from_name(role), side,
                 model.token_logprobs(model.encode(prompt, text))};
  if (t.values.size() != expected_tokens)
    throw LengthMismatch("track '" + role + "' from model tokenizer '" +
                             model.tokenizer().id() + "'",
                         t.values.size(), expected_tokens);
  return t;
}

ResponseBundle make_bundle(const std::string &prompt, const std::string &text,
                           const ToyTokenizer &teacher_tok, const ToyTokenizer &student_tok,
                           const TrackSources &src) {
  ResponseBundle b;
  b.teacher_trace = teacher_tok.tokenize(text);
  b.teacher_trace.tokenizer_id = std::string(kTeacherSide);
  b.student_trace = student_tok.tokenize(text);
  b.student_trace.tokenizer_id = std::string(kStudentSide);
  const std::size_t nt = b.teacher_trace.size();
  const std::size_t ns = b.student_trace.size();
  const std::string teacher(kTeacherSide), student(kStudentSide);
  if (src.student) {
    b.tracks.push_back(make_track(*src.student, "policy", student, prompt, text, ns));
    b.tracks.push_back(make_track(*src.student, "student_ref", student, prompt, text, ns));
  }
  if (src.teacher_ref)
    b.tracks.push_back(make_track(*src.teacher_ref, "teacher_ref", teacher, prompt, text, nt));
  if (src.positive)
    b.tracks.push_back(make_track(*src.positive, "positive", teacher, prompt, text, nt));
  if (src.negative)
    b.tracks.push_back(make_track(*src.negative, "negative", teacher, prompt, text, nt));
  if (src.student_positive)
    b.tracks.push_back(
        make_track(*src.student_positive, "student_positive", student, prompt, text, ns));
  if (src.student_negative)
    b.tracks.push_back(
        make_track(*src.student_negative, "student_negative", student, prompt, text, ns));
  ensure_partition(b);
  return b;
}

} // namespace

std::vector<PreferenceExample> build_examples(const ToyPreferenceSet &prefs,
                                              const ToyTokenizer &teacher_tok,
                                              const ToyTokenizer &student_tok,
                                              const TrackSources &sources) {
  std::vector<PreferenceExample> out;
  out.reserve(prefs.pairs.size());
  for (const auto &p : prefs.pairs) {
    PreferenceExample ex;
    ex.prompt.text = p.prompt;
    ex.chosen = make_bundle(p.prompt, p.chosen, teacher_tok, student_tok, sources);
    ex.rejected = make_bundle(p.prompt, p.rejected, teacher_tok, student_tok, sources);
    out.push_back(std::move(ex));
  }
  return out;
}

void attach_weights(std::vector<PreferenceExample> &examples, const WeightConfig &cfg,
                    std::optional<std::uint64_t> seed) {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    std::optional<std::uint64_t> ex_seed;
    if (seed)
      ex_seed = CounterRng::mix(*seed ^ CounterRng::mix(i));
    auto &ex = examples[i];
    ex.chosen.span_weights = compute_span_weights(ex.chosen, cfg, Polarity::winner, ex_seed).values;
    ex.rejected.span_weights = compute_span_weights(ex.rejected, cfg, Polarity::loser, ex_seed).values;
  }
}

std::vector<PreferenceExample> precompute_weights(const ToyPreferenceSet &prefs,
                                                  const ToyLM &pos, const ToyLM &neg,
                                                  const WeightConfig &cfg,
                                                  const ToyTokenizer &student_tok) {
  if (pos.tokenizer().pieces() != neg.tokenizer().pieces())
    throw std::invalid_argument("positive and negative models must share a tokenizer");
  TrackSources src;
  src.positive = &pos;
  src.negative = &neg;
  auto examples = build_examples(prefs, pos.tokenizer(), student_tok, src);
  attach_weights(examples, cfg);
  return examples;
}

// ---------------------------------------------------------------------------

std::vector<PreparedPair> prepare_pairs(const ToyLM &student,
                                        const std::vector<PreferenceExample> &examples,
                                        const ObjectiveConfig &cfg) {
  std::vector<PreparedPair> out;
  out.reserve(examples.size());
  for (const auto &ex : examples) {
    auto side = [&](const ResponseBundle &b, const char *what) {
      std::vector<double> weights;
      if (cfg.loss_kind != LossKind::dpo) {
        if (!b.span_weights)
          throw std::invalid_argument(std::string(what) + " response has no span weights");
        weights = *b.span_weights;
      }
      // The policy track is a placeholder; training overwrites it each step.
      ResponseBundle copy = b;
      if (copy.find_track(cfg.policy_role) == nullptr)
        copy.tracks.push_back({TrackRole::from_name(cfg.policy_role),
                               std::string(kStudentSide),
                               std::vector<double>(b.student_trace.size(), 0.0)});
      return make_ctpd_side(copy, weights, cfg);
    };
    PreparedPair p{student.encode(ex.prompt.text, ex.chosen.text()),
                   student.encode(ex.prompt.text, ex.rejected.text()),
                   side(ex.chosen, "chosen"), side(ex.rejected, "rejected")};
    if (p.chosen.size() != p.side_w.policy_token_lp.size() ||
        p.rejected.size() != p.side_l.policy_token_lp.size())
      throw LengthMismatch("student encoding vs student trace", p.chosen.size(),
                           p.side_w.policy_token_lp.size());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PreparedPair> prepare_token_pairs(const ToyLM &student,
                                              const std::vector<PreferenceExample> &examples,
                                              const WeightConfig &wcfg) {
  std::vector<PreparedPair> out;
  out.reserve(examples.size());
  for (const auto &ex : examples) {
    auto side = [&](const ResponseBundle &b, Polarity polarity) {
      const auto &ref = b.track("student_ref").values;
      const auto &pos = b.track(wcfg.positive_role).values;
      const auto &neg = b.track(wcfg.negative_role).values;
      CtpdSide s;
      s.policy_token_lp.assign(ref.size(), 0.0);
      for (std::size_t t = 0; t < ref.size(); ++t) {
        s.span_tokens.push_back({t, t + 1});
        s.ref_span_lp.push_back(ref[t]);
        s.weights.push_back(contrastive_span_weight(pos[t], neg[t], wcfg, polarity));
      }
      return s;
    };
    out.push_back({student.encode(ex.prompt.text, ex.chosen.text()),
                   student.encode(ex.prompt.text, ex.rejected.text()),
                   side(ex.chosen, Polarity::winner), side(ex.rejected, Polarity::loser)});
  }
  return out;
}

namespace {

double ctpd_step(const ToyLM &model, std::vector<PreparedPair> &pairs,
                 const ObjectiveConfig &cfg, std::vector<double> *grad) {
  const auto norms = model.row_normalizers();
  const double inv_n = pairs.empty() ? 0.0 : 1.0 / static_cast<double>(pairs.size());
  LogitGradient acc(model);
  numeric::CompensatedSum total;
  for (auto &p : pairs) {
    p.side_w.policy_token_lp = model.token_logprobs(p.chosen, norms);
    p.side_l.policy_token_lp = model.token_logprobs(p.rejected, norms);
    LossOutput out = ctpd_gradient(p.side_w, p.side_l, cfg);
    total.add(out.loss);
    if (grad != nullptr) {
      for (double &g : out.grad_policy_tokens_w)
        g *= inv_n;
      for (double &g : out.grad_policy_tokens_l)
        g *= inv_n;
      acc.add(p.chosen, out.grad_policy_tokens_w);
      acc.add(p.rejected, out.grad_policy_tokens_l);
    }
  }
  if (grad != nullptr)
    *grad = acc.finish(model, norms);
  return total.value() * inv_n;
}

} // namespace

double ctpd_objective(const ToyLM &student, const std::vector<PreparedPair> &pairs,
                      const ObjectiveConfig &cfg) {
  auto work = pairs;
  return ctpd_step(student, work, cfg, nullptr);
}

std::vector<double> ctpd_param_gradient(const ToyLM &student,
                                        const std::vector<PreparedPair> &pairs,
                                        const ObjectiveConfig &cfg, double *loss) {
  auto work = pairs;
  std::vector<double> grad;
  const double l = ctpd_step(student, work, cfg, &grad);
  if (loss != nullptr)
    *loss = l;
  return grad;
}

TrainResult train_prepared(ToyLM student, const std::vector<PreparedPair> &pairs,
                           const ObjectiveConfig &cfg, const TrainOptions &opts) {
  if (!(opts.lr > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  cfg.validate();
  auto work = pairs;
  TrainResult result;
  std::vector<double> grad;
  for (std::size_t step = 0; step < opts.steps; ++step) {
    const double loss = ctpd_step(student, work, cfg, &grad);
    if (record_step(opts, step))
      result.loss_curve.push_back(loss);
    apply_step(student, grad, opts.lr);
  }
  result.loss_curve.push_back(ctpd_step(student, work, cfg, nullptr));
  result.model = std::move(student);
  return result;
}

TrainResult train_ctpd(ToyLM student, const std::vector<PreferenceExample> &examples,
                       const ObjectiveConfig &cfg, const TrainOptions &opts) {
  const auto pairs = prepare_pairs(student, examples, cfg);
  return train_prepared(std::move(student), pairs, cfg, opts);
}

double eval_preference_accuracy(const ToyLM &model, const ToyPreferenceSet &prefs) {
  if (prefs.pairs.empty())
    return 0.0;
  const auto norms = model.row_normalizers();
  double score = 0.0;
  for (const auto &p : prefs.pairs) {
    const double w = numeric::sum(model.token_logprobs(model.encode(p.prompt, p.chosen), norms));
    const double l = numeric::sum(model.token_logprobs(model.encode(p.prompt, p.rejected), norms));
    score += w > l ? 1.0 : (w == l ? 0.5 : 0.0);
  }
  return score / static_cast<double>(prefs.pairs.size());
}

} // namespace ctpd::toy
