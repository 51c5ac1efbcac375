#include "ctpd/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "ctpd/align.hpp"
#include "ctpd/error.hpp"
#include "ctpd/numeric.hpp"

namespace ctpd {

std::string_view to_string(LossKind kind) {
  switch (kind) {
  case LossKind::dpo:
    return "dpo";
  case LossKind::tis_dpo_token:
    return "tis_dpo_token";
  case LossKind::ctpd:
    return "ctpd";
  }
  return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  for (auto k : {LossKind::dpo, LossKind::tis_dpo_token, LossKind::ctpd})
    if (to_string(k) == name)
      return k;
  return std::nullopt;
}

std::string_view to_string(ReferenceRole role) {
  return role == ReferenceRole::teacher_ref ? "teacher_ref" : "student_ref";
}

std::optional<ReferenceRole> parse_reference_role(std::string_view name) {
  if (name == "teacher_ref")
    return ReferenceRole::teacher_ref;
  if (name == "student_ref")
    return ReferenceRole::student_ref;
  return std::nullopt;
}

void ObjectiveConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("beta must be positive");
}

double sequence_reward(std::span<const SpanSignal> signals,
                       std::span<const double> weights,
                       std::string_view policy_role, std::string_view ref_role) {
  if (weights.size() != signals.size())
    throw LengthMismatch("span weights", weights.size(), signals.size());
  numeric::CompensatedSum acc;
  for (std::size_t i = 0; i < signals.size(); ++i)
    acc.add(weights[i] *
            span_reward(signals[i].at(policy_role), signals[i].at(ref_role)));
  return acc.value();
}

LossOutput ctpd_loss(double r_w, double r_l, double beta) {
  LossOutput out;
  out.reward_w = r_w;
  out.reward_l = r_l;
  out.margin = beta * (r_w - r_l);
  out.loss = numeric::neg_log_sigmoid(out.margin);
  return out;
}

LossOutput dpo_loss(double seq_logratio_w, double seq_logratio_l, double beta) {
  return ctpd_loss(seq_logratio_w, seq_logratio_l, beta);
}

namespace {

double weighted_sum(std::span<const double> values, std::span<const double> weights,
                    const char *what) {
  if (values.size() != weights.size())
    throw LengthMismatch(what, weights.size(), values.size());
  numeric::CompensatedSum acc;
  for (std::size_t i = 0; i < values.size(); ++i)
    acc.add(weights[i] * values[i]);
  return acc.value();
}

} // namespace

LossOutput tis_dpo_token_loss(std::span<const double> token_logratios_w,
                              std::span<const double> token_logratios_l,
                              std::span<const double> token_weights_w,
                              std::span<const double> token_weights_l,
                              double beta) {
  return ctpd_loss(weighted_sum(token_logratios_w, token_weights_w, "winner token weights"),
                   weighted_sum(token_logratios_l, token_weights_l, "loser token weights"),
                   beta);
}

double dpo_lambda(double ref_lr_w, double ref_lr_l, double pol_lr_w,
                  double pol_lr_l, double beta) {
  return numeric::sigmoid(beta * (ref_lr_w - ref_lr_l) - beta * (pol_lr_w - pol_lr_l));
}

double rm_pair_loss(double score_w, double score_l) {
  return numeric::neg_log_sigmoid(score_w - score_l);
}

// ---------------------------------------------------------------------------

double CtpdSide::policy_span_lp(std::size_t span) const {
  const IndexRange r = span_tokens[span];
  double acc = 0.0;
  for (std::size_t t = r.begin; t < r.end; ++t)
    acc += policy_token_lp[t];
  return acc;
}

double CtpdSide::reward() const {
  numeric::CompensatedSum acc;
  for (std::size_t i = 0; i < span_tokens.size(); ++i)
    acc.add(weights[i] * span_reward(policy_span_lp(i), ref_span_lp[i]));
  return acc.value();
}

void CtpdSide::check() const {
  if (ref_span_lp.size() != span_tokens.size())
    throw LengthMismatch("reference span log-probs", ref_span_lp.size(), span_tokens.size());
  if (weights.size() != span_tokens.size())
    throw LengthMismatch("span weights", weights.size(), span_tokens.size());
  for (const auto &r : span_tokens)
    if (r.end > policy_token_lp.size() || r.begin > r.end)
      throw LengthMismatch("policy token log-probs", policy_token_lp.size(), r.end);
}

CtpdSide make_ctpd_side(const ResponseBundle &bundle,
                        std::span<const double> weights,
                        const ObjectiveConfig &cfg) {
  AlignedPartition local;
  const AlignedPartition *partition = nullptr;
  if (bundle.partition) {
    partition = &*bundle.partition;
  } else {
    local = partition_aligned_spans(bundle.teacher_trace, bundle.student_trace);
    partition = &local;
  }
  const LogProbTrack &policy = bundle.track(cfg.policy_role);
  if (policy.tokenizer_id != partition->student_id)
    throw MissingTrack(cfg.policy_role + " (" + partition->student_id + " side)");
  const LogProbTrack &ref = bundle.track(cfg.reference_track());

  CtpdSide side;
  side.policy_token_lp = policy.values;
  side.span_tokens.reserve(partition->spans.size());
  for (const auto &s : partition->spans)
    side.span_tokens.push_back(s.student_tokens);
  side.ref_span_lp = span_logprobs(ref, *partition);
  if (cfg.loss_kind == LossKind::dpo) {
    side.weights.assign(partition->spans.size(), 1.0);
  } else {
    if (weights.size() != partition->spans.size())
      throw LengthMismatch("span weights", weights.size(), partition->spans.size());
    side.weights.assign(weights.begin(), weights.end());
  }
  side.check();
  return side;
}

LossOutput ctpd_gradient(const CtpdSide &winner, const CtpdSide &loser,
                         const ObjectiveConfig &cfg) {
  cfg.validate();
  winner.check();
  loser.check();
  LossOutput out = ctpd_loss(winner.reward(), loser.reward(), cfg.beta);
  // dL/dr_w = -beta * sigmoid(-margin), dL/dr_l = +beta * sigmoid(-margin)
  const double scale = cfg.beta * numeric::sigmoid(-out.margin);

  auto fill = [scale](const CtpdSide &side, double sign, std::vector<double> &grad) {
    grad.assign(side.policy_token_lp.size(), 0.0);
    for (std::size_t i = 0; i < side.span_tokens.size(); ++i) {
      const double g = sign * scale * side.weights[i];
      for (std::size_t t = side.span_tokens[i].begin; t < side.span_tokens[i].end; ++t)
        grad[t] += g;
    }
  };
  fill(winner, -1.0, out.grad_policy_tokens_w);
  fill(loser, +1.0, out.grad_policy_tokens_l);

  if (cfg.penalty) {
    const Penalty p = cfg.penalty(winner, loser);
    out.loss += p.value;
    for (std::size_t t = 0; t < p.grad_w.size() && t < out.grad_policy_tokens_w.size(); ++t)
      out.grad_policy_tokens_w[t] += p.grad_w[t];
    for (std::size_t t = 0; t < p.grad_l.size() && t < out.grad_policy_tokens_l.size(); ++t)
      out.grad_policy_tokens_l[t] += p.grad_l[t];
  }
  return out;
}

LossOutput ctpd_gradient(const PreferenceExample &example,
                         std::span<const double> weights_w,
                         std::span<const double> weights_l,
                         const ObjectiveConfig &cfg) {
  return ctpd_gradient(make_ctpd_side(example.chosen, weights_w, cfg),
                       make_ctpd_side(example.rejected, weights_l, cfg), cfg);
}

double ctpd_objective_value(const CtpdSide &winner, const CtpdSide &loser,
                            const ObjectiveConfig &cfg) {
  double value = ctpd_loss(winner.reward(), loser.reward(), cfg.beta).loss;
  if (cfg.penalty)
    value += cfg.penalty(winner, loser).value;
  return value;
}

} // namespace ctpd
