#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctpd/partition.hpp"
#include "ctpd/signals.hpp"
#include "ctpd/trace.hpp"

namespace ctpd {

enum class LossKind { dpo, tis_dpo_token, ctpd };
enum class ReferenceRole { teacher_ref, student_ref };

std::string_view to_string(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);
std::string_view to_string(ReferenceRole role);
std::optional<ReferenceRole> parse_reference_role(std::string_view name);

struct CtpdSide;

/// Extra differentiable term added to the loss. Gradients are with respect
/// to the policy token log-probs of each side.
struct Penalty {
  double value = 0.0;
  std::vector<double> grad_w;
  std::vector<double> grad_l;
};
using PenaltyHook = std::function<Penalty(const CtpdSide &, const CtpdSide &)>;

struct ObjectiveConfig {
  double beta = 0.1;
  LossKind loss_kind = LossKind::ctpd;
  ReferenceRole reference_role = ReferenceRole::teacher_ref;
  std::string policy_role = "policy";
  PenaltyHook penalty; // e.g. a sequence-level KL term; empty by default

  /// Name of the track holding the reference log-probs.
  std::string reference_track() const { return std::string(to_string(reference_role)); }
  void validate() const; // throws std::invalid_argument unless beta > 0
};

struct LossOutput {
  double loss = 0.0;
  double margin = 0.0; // beta * (r_w - r_l)
  double reward_w = 0.0;
  double reward_l = 0.0;
  std::vector<double> grad_policy_tokens_w;
  std::vector<double> grad_policy_tokens_l;
};

/// sum_i weights[i] * (policy_i - ref_i) over span signals.
double sequence_reward(std::span<const SpanSignal> signals,
                       std::span<const double> weights,
                       std::string_view policy_role = "policy",
                       std::string_view ref_role = "teacher_ref");

/// -log sigmoid(beta * (r_w - r_l)), via a stable softplus.
LossOutput ctpd_loss(double r_w, double r_l, double beta);

/// Plain DPO on sequence log-ratios log(pi_theta / pi_ref).
LossOutput dpo_loss(double seq_logratio_w, double seq_logratio_l, double beta);

/// Single-tokenizer token-weighted DPO.
LossOutput tis_dpo_token_loss(std::span<const double> token_logratios_w,
                              std::span<const double> token_logratios_l,
                              std::span<const double> token_weights_w,
                              std::span<const double> token_weights_l,
                              double beta);

/// sigmoid(beta * ref_margin - beta * policy_margin): the per-pair factor
/// the reference contributes to the DPO gradient.
double dpo_lambda(double ref_lr_w, double ref_lr_l, double pol_lr_w,
                  double pol_lr_l, double beta);

/// Bradley-Terry reward-model pair loss, -log sigmoid(score_w - score_l).
double rm_pair_loss(double score_w, double score_l);

/// Token-level inputs of one response for the CTPD loss: the policy's
/// student-token log-probs, the student token range of every aligned span,
/// and per-span reference log-probs and weights.
struct CtpdSide {
  std::vector<double> policy_token_lp;
  std::vector<IndexRange> span_tokens;
  std::vector<double> ref_span_lp;
  std::vector<double> weights;

  std::size_t span_count() const { return span_tokens.size(); }
  double policy_span_lp(std::size_t span) const;
  /// sum_i w_i * (policy_span_lp(i) - ref_span_lp[i])
  double reward() const;
  void check() const; // throws LengthMismatch on inconsistent sizes
};

/// Builds a side from a bundle: the policy track (student tokenizer) and
/// the reference track selected by cfg.reference_role. With
/// LossKind::dpo the weights are replaced by ones.
CtpdSide make_ctpd_side(const ResponseBundle &bundle,
                        std::span<const double> weights,
                        const ObjectiveConfig &cfg);

/// Loss, margin, rewards and the exact gradient with respect to every
/// policy token log-prob. With g = sigmoid(-margin), a winner token in span
/// i gets -beta * g * w_i and a loser token in span j gets +beta * g * w_j;
/// reference log-probs are constants.
LossOutput ctpd_gradient(const CtpdSide &winner, const CtpdSide &loser,
                         const ObjectiveConfig &cfg);

/// Convenience overload reading tracks and partitions from an example.
LossOutput ctpd_gradient(const PreferenceExample &example,
                         std::span<const double> weights_w,
                         std::span<const double> weights_l,
                         const ObjectiveConfig &cfg);

/// Loss only, recomputed from token-level inputs (used by gradient checks).
double ctpd_objective_value(const CtpdSide &winner, const CtpdSide &loser,
                            const ObjectiveConfig &cfg);

} // namespace ctpd
