#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ctpd/objective.hpp"
#include "ctpd/trace.hpp"
#include "ctpd/weighting.hpp"
#include "ctpd/toy/data.hpp"
#include "ctpd/toy/lm.hpp"

namespace ctpd::toy {

/// Full-batch gradient descent settings.
struct TrainOptions {
  double lr = 0.1;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::size_t curve_every = 0; // 0: record only the first and last loss
};

struct TrainResult {
  ToyLM model;
  std::vector<double> loss_curve; // loss before steps 0, every, 2*every, ... and after the last
};

double mle_loss(const ToyLM &model, const std::vector<EncodedSeq> &corpus);

/// Minimizes the mean per-token negative log-likelihood of the corpus.
TrainResult train_mle(ToyLM model, const std::vector<ToyDoc> &corpus,
                      const TrainOptions &opts);

/// Sequence-level DPO of `policy` against the frozen `reference` on the
/// preference set; `reverse` swaps chosen and rejected.
TrainResult train_dpo(ToyLM policy, const ToyLM &reference,
                      const ToyPreferenceSet &prefs, double beta,
                      const TrainOptions &opts, bool reverse = false);

/// Contrastive teacher pair member: DPO of the SFT teacher against itself
/// (positive model), or with labels swapped (negative model).
inline TrainResult train_dpo_pair(const ToyLM &teacher, const ToyPreferenceSet &prefs,
                                  double beta, const TrainOptions &opts, bool reverse) {
  return train_dpo(teacher, teacher, prefs, beta, opts, reverse);
}

/// Models whose log-probs become tracks on the exported examples.
/// Teacher-side tracks: teacher_ref, positive, negative. Student-side
/// tracks: policy and student_ref (both from `student`), student_positive,
/// student_negative.
struct TrackSources {
  const ToyLM *teacher_ref = nullptr;
  const ToyLM *positive = nullptr;
  const ToyLM *negative = nullptr;
  const ToyLM *student = nullptr;
  const ToyLM *student_positive = nullptr;
  const ToyLM *student_negative = nullptr;
};

/// Turns toy pairs into trace-model examples: both tokenizations, the
/// aligned partition and one track per supplied model.
std::vector<PreferenceExample> build_examples(const ToyPreferenceSet &prefs,
                                              const ToyTokenizer &teacher_tok,
                                              const ToyTokenizer &student_tok,
                                              const TrackSources &sources);

/// Stores winner weights on every chosen bundle and loser weights on every
/// rejected bundle. Random weights use seed mixed with the example index.
void attach_weights(std::vector<PreferenceExample> &examples, const WeightConfig &cfg,
                    std::optional<std::uint64_t> seed = std::nullopt);

/// Partition plus contrastive span weights from the positive/negative
/// teacher pair, ready for serialization as ctpd/1 JSONL.
std::vector<PreferenceExample> precompute_weights(const ToyPreferenceSet &prefs,
                                                  const ToyLM &pos, const ToyLM &neg,
                                                  const WeightConfig &cfg,
                                                  const ToyTokenizer &student_tok);

/// A preference pair as seen by the student: encoded responses plus the
/// static parts of the CTPD loss (span ranges, reference, weights).
struct PreparedPair {
  EncodedSeq chosen;
  EncodedSeq rejected;
  CtpdSide side_w;
  CtpdSide side_l;
};

/// Uses each example's span_weights (ignored for LossKind::dpo) and the
/// reference track named by cfg.reference_role.
std::vector<PreparedPair> prepare_pairs(const ToyLM &student,
                                        const std::vector<PreferenceExample> &examples,
                                        const ObjectiveConfig &cfg);

/// Single-tokenizer token-weighted pairs: every student token is its own
/// span, the reference is the student_ref track and the weights come from
/// the student-side contrastive tracks.
std::vector<PreparedPair> prepare_token_pairs(const ToyLM &student,
                                              const std::vector<PreferenceExample> &examples,
                                              const WeightConfig &wcfg);

/// Mean CTPD loss over the pairs at the current parameters.
double ctpd_objective(const ToyLM &student, const std::vector<PreparedPair> &pairs,
                      const ObjectiveConfig &cfg);

/// Gradient of ctpd_objective with respect to every logit, back-propagated
/// from ctpd_gradient through the exact log-softmax.
std::vector<double> ctpd_param_gradient(const ToyLM &student,
                                        const std::vector<PreparedPair> &pairs,
                                        const ObjectiveConfig &cfg,
                                        double *loss = nullptr);

TrainResult train_prepared(ToyLM student, const std::vector<PreparedPair> &pairs,
                           const ObjectiveConfig &cfg, const TrainOptions &opts);

/// CTPD training of the student against the precomputed teacher reference
/// and span weights carried by `examples`.
TrainResult train_ctpd(ToyLM student, const std::vector<PreferenceExample> &examples,
                       const ObjectiveConfig &cfg, const TrainOptions &opts);

/// Share of pairs where the model scores chosen above rejected; ties 0.5.
double eval_preference_accuracy(const ToyLM &model, const ToyPreferenceSet &prefs);

} // namespace ctpd::toy
