#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctpd/weighting.hpp"
#include "ctpd/toy/data.hpp"

namespace ctpd::toy {

/// Student training arms. Every arm except dpo and tis_dpo_token trains the
/// student with the span-level loss on the heterogeneous tokenizer pair.
enum class Arm {
  dpo,                      // sequence DPO, SFT student as reference
  tis_dpo_token,            // token-weighted DPO on the student tokenizer only
  ctpd,                     // contrastive teacher weights, teacher reference
  random,                   // random weights, teacher reference
  average,                  // teacher weights divided by student tokens per span
  student_estimate,         // weights from a student contrastive pair
  teacher_student_estimate, // weights from teacher_ref vs student_ref
  student_ref,              // contrastive teacher weights, student reference
};

std::string_view to_string(Arm arm);
std::optional<Arm> parse_arm(std::string_view name);

struct TokenizerSpec {
  std::string id;
  std::vector<std::string> merges;
};

struct ModelSpec {
  int order = 2;
  std::size_t sft_docs = 256;
  double sft_corrupt_fraction = 0.0;
  std::size_t sft_steps = 300;
  double sft_lr = 0.5;
  double init_scale = 0.01;
};

struct StageSpec {
  double beta = 0.1;
  double lr = 0.5;
  std::size_t steps = 300;
};

struct ExperimentSpec {
  std::string name = "toy";
  std::vector<std::uint64_t> seeds{1};
  std::vector<Arm> arms{Arm::dpo, Arm::ctpd};
  ToyTask task;
  std::size_t train_pairs = 256;
  std::size_t heldout_pairs = 64;
  NoiseSpec noise;
  TokenizerSpec teacher_tokenizer{"teacher_toy", {}};
  TokenizerSpec student_tokenizer{"student_toy", {}};
  ModelSpec teacher{3};
  ModelSpec student{2};
  StageSpec contrastive{0.3, 0.5, 300};
  WeightConfig weights;
  StageSpec objective{0.1, 0.5, 300};
  std::size_t curve_every = 50;
  std::size_t grad_check_params = 20;
};

/// Throws SpecInvalid naming the offending key.
ExperimentSpec parse_experiment_spec(const nlohmann::json &j);
nlohmann::ordered_json to_json(const ExperimentSpec &spec);

/// Runs every (seed, arm) and returns the report. Seeds and arms run on up to
/// `jobs` threads; the report is identical for any `jobs`.
nlohmann::ordered_json run_experiment(const ExperimentSpec &spec, unsigned jobs = 1);

} // namespace ctpd::toy
