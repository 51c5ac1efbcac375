#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ctpd/partition.hpp"

namespace ctpd::toy {

/// Deterministic generator used by every toy-lab sampler. Doubles are built
/// from raw 64-bit draws so sequences do not depend on the standard
/// library's distribution implementations.
class SeqRng {
public:
  explicit SeqRng(std::uint64_t seed);
  double uniform();                            // [0, 1)
  std::size_t below(std::size_t n);            // [0, n)
  std::size_t between(std::size_t lo, std::size_t hi); // [lo, hi]

private:
  std::uint64_t state_;
};

struct ToyTask {
  std::string alphabet = "abcdefgh";
  std::uint64_t grammar_seed = 7;
  std::size_t successors = 3;  // good successors per symbol
  std::size_t min_len = 16;
  std::size_t max_len = 48;
  std::size_t prompt_min = 2;
  std::size_t prompt_max = 4;
  double rejected_bad_span_rate = 0.05;
  std::size_t bad_span_min = 2;
  std::size_t bad_span_max = 4;
};

/// First-order "good" grammar over the alphabet plus its corrupted
/// counterpart (transitions outside the good successor sets).
class ToyGrammar {
public:
  explicit ToyGrammar(const ToyTask &task);

  const ToyTask &task() const { return task_; }
  bool is_good(char prev, char next) const;
  char good_next(char prev, SeqRng &rng) const;
  char bad_next(char prev, SeqRng &rng) const;

  /// Good-grammar continuation of `prev` of length `len`, with corrupted
  /// segments started at rate `bad_rate` per position. At least one segment
  /// is inserted when `force_bad` is set. Corrupted byte ranges are appended
  /// to `corrupted`.
  std::string sample(char prev, std::size_t len, double bad_rate, bool force_bad,
                     SeqRng &rng, std::vector<ByteSpan> *corrupted = nullptr) const;
  std::string sample_prompt(SeqRng &rng) const;

private:
  ToyTask task_;
  std::size_t n_;
  std::vector<std::vector<double>> good_;  // row-stochastic
  std::vector<std::vector<std::size_t>> bad_successors_;
  std::size_t symbol(char c) const;
};

struct NoiseSpec {
  double flip_fraction = 0.0; // share of chosen responses that get corrupted spans
  double bad_span_rate = 0.0; // per-position rate of corrupted segments in those
};

struct ToyPair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  bool noisy = false;
  std::vector<ByteSpan> corrupted_chosen;
};

struct ToyPreferenceSet {
  std::vector<ToyPair> pairs;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  bool operator==(const ToyPreferenceSet &o) const;
};

struct ToyDoc {
  std::string prompt;
  std::string text;
};

/// Chosen responses follow the good grammar (noisy ones get corrupted
/// segments spliced in); rejected responses have the same length and carry
/// corrupted segments at the task's rejected rate.
ToyPreferenceSet generate_preferences(const ToyGrammar &grammar, std::size_t count,
                                      NoiseSpec noise, std::uint64_t seed);

/// Instruction-style corpus for supervised training; `corrupt_fraction` of
/// the documents carry corrupted segments.
std::vector<ToyDoc> generate_corpus(const ToyGrammar &grammar, std::size_t count,
                                    double corrupt_fraction, std::uint64_t seed);

} // namespace ctpd::toy
