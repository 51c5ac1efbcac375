#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ctpd/toy/tokenizer.hpp"

namespace ctpd::toy {

/// Response tokens of one sequence as (context row, next piece) pairs.
struct EncodedSeq {
  std::vector<std::uint32_t> ctx;
  std::vector<std::uint32_t> next;

  std::size_t size() const { return next.size(); }
};

/// Tabular order-m softmax language model: one logit row per window of the
/// last m piece ids (left-padded with a BOS id), one column per piece.
class ToyLM {
public:
  ToyLM() = default;
  ToyLM(ToyTokenizer tokenizer, int order);

  const ToyTokenizer &tokenizer() const { return tokenizer_; }
  int order() const { return order_; }
  std::size_t vocab_size() const { return vocab_; }
  std::size_t context_count() const { return contexts_; }

  std::vector<double> &params() { return logits_; }
  const std::vector<double> &params() const { return logits_; }
  std::span<const double> row(std::size_t ctx) const {
    return {logits_.data() + ctx * vocab_, vocab_};
  }

  /// Adds scale * U(-1, 1) seeded noise to every logit.
  void randomize(std::uint64_t seed, double scale);

  /// Tokenizes prompt and response separately; only response tokens are
  /// scored, with the prompt supplying the initial context.
  EncodedSeq encode(std::string_view prompt, std::string_view response) const;

  /// log-sum-exp of every row.
  std::vector<double> row_normalizers() const;
  std::vector<double> token_logprobs(const EncodedSeq &seq) const;
  std::vector<double> token_logprobs(const EncodedSeq &seq,
                                     std::span<const double> normalizers) const;
  double sequence_logprob(std::string_view prompt, std::string_view response) const;

  bool operator==(const ToyLM &other) const { return logits_ == other.logits_; }

private:
  ToyTokenizer tokenizer_;
  int order_ = 0;
  std::size_t vocab_ = 0;
  std::size_t contexts_ = 0;
  std::vector<double> logits_;
};

/// Accumulates d(loss)/d(logits) from per-token d(loss)/d(log-prob),
/// using d lp(c, y) / d z(c, j) = [j == y] - softmax(z_c)_j.
class LogitGradient {
public:
  explicit LogitGradient(const ToyLM &model);

  void add(const EncodedSeq &seq, std::span<const double> dlp);
  /// Gradient over the full parameter vector.
  std::vector<double> finish(const ToyLM &model,
                             std::span<const double> normalizers) const;

private:
  std::size_t vocab_;
  std::vector<double> direct_;
  std::vector<double> row_total_;
};

} // namespace ctpd::toy
