#include "ctpd/toy/lm.hpp"

#include <cmath>
#include <stdexcept>

#include "ctpd/numeric.hpp"
#include "ctpd/rng.hpp"

namespace ctpd::toy {

ToyLM::ToyLM(ToyTokenizer tokenizer, int order)
    : tokenizer_(std::move(tokenizer)), order_(order) {
  if (order_ < 1)
    throw std::invalid_argument("model order must be >= 1");
  vocab_ = tokenizer_.vocab_size();
  if (vocab_ == 0)
    throw std::invalid_argument("tokenizer has an empty vocabulary");
  contexts_ = 1;
  for (int i = 0; i < order_; ++i) {
    contexts_ *= vocab_ + 1;
    if (contexts_ > 4'000'000)
      throw std::invalid_argument("logit table too large");
  }
  logits_.assign(contexts_ * vocab_, 0.0);
}

void ToyLM::randomize(std::uint64_t seed, double scale) {
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < logits_.size(); ++i)
    logits_[i] += scale * rng.uniform_open(i, -1.0, 1.0);
}

EncodedSeq ToyLM::encode(std::string_view prompt, std::string_view response) const {
  const auto prompt_ids = tokenizer_.encode(prompt);
  const auto ids = tokenizer_.encode(response);
  const auto bos = static_cast<std::uint32_t>(vocab_);
  std::vector<std::uint32_t> history(static_cast<std::size_t>(order_), bos);
  auto push = [&history](std::uint32_t id) {
    history.erase(history.begin());
    history.push_back(id);
  };
  auto context = [&] {
    std::size_t idx = 0;
    for (auto h : history)
      idx = idx * (vocab_ + 1) + h;
    return static_cast<std::uint32_t>(idx);
  };
  for (int id : prompt_ids)
    push(static_cast<std::uint32_t>(id));
  EncodedSeq seq;
  seq.ctx.reserve(ids.size());
  seq.next.reserve(ids.size());
  for (int id : ids) {
    seq.ctx.push_back(context());
    seq.next.push_back(static_cast<std::uint32_t>(id));
    push(static_cast<std::uint32_t>(id));
  }
  return seq;
}

std::vector<double> ToyLM::row_normalizers() const {
  std::vector<double> out(contexts_);
  for (std::size_t c = 0; c < contexts_; ++c)
    out[c] = numeric::log_sum_exp(row(c));
  return out;
}

std::vector<double> ToyLM::token_logprobs(const EncodedSeq &seq,
                                          std::span<const double> normalizers) const {
  std::vector<double> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t)
    out[t] = logits_[seq.ctx[t] * vocab_ + seq.next[t]] - normalizers[seq.ctx[t]];
  return out;
}

std::vector<double> ToyLM::token_logprobs(const EncodedSeq &seq) const {
  std::vector<double> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t)
    out[t] = logits_[seq.ctx[t] * vocab_ + seq.next[t]] -
             numeric::log_sum_exp(row(seq.ctx[t]));
  return out;
}

double ToyLM::sequence_logprob(std::string_view prompt, std::string_view response) const {
  const auto lps = token_logprobs(encode(prompt, response));
  return numeric::sum(lps);
}

LogitGradient::LogitGradient(const ToyLM &model)
    : vocab_(model.vocab_size()), direct_(model.params().size(), 0.0),
      row_total_(model.context_count(), 0.0) {}

void LogitGradient::add(const EncodedSeq &seq, std::span<const double> dlp) {
  for (std::size_t t = 0; t < seq.size(); ++t) {
    direct_[seq.ctx[t] * vocab_ + seq.next[t]] += dlp[t];
    row_total_[seq.ctx[t]] += dlp[t];
  }
}

std::vector<double> LogitGradient::finish(const ToyLM &model,
                                          std::span<const double> normalizers) const {
  std::vector<double> grad = direct_;
  for (std::size_t c = 0; c < row_total_.size(); ++c) {
    const double total = row_total_[c];
    if (total == 0.0)
      continue;
    const auto r = model.row(c);
    for (std::size_t j = 0; j < vocab_; ++j)
      grad[c * vocab_ + j] -= total * std::exp(r[j] - normalizers[c]);
  }
  return grad;
}

} // namespace ctpd::toy
