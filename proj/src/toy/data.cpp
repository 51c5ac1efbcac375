#include "ctpd/toy/data.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ctpd/rng.hpp"

namespace ctpd::toy {

SeqRng::SeqRng(std::uint64_t seed) : state_(CounterRng::mix(seed)) {}

double SeqRng::uniform() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

std::size_t SeqRng::below(std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

std::size_t SeqRng::between(std::size_t lo, std::size_t hi) {
  return lo + below(hi - lo + 1);
}

ToyGrammar::ToyGrammar(const ToyTask &task) : task_(task), n_(task.alphabet.size()) {
  if (n_ < 2 || task_.successors < 1 || task_.successors >= n_)
    throw std::invalid_argument("grammar needs >= 2 symbols and 1 <= successors < symbols");
  if (task_.min_len < 1 || task_.max_len < task_.min_len)
    throw std::invalid_argument("bad response length range");
  SeqRng rng(task_.grammar_seed);
  good_.assign(n_, std::vector<double>(n_, 0.0));
  bad_successors_.resize(n_);
  for (std::size_t a = 0; a < n_; ++a) {
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n_ - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(i + 1)]);
    double total = 0.0;
    for (std::size_t s = 0; s < task_.successors; ++s) {
      good_[a][order[s]] = 0.5 + rng.uniform();
      total += good_[a][order[s]];
    }
    for (double &p : good_[a])
      p /= total;
    for (std::size_t s = task_.successors; s < n_; ++s)
      bad_successors_[a].push_back(order[s]);
    std::sort(bad_successors_[a].begin(), bad_successors_[a].end());
  }
}

std::size_t ToyGrammar::symbol(char c) const {
  const auto pos = task_.alphabet.find(c);
  if (pos == std::string::npos)
    throw std::invalid_argument(std::string("symbol '") + c + "' not in alphabet");
  return pos;
}

bool ToyGrammar::is_good(char prev, char next) const {
  return good_[symbol(prev)][symbol(next)] > 0.0;
}

char ToyGrammar::good_next(char prev, SeqRng &rng) const {
  const auto &row = good_[symbol(prev)];
  double u = rng.uniform();
  std::size_t last = 0;
  for (std::size_t j = 0; j < n_; ++j) {
    if (row[j] <= 0.0)
      continue;
    last = j;
    if (u < row[j])
      return task_.alphabet[j];
    u -= row[j];
  }
  return task_.alphabet[last];
}

char ToyGrammar::bad_next(char prev, SeqRng &rng) const {
  const auto &succ = bad_successors_[symbol(prev)];
  return task_.alphabet[succ[rng.below(succ.size())]];
}

std::string ToyGrammar::sample(char prev, std::size_t len, double bad_rate,
                               bool force_bad, SeqRng &rng,
                               std::vector<ByteSpan> *corrupted) const {
  std::string s;
  s.reserve(len);
  // Position where a corrupted segment is forced if none occurred earlier.
  const std::size_t forced_at = force_bad ? rng.between(1, std::max<std::size_t>(1, len - 1)) : len;
  bool any_bad = false;
  while (s.size() < len) {
    const bool start_bad = !s.empty() &&
                           ((bad_rate > 0.0 && rng.uniform() < bad_rate) ||
                            (!any_bad && s.size() >= forced_at));
    if (start_bad) {
      const std::size_t seg = std::min(rng.between(task_.bad_span_min, task_.bad_span_max),
                                       len - s.size());
      const std::size_t begin = s.size();
      for (std::size_t i = 0; i < seg; ++i) {
        prev = bad_next(prev, rng);
        s.push_back(prev);
      }
      if (corrupted != nullptr)
        corrupted->push_back({begin, s.size()});
      any_bad = true;
    } else {
      prev = good_next(prev, rng);
      s.push_back(prev);
    }
  }
  return s;
}

std::string ToyGrammar::sample_prompt(SeqRng &rng) const {
  const char first = task_.alphabet[rng.below(n_)];
  const std::size_t len = rng.between(task_.prompt_min, task_.prompt_max);
  std::string p(1, first);
  if (len > 1)
    p += sample(first, len - 1, 0.0, false, rng);
  return p;
}

bool ToyPreferenceSet::operator==(const ToyPreferenceSet &o) const {
  if (pairs.size() != o.pairs.size() || seed != o.seed)
    return false;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto &a = pairs[i];
    const auto &b = o.pairs[i];
    if (a.prompt != b.prompt || a.chosen != b.chosen || a.rejected != b.rejected ||
        a.noisy != b.noisy || a.corrupted_chosen != b.corrupted_chosen)
      return false;
  }
  return true;
}

ToyPreferenceSet generate_preferences(const ToyGrammar &grammar, std::size_t count,
                                      NoiseSpec noise, std::uint64_t seed) {
  const ToyTask &task = grammar.task();
  SeqRng rng(seed);
  ToyPreferenceSet set;
  set.noise = noise;
  set.seed = seed;
  set.pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ToyPair pair;
    pair.prompt = grammar.sample_prompt(rng);
    const std::size_t len = rng.between(task.min_len, task.max_len);
    pair.noisy = rng.uniform() < noise.flip_fraction;
    const char prev = pair.prompt.back();
    if (pair.noisy)
      pair.chosen = grammar.sample(prev, len, noise.bad_span_rate, true, rng,
                                   &pair.corrupted_chosen);
    else
      pair.chosen = grammar.sample(prev, len, 0.0, false, rng);
    pair.rejected = grammar.sample(prev, len, task.rejected_bad_span_rate, true, rng);
    set.pairs.push_back(std::move(pair));
  }
  return set;
}

std::vector<ToyDoc> generate_corpus(const ToyGrammar &grammar, std::size_t count,
                                    double corrupt_fraction, std::uint64_t seed) {
  const ToyTask &task = grammar.task();
  SeqRng rng(seed);
  std::vector<ToyDoc> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ToyDoc doc;
    doc.prompt = grammar.sample_prompt(rng);
    const std::size_t len = rng.between(task.min_len, task.max_len);
    const bool corrupt = rng.uniform() < corrupt_fraction;
    doc.text = grammar.sample(doc.prompt.back(), len,
                              corrupt ? task.rejected_bad_span_rate : 0.0, corrupt, rng);
    out.push_back(std::move(doc));
  }
  return out;
}

} // namespace ctpd::toy
