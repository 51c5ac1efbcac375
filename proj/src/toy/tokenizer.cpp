#include "ctpd/toy/tokenizer.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctpd::toy {

namespace {

std::size_t codepoint_len(unsigned char lead) {
  if (lead < 0x80)
    return 1;
  if ((lead & 0xE0) == 0xC0)
    return 2;
  if ((lead & 0xF0) == 0xE0)
    return 3;
  if ((lead & 0xF8) == 0xF0)
    return 4;
  return 1;
}

} // namespace

ToyTokenizer::ToyTokenizer(std::string id, std::vector<std::string> merges,
                           std::vector<std::string> alphabet)
    : id_(std::move(id)), merges_(std::move(merges)) {
  std::erase_if(merges_, [](const std::string &m) { return m.empty(); });
  for (const auto &piece : merges_)
    if (!index_.contains(piece)) {
      index_.emplace(piece, static_cast<int>(pieces_.size()));
      pieces_.push_back(piece);
    }
  for (const auto &piece : alphabet)
    if (!piece.empty() && !index_.contains(piece)) {
      index_.emplace(piece, static_cast<int>(pieces_.size()));
      pieces_.push_back(piece);
    }
  std::stable_sort(merges_.begin(), merges_.end(),
                   [](const std::string &a, const std::string &b) {
                     return a.size() > b.size();
                   });
}

TokenizationTrace ToyTokenizer::tokenize(std::string_view text) const {
  TokenizationTrace trace;
  trace.doc.text = std::string(text);
  trace.tokenizer_id = id_;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 0;
    for (const auto &m : merges_)
      if (text.substr(pos, m.size()) == m) {
        len = m.size();
        break;
      }
    if (len == 0)
      len = std::min(codepoint_len(static_cast<unsigned char>(text[pos])),
                     text.size() - pos);
    trace.tokens.push_back({pos, pos + len});
    pos += len;
  }
  return trace;
}

int ToyTokenizer::piece_id(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end())
    throw std::out_of_range("piece '" + std::string(piece) + "' is not in the " +
                            id_ + " vocabulary");
  return it->second;
}

std::vector<int> ToyTokenizer::encode(std::string_view text) const {
  const auto trace = tokenize(text);
  std::vector<int> ids;
  ids.reserve(trace.tokens.size());
  for (const auto &t : trace.tokens)
    ids.push_back(piece_id(text.substr(t.start, t.size())));
  return ids;
}

} // namespace ctpd::toy
