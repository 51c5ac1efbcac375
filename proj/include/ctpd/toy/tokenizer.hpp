#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctpd/trace.hpp"

namespace ctpd::toy {

/// Greedy longest-match tokenizer over a fixed table of multi-byte pieces,
/// falling back to one codepoint at a time. Any UTF-8 string tokenizes to an
/// exact tiling.
class ToyTokenizer {
public:
  ToyTokenizer() = default;
  /// `alphabet` lists the single-codepoint pieces that belong to the
  /// vocabulary; pieces are numbered merges first, then alphabet.
  ToyTokenizer(std::string id, std::vector<std::string> merges,
               std::vector<std::string> alphabet);

  const std::string &id() const { return id_; }
  const std::vector<std::string> &merges() const { return merges_; }
  const std::vector<std::string> &pieces() const { return pieces_; }
  std::size_t vocab_size() const { return pieces_.size(); }

  TokenizationTrace tokenize(std::string_view text) const;

  /// Piece id of every token; throws std::out_of_range for a piece outside
  /// the vocabulary.
  std::vector<int> encode(std::string_view text) const;
  int piece_id(std::string_view piece) const;

private:
  std::string id_;
  std::vector<std::string> merges_; // longest first
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

inline TokenizationTrace toy_tokenize(const ToyTokenizer &tok, std::string_view text) {
  return tok.tokenize(text);
}

} // namespace ctpd::toy
