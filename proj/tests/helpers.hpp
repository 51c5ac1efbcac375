#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctpd/partition.hpp"
#include "ctpd/trace.hpp"

namespace ctpd::testing {

inline TokenizationTrace make_trace(std::string text, std::string id,
                                    std::vector<std::pair<std::size_t, std::size_t>> offsets) {
  TokenizationTrace t;
  t.doc.text = std::move(text);
  t.tokenizer_id = std::move(id);
  for (auto [s, e] : offsets)
    t.tokens.push_back({s, e});
  return t;
}

/// Random UTF-8 text mixing 1- to 4-byte codepoints.
inline std::string random_text(std::mt19937_64 &gen, std::size_t max_codepoints) {
  static const char *pieces[] = {"a", "b", " ", "x", "\xc3\xa9", "\xce\xbb", "\xe2\x82\xac",
                                 "\xe6\x97\xa5", "\xf0\x9f\x99\x82", "z", "q"};
  std::uniform_int_distribution<std::size_t> len(0, max_codepoints);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(pieces) - 1);
  std::string out;
  const std::size_t n = len(gen);
  for (std::size_t i = 0; i < n; ++i)
    out += pieces[pick(gen)];
  return out;
}

inline std::vector<std::size_t> codepoint_starts(const std::string &text) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size(); ++i)
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80)
      out.push_back(i);
  return out;
}

/// Random exact tiling of `text` cutting only at codepoint starts.
inline TokenizationTrace random_tiling(std::mt19937_64 &gen, const std::string &text,
                                       const std::string &id, double cut_rate) {
  std::bernoulli_distribution cut(cut_rate);
  TokenizationTrace t;
  t.doc.text = text;
  t.tokenizer_id = id;
  std::size_t start = 0;
  for (std::size_t b : codepoint_starts(text)) {
    if (b == 0 || !cut(gen))
      continue;
    t.tokens.push_back({start, b});
    start = b;
  }
  if (!text.empty())
    t.tokens.push_back({start, text.size()});
  return t;
}

/// Reference partition built from std::set intersection; shares no code
/// with the library's two-pointer merge.
inline AlignedPartition oracle_partition(const TokenizationTrace &a, const TokenizationTrace &b) {
  auto bounds = [](const TokenizationTrace &t) {
    std::set<std::size_t> s{0};
    for (const auto &tok : t.tokens)
      s.insert(tok.end);
    return s;
  };
  const auto sa = bounds(a), sb = bounds(b);
  std::vector<std::size_t> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  auto tokens_before = [](const TokenizationTrace &t, std::size_t byte) {
    std::size_t n = 0;
    for (const auto &tok : t.tokens)
      n += tok.end <= byte ? 1 : 0;
    return n;
  };
  AlignedPartition p;
  p.total_bytes = a.doc.text.size();
  for (std::size_t i = 0; i + 1 < common.size(); ++i) {
    const std::size_t s = common[i], e = common[i + 1];
    p.spans.push_back({s, e, {tokens_before(a, s), tokens_before(a, e)},
                       {tokens_before(b, s), tokens_before(b, e)}});
  }
  return p;
}

inline LogProbTrack make_track(const std::string &role, const std::string &side,
                               std::vector<double> values) {
  return {TrackRole::from_name(role), side, std::move(values)};
}

inline std::vector<double> random_logprobs(std::mt19937_64 &gen, std::size_t n) {
  std::uniform_real_distribution<double> lp(-10.0, 0.0);
  std::vector<double> out(n);
  for (double &v : out)
    v = lp(gen);
  return out;
}

/// Bundle over random text with random tilings and one track per role.
inline ResponseBundle random_bundle(std::mt19937_64 &gen, const std::vector<std::string> &teacher_roles,
                                    const std::vector<std::string> &student_roles) {
  ResponseBundle b;
  std::string text;
  while (text.empty())
    text = random_text(gen, 24);
  std::uniform_real_distribution<double> rate(0.1, 0.9);
  b.teacher_trace = random_tiling(gen, text, std::string(kTeacherSide), rate(gen));
  b.student_trace = random_tiling(gen, text, std::string(kStudentSide), rate(gen));
  for (const auto &r : teacher_roles)
    b.tracks.push_back(make_track(r, std::string(kTeacherSide), random_logprobs(gen, b.teacher_trace.size())));
  for (const auto &r : student_roles)
    b.tracks.push_back(make_track(r, std::string(kStudentSide), random_logprobs(gen, b.student_trace.size())));
  return b;
}

} // namespace ctpd::testing
