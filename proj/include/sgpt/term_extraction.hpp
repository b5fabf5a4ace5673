//  Copyright 2026 The SGPT Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

// Lexicon-driven aspect/sentiment tagging and one-to-one pair matching
// inside a sentence.

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgpt/common.hpp"
#include "sgpt/corpus.hpp"

namespace sgpt {

enum class TermKind : std::uint8_t { kAspect = 0, kSentiment = 1 };

inline std::string_view to_string(TermKind k) { return k == TermKind::kAspect ? "aspect" : "sentiment"; }

inline TermKind parse_term_kind(std::string_view s) {
  if (s == "aspect") return TermKind::kAspect;
  if (s == "sentiment") return TermKind::kSentiment;
  throw InvalidArgument("unknown term kind '" + std::string(s) + "'");
}

struct TermSpan {
  std::size_t sentence_ref = 0;
  std::size_t first = 0;  // inclusive token range
  std::size_t last = 0;
  TermKind kind = TermKind::kAspect;
  std::string text;  // normalized words joined by a single space

  std::size_t length() const { return last - first + 1; }
  bool operator==(const TermSpan&) const = default;
};

struct AspectSentimentPair {
  TermSpan aspect;
  TermSpan sentiment;
  std::size_t distance = 0;
};

/// Number of tokens strictly between two non-overlapping spans.
inline std::size_t token_gap(const TermSpan& a, const TermSpan& b) {
  if (a.last < b.first) return b.first - a.last - 1;
  if (b.last < a.first) return a.first - b.last - 1;
  return 0;
}

inline std::string join_words(const std::vector<std::string>& words, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out += ' ';
    out += words[i];
  }
  return out;
}

/// Aspect and sentiment phrases keyed by their normalized word sequence.
class Lexicon {
 public:
  void add(std::string_view phrase, TermKind kind, std::size_t line = 0) {
    auto words = normalized_words(phrase);
    if (words.empty()) throw ParseError("empty lexicon entry", line);
    auto key = join_words(words, 0, words.size());
    auto [it, inserted] = entries_.emplace(key, kind);
    if (!inserted && it->second != kind) {
      throw ParseError("'" + key + "' is listed as both aspect and sentiment", line);
    }
    max_words_ = std::max(max_words_, words.size());
  }

  static Lexicon from_sets(const std::set<std::string>& aspects, const std::set<std::string>& sentiments) {
    if (aspects.empty() || sentiments.empty()) throw InvalidArgument("lexicons must be non-empty");
    Lexicon lex;
    for (const auto& a : aspects) lex.add(a, TermKind::kAspect);
    for (const auto& s : sentiments) lex.add(s, TermKind::kSentiment);
    return lex;
  }

  /// TSV rows `word_or_phrase \t kind`; blank lines and `#` comments skipped.
  static Lexicon from_tsv(std::string_view text) {
    Lexicon lex;
    std::size_t line_no = 0;
    for (const auto& raw : split_lines(text)) {
      ++line_no;
      auto line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) throw ParseError("lexicon row must be 'phrase<TAB>kind'", line_no);
      TermKind kind;
      try {
        kind = parse_term_kind(trim(cols[1]));
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), line_no);
      }
      lex.add(cols[0], kind, line_no);
    }
    if (lex.count(TermKind::kAspect) == 0 || lex.count(TermKind::kSentiment) == 0) {
      throw ParseError("lexicon needs at least one aspect and one sentiment entry", 0);
    }
    return lex;
  }

  static Lexicon load(const std::filesystem::path& path) { return from_tsv(read_file(path)); }

  std::optional<TermKind> find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t count(TermKind kind) const {
    std::size_t n = 0;
    for (const auto& [k, v] : entries_) n += v == kind;
    return n;
  }
  std::size_t max_words() const { return max_words_; }
  const std::map<std::string, TermKind>& entries() const { return entries_; }

 private:
  std::map<std::string, TermKind> entries_;
  std::size_t max_words_ = 0;
};

/// Left-to-right, longest-match-first lexicon tagging. Returned spans never
/// overlap, whatever their kind.
inline std::vector<TermSpan> tag_terms(const Sentence& sentence, const Lexicon& lexicon,
                                       std::size_t sentence_ref = 0) {
  std::vector<std::string> words;
  words.reserve(sentence.tokens.size());
  for (const auto& t : sentence.tokens) words.push_back(t.normalized);

  std::vector<TermSpan> out;
  std::size_t i = 0;
  while (i < words.size()) {
    const std::size_t longest = std::min(lexicon.max_words(), words.size() - i);
    bool matched = false;
    for (std::size_t len = longest; len >= 1; --len) {
      auto key = join_words(words, i, i + len);
      if (auto kind = lexicon.find(key)) {
        out.push_back({sentence_ref, i, i + len - 1, *kind, std::move(key)});
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

namespace detail {

// Min-cost assignment of every row to a distinct column (rows <= cols),
// potentials-based Hungarian method. Returns the column of each row.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<std::int64_t>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost[0].size();
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(m + 1, 0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// One-to-one aspect/sentiment matching within a sentence.
///
/// Pairs as many spans as the smaller side allows while minimizing the total
/// token gap. Among equally short matchings the one using the leftmost
/// sentiment spans wins, then the one using the leftmost aspect spans.
/// Output is ordered by sentiment position.
inline std::vector<AspectSentimentPair> match_pairs(const std::vector<TermSpan>& spans) {
  std::vector<const TermSpan*> aspects, sentiments;
  for (const auto& s : spans) {
    if (s.sentence_ref != spans.front().sentence_ref) {
      throw InvalidArgument("match_pairs: spans come from different sentences");
    }
    (s.kind == TermKind::kAspect ? aspects : sentiments).push_back(&s);
  }
  if (aspects.empty() || sentiments.empty()) return {};
  auto by_pos = [](const TermSpan* a, const TermSpan* b) { return a->first < b->first; };
  std::sort(aspects.begin(), aspects.end(), by_pos);
  std::sort(sentiments.begin(), sentiments.end(), by_pos);
  if (aspects.size() >= 1000 || sentiments.size() >= 1000) {
    throw InvalidArgument("match_pairs: too many spans in one sentence");
  }

  // Lexicographic (gap, sentiment index, aspect index) packed into an int64.
  constexpr std::int64_t kTier = std::int64_t{1} << 20;
  const bool rows_are_sentiments = sentiments.size() <= aspects.size();
  const auto& rows = rows_are_sentiments ? sentiments : aspects;
  const auto& cols = rows_are_sentiments ? aspects : sentiments;
  std::vector<std::vector<std::int64_t>> cost(rows.size(), std::vector<std::int64_t>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::size_t si = rows_are_sentiments ? r : c;
      const std::size_t ai = rows_are_sentiments ? c : r;
      const auto gap = static_cast<std::int64_t>(token_gap(*rows[r], *cols[c]));
      cost[r][c] = gap * kTier * kTier + static_cast<std::int64_t>(si) * kTier + static_cast<std::int64_t>(ai);
    }
  }
  const auto assign = detail::min_cost_assignment(cost);

  std::vector<AspectSentimentPair> pairs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const TermSpan* s = rows_are_sentiments ? rows[r] : cols[assign[r]];
    const TermSpan* a = rows_are_sentiments ? cols[assign[r]] : rows[r];
    pairs.push_back({*a, *s, token_gap(*a, *s)});
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& x, const auto& y) { return x.sentiment.first < y.sentiment.first; });
  return pairs;
}

}  // namespace sgpt
