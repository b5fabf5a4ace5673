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

// Review ingestion: sentence splitting, word-level tokenization, vocabulary
// and the corpus word frequency table.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sgpt/common.hpp"

namespace sgpt {

using TokenId = std::int32_t;

/// Reserved vocabulary ids. Every Vocab starts with these five entries.
namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kCls = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kMask = 4;
inline constexpr TokenId kCount = 5;
inline constexpr std::array<std::string_view, 5> kNames = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}  // namespace special

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  bool operator==(const CharSpan&) const = default;
};

struct Token {
  std::string surface;     // exact bytes of the source text
  std::string normalized;  // lowercased surface, the vocabulary key
  TokenId id = special::kUnk;
  CharSpan char_span;
};

struct Sentence {
  std::string text;
  std::vector<Token> tokens;
  std::size_t doc_id = 0;  // 1-based source line number

  std::size_t size() const { return tokens.size(); }
  std::vector<TokenId> ids() const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.id);
    return out;
  }
};

/// Word -> occurrence count over a corpus (normalized forms).
struct FrequencyTable {
  std::map<std::string, std::uint64_t> counts;

  std::uint64_t count(const std::string& word) const {
    auto it = counts.find(word);
    return it == counts.end() ? 0 : it->second;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& [w, c] : counts) s += c;
    return s;
  }
  bool empty() const { return counts.empty(); }
};

class Vocab {
 public:
  Vocab() {
    for (auto name : special::kNames) add(std::string(name), 0);
  }

  /// Words ordered by descending count, then lexicographically.
  static Vocab from_frequencies(const FrequencyTable& table) {
    std::vector<std::pair<std::string, std::uint64_t>> entries(table.counts.begin(), table.counts.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (auto& [w, c] : entries) v.add(w, c);
    return v;
  }

  TokenId id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? special::kUnk : it->second;
  }
  bool contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }
  const std::string& word(TokenId id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::uint64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return words_.size(); }

  std::string to_tsv() const {
    std::string out;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      out += words_[i];
      out += '\t';
      out += std::to_string(i);
      out += '\t';
      out += std::to_string(counts_[i]);
      out += '\n';
    }
    return out;
  }

  static Vocab from_tsv(std::string_view text) {
    Vocab v;
    v.words_.clear();
    v.counts_.clear();
    v.index_.clear();
    std::size_t line_no = 0;
    for (const auto& line : split_lines(text)) {
      ++line_no;
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 3) throw ParseError("vocab row must have 3 columns", line_no);
      std::size_t id = 0;
      std::uint64_t count = 0;
      try {
        id = std::stoul(cols[1]);
        count = std::stoull(cols[2]);
      } catch (const std::exception&) {
        throw ParseError("vocab id/count is not a number", line_no);
      }
      if (id != v.words_.size()) throw ParseError("vocab ids must be dense and ordered", line_no);
      v.add(cols[0], count);
    }
    if (v.words_.size() < static_cast<std::size_t>(special::kCount)) throw ParseError("vocab lacks reserved tokens", 0);
    for (std::size_t i = 0; i < special::kNames.size(); ++i) {
      if (v.words_[i] != special::kNames[i]) throw ParseError("reserved token out of place", i + 1);
    }
    return v;
  }

  bool operator==(const Vocab& o) const { return words_ == o.words_ && counts_ == o.counts_; }

 private:
  void add(std::string word, std::uint64_t count) {
    index_.emplace(word, static_cast<TokenId>(words_.size()));
    words_.push_back(std::move(word));
    counts_.push_back(count);
  }

  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

namespace detail {

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

// Full-width punctuation that splits like ASCII punctuation.
inline constexpr std::array<std::string_view, 12> kCjkPunct = {"。", "！", "？", "；", "，", "、",
                                                                "：", "“", "”", "（", "）", "…"};
inline constexpr std::array<std::string_view, 8> kTerminators = {".", "!", "?", ";", "。", "！", "？", "；"};

inline std::size_t cjk_punct_len(std::string_view s, std::size_t pos) {
  for (auto p : kCjkPunct) {
    if (s.substr(pos, p.size()) == p) return p.size();
  }
  return 0;
}

}  // namespace detail

/// Byte spans of the tokens of `text`: whitespace separates, every
/// punctuation mark is its own token, everything else forms words.
inline std::vector<CharSpan> token_spans(std::string_view text) {
  std::vector<CharSpan> spans;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (detail::is_space(c)) {
      ++i;
      continue;
    }
    if (detail::is_ascii_punct(c)) {
      spans.push_back({i, i + 1});
      ++i;
      continue;
    }
    if (auto len = detail::cjk_punct_len(text, i)) {
      spans.push_back({i, i + len});
      i += len;
      continue;
    }
    const std::size_t start = i;
    while (i < n) {
      const auto d = static_cast<unsigned char>(text[i]);
      if (detail::is_space(d) || detail::is_ascii_punct(d) || detail::cjk_punct_len(text, i)) break;
      ++i;
    }
    spans.push_back({start, i});
  }
  return spans;
}

/// Tokenizes one sentence. Ids come from `vocab`; unknown words map to [UNK].
inline Sentence tokenize(std::string_view text, const Vocab& vocab, std::size_t doc_id = 0) {
  Sentence s;
  s.text = std::string(text);
  s.doc_id = doc_id;
  for (const auto& span : token_spans(text)) {
    Token t;
    t.surface = std::string(text.substr(span.start, span.end - span.start));
    t.normalized = to_lower_ascii(t.surface);
    t.id = vocab.id(t.normalized);
    t.char_span = span;
    s.tokens.push_back(std::move(t));
  }
  return s;
}

/// Rebuilds the sentence bytes from token surfaces and the whitespace
/// between their spans.
inline std::string detokenize(const Sentence& s) {
  std::string out;
  std::size_t cursor = 0;
  for (const auto& t : s.tokens) {
    out.append(s.text, cursor, t.char_span.start - cursor);
    out += t.surface;
    cursor = t.char_span.end;
  }
  out.append(s.text, cursor, std::string::npos);
  return out;
}

inline bool is_sentence_terminator(std::string_view surface) {
  return std::find(detail::kTerminators.begin(), detail::kTerminators.end(), surface) !=
         detail::kTerminators.end();
}

/// Splits a review line after every terminator token. The terminator stays
/// with the sentence it closes; trailing text without one is a sentence too.
inline std::vector<Sentence> split_sentences(std::string_view line, const Vocab& vocab, std::size_t doc_id) {
  std::vector<Sentence> out;
  auto spans = token_spans(line);
  std::size_t first = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto surf = line.substr(spans[i].start, spans[i].end - spans[i].start);
    const bool last = i + 1 == spans.size();
    if (is_sentence_terminator(surf) || last) {
      const std::size_t b = spans[first].start;
      const std::size_t e = spans[i].end;
      out.push_back(tokenize(line.substr(b, e - b), vocab, doc_id));
      first = i + 1;
    }
  }
  return out;
}

struct Document {
  std::size_t line = 0;
  std::vector<Sentence> sentences;
};

struct Corpus {
  std::vector<Document> documents;
  Vocab vocab;

  std::vector<const Sentence*> sentences() const {
    std::vector<const Sentence*> out;
    for (const auto& d : documents)
      for (const auto& s : d.sentences) out.push_back(&s);
    return out;
  }
  std::size_t sentence_count() const {
    std::size_t n = 0;
    for (const auto& d : documents) n += d.sentences.size();
    return n;
  }
  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& d : documents)
      for (const auto& s : d.sentences) n += s.tokens.size();
    return n;
  }
  bool empty() const { return documents.empty(); }
};

inline FrequencyTable build_frequency_table(const Corpus& corpus) {
  FrequencyTable t;
  for (const auto& d : corpus.documents)
    for (const auto& s : d.sentences)
      for (const auto& tok : s.tokens) ++t.counts[tok.normalized];
  return t;
}

/// Builds a corpus from review lines. Lines that are empty or whitespace-only
/// are skipped; `doc_id` is the 1-based position in `lines`.
inline Corpus ingest_lines(const std::vector<std::string>& lines) {
  Corpus corpus;
  const Vocab empty_vocab;
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (!is_valid_utf8(line)) throw ParseError("invalid UTF-8", line_no);
    if (trim(line).empty() || token_spans(line).empty()) continue;
    corpus.documents.push_back({line_no, split_sentences(line, empty_vocab, line_no)});
  }
  corpus.vocab = Vocab::from_frequencies(build_frequency_table(corpus));
  for (auto& d : corpus.documents)
    for (auto& s : d.sentences)
      for (auto& t : s.tokens) t.id = corpus.vocab.id(t.normalized);
  return corpus;
}

inline Corpus ingest_text(std::string_view text) { return ingest_lines(split_lines(text)); }

/// Reads a UTF-8 review file, one review per line.
inline Corpus ingest(const std::filesystem::path& path) { return ingest_text(read_file(path)); }

/// Multiword terms are looked up through the same tokenizer as the corpus.
inline std::vector<std::string> normalized_words(std::string_view phrase) {
  std::vector<std::string> out;
  for (const auto& span : token_spans(phrase))
    out.push_back(to_lower_ascii(phrase.substr(span.start, span.end - span.start)));
  return out;
}

inline std::vector<TokenId> phrase_ids(std::string_view phrase, const Vocab& vocab) {
  std::vector<TokenId> out;
  for (const auto& w : normalized_words(phrase)) out.push_back(vocab.id(w));
  return out;
}

}  // namespace sgpt
