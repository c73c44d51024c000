#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "subtok/corpus.hpp"
#include "subtok/vocab.hpp"

namespace subtok {

struct WordSpan {
  std::size_t word_index = 0;
  std::size_t token_start = 0;
  std::size_t token_count = 0;
  bool unk = false;  // word hit the unknown token; its decoding is lossy

  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

/// Encoder output. Word boundaries come from the pre-tokenization policy, so
/// tokens never straddle a span; `gaps` keeps the inter-word text the policy
/// consumed (gaps.size() == word_spans.size() + 1, or both empty).
struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> pieces;
  std::vector<WordSpan> word_spans;
  std::vector<std::string> gaps;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  bool has_unk() const;

  /// Throws InternalError when the span bookkeeping is inconsistent.
  void check() const;

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

struct WordTokens {
  std::vector<TokenId> ids;
  std::vector<std::string> pieces;
  bool unk = false;
};

using WordEncoder = std::function<void(std::string_view word, WordTokens& out)>;

/// Pre-tokenizes `text` and encodes each distinct word once.
TokenSeq encode_words(std::string_view text, const PretokenPolicy& policy,
                      const WordEncoder& encode_word);

/// Reassembles text from per-word decodings and the recorded gaps.
std::string detokenize(const TokenSeq& seq,
                       const std::function<std::string(std::span<const TokenId>)>& decode);

}  // namespace subtok
