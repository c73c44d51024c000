#include "subtok/token_seq.hpp"

#include <unordered_map>

#include "subtok/error.hpp"
#include "subtok/unicode.hpp"

namespace subtok {

bool TokenSeq::has_unk() const {
  for (const auto& s : word_spans) {
    if (s.unk) return true;
  }
  return false;
}

void TokenSeq::check() const {
  if (ids.size() != pieces.size()) throw InternalError("TokenSeq ids/pieces size mismatch");
  std::size_t next = 0;
  for (std::size_t i = 0; i < word_spans.size(); ++i) {
    const auto& s = word_spans[i];
    if (s.word_index != i || s.token_start != next || s.token_count == 0) {
      throw InternalError("TokenSeq word spans are not contiguous");
    }
    next += s.token_count;
  }
  if (next != ids.size()) throw InternalError("TokenSeq spans do not cover all tokens");
  if (!gaps.empty() && gaps.size() != word_spans.size() + 1) {
    throw InternalError("TokenSeq gap count mismatch");
  }
}

TokenSeq encode_words(std::string_view text, const PretokenPolicy& policy,
                      const WordEncoder& encode_word) {
  TokenSeq seq;
  if (text.empty()) return seq;
  utf8::validate(text, "encoder input");
  Pretokens pre = split_pretokens(text, policy);
  std::unordered_map<std::string_view, WordTokens> cache;
  seq.word_spans.reserve(pre.words.size());
  for (std::size_t i = 0; i < pre.words.size(); ++i) {
    const std::string& word = pre.words[i];
    auto it = cache.find(word);
    if (it == cache.end()) {
      WordTokens wt;
      encode_word(word, wt);
      if (wt.ids.empty()) throw InternalError("encoder produced no tokens for a word");
      it = cache.emplace(word, std::move(wt)).first;
    }
    const WordTokens& wt = it->second;
    seq.word_spans.push_back({i, seq.ids.size(), wt.ids.size(), wt.unk});
    seq.ids.insert(seq.ids.end(), wt.ids.begin(), wt.ids.end());
    seq.pieces.insert(seq.pieces.end(), wt.pieces.begin(), wt.pieces.end());
  }
  seq.gaps = std::move(pre.gaps);
  return seq;
}

std::string detokenize(const TokenSeq& seq,
                       const std::function<std::string(std::span<const TokenId>)>& decode) {
  std::string out;
  const std::span<const TokenId> ids(seq.ids);
  for (std::size_t i = 0; i < seq.word_spans.size(); ++i) {
    if (i < seq.gaps.size()) out += seq.gaps[i];
    const auto& s = seq.word_spans[i];
    out += decode(ids.subspan(s.token_start, s.token_count));
  }
  if (!seq.gaps.empty()) out += seq.gaps.back();
  return out;
}

}  // namespace subtok
