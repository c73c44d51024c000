#include "subtok/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <sstream>

#include "subtok/error.hpp"
#include "subtok/parallel.hpp"
#include "subtok/unicode.hpp"

namespace subtok {

std::string_view to_string(PretokenMode mode) {
  switch (mode) {
    case PretokenMode::whitespace: return "whitespace";
    case PretokenMode::tsheg_syllable: return "tsheg";
    case PretokenMode::byte_level_regex: return "regex";
  }
  return "?";
}

std::string_view to_string(Normalization norm) {
  return norm == Normalization::nfc ? "nfc" : "none";
}

PretokenMode parse_pretoken_mode(std::string_view name) {
  if (name == "whitespace") return PretokenMode::whitespace;
  if (name == "tsheg" || name == "tsheg_syllable") return PretokenMode::tsheg_syllable;
  if (name == "regex" || name == "byte_level_regex") return PretokenMode::byte_level_regex;
  throw UsageError("unknown pre-tokenization policy '" + std::string(name) +
                   "' (expected whitespace, tsheg or regex)");
}

Normalization parse_normalization(std::string_view name) {
  if (name == "nfc" || name == "NFC") return Normalization::nfc;
  if (name == "none") return Normalization::none;
  throw UsageError("unknown normalization '" + std::string(name) + "' (expected nfc or none)");
}

std::string normalize(std::string_view text, const PretokenPolicy& policy) {
  std::string out = policy.normalization == Normalization::nfc ? normalize_nfc(text)
                                                               : std::string(text);
  if (policy.lowercase) out = to_lower(out);
  return out;
}

Corpus corpus_from_text(std::string_view text, const PretokenPolicy& policy,
                        std::string source_id) {
  utf8::validate(text, source_id);
  Corpus c;
  c.source_id = std::move(source_id);
  c.final_newline = !text.empty() && text.back() == '\n';
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    c.documents.push_back(normalize(text.substr(start, nl - start), policy));
    start = nl + 1;
  }
  for (const auto& d : c.documents) c.char_count += utf8::count_scalars(d);
  return c;
}

Corpus load_corpus(const std::filesystem::path& path, const PretokenPolicy& policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read error on corpus file " + path.string());
  return corpus_from_text(text, policy, path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    out += corpus.documents[i];
    if (i + 1 < corpus.documents.size() || corpus.final_newline) out += '\n';
  }
  return out;
}

void WordCounts::add(std::string_view word, std::uint64_t n) {
  if (n == 0) return;
  auto it = index_.find(word);
  if (it == index_.end()) {
    index_.emplace(std::string(word), entries_.size());
    entries_.push_back({std::string(word), n});
  } else {
    entries_[it->second].count += n;
  }
  total_ += n;
}

std::uint64_t WordCounts::count(std::string_view word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0 : entries_[it->second].count;
}

WordCounts WordCounts::deduped() const {
  WordCounts out;
  for (const auto& e : entries_) out.add(e.word, 1);
  return out;
}

bool is_dataset_marker(std::string_view token) {
  static constexpr std::array<std::string_view, 6> kMarkers = {"beg", "end", "mid",
                                                               "#",   "*",   "NUM"};
  return std::find(kMarkers.begin(), kMarkers.end(), token) != kMarkers.end();
}

WordCounts extract_words(std::span<const std::string> dataset_tokens) {
  WordCounts wc;
  for (const auto& t : dataset_tokens) {
    if (!is_dataset_marker(t)) wc.add(t);
  }
  return wc;
}

namespace {
bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}
}  // namespace

std::vector<std::string> split_ascii_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> read_dataset_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  utf8::validate(text, path.string());
  return split_ascii_whitespace(text);
}

Pretokens split_pretokens(std::string_view text, const PretokenPolicy& policy) {
  Pretokens p;
  if (policy.mode == PretokenMode::byte_level_regex) {
    static const RegexSplitter splitter(kGpt2Pattern);
    p.words = splitter.split(text);
    p.gaps.assign(p.words.size() + 1, std::string());
    return p;
  }

  const bool tsheg = policy.mode == PretokenMode::tsheg_syllable;
  std::string gap;
  std::string word;
  auto flush_word = [&] {
    if (word.empty()) return;
    p.gaps.push_back(std::move(gap));
    p.words.push_back(std::move(word));
    gap.clear();
    word.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const char32_t cp = utf8::decode(text, pos);
    const std::string_view ch = text.substr(start, pos - start);
    if (is_whitespace(cp)) {
      flush_word();
      gap.append(ch);
    } else {
      word.append(ch);
      if (tsheg && cp == kTsheg) flush_word();
    }
  }
  flush_word();
  p.gaps.push_back(std::move(gap));
  return p;
}

std::vector<std::string> pretokenize(std::string_view text, const PretokenPolicy& policy) {
  return split_pretokens(text, policy).words;
}

std::string join_pretokens(const Pretokens& p) {
  std::string out;
  for (std::size_t i = 0; i < p.words.size(); ++i) {
    out += p.gaps[i];
    out += p.words[i];
  }
  if (!p.gaps.empty()) out += p.gaps.back();
  return out;
}

WordCounts count_words(const Corpus& corpus, const PretokenPolicy& policy) {
  // Per-block counts merged in block order keep first-seen order identical to
  // a sequential pass, whatever the worker count.
  constexpr std::size_t kBlock = 512;
  const std::size_t n = corpus.documents.size();
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<WordCounts> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      for (auto& w : pretokenize(corpus.documents[i], policy)) partial[b].add(w);
    }
  });
  WordCounts wc;
  for (const auto& part : partial) {
    for (const auto& e : part) wc.add(e.word, e.count);
  }
  return wc;
}

std::string concat_words(const WordCounts& wc) {
  std::string out;
  bool first = true;
  for (const auto& e : wc) {
    for (std::uint64_t k = 0; k < e.count; ++k) {
      if (!first) out += ' ';
      out += e.word;
      first = false;
    }
  }
  return out;
}

}  // namespace subtok
