#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace subtok {

enum class PretokenMode { whitespace, tsheg_syllable, byte_level_regex };
enum class Normalization { nfc, none };

struct PretokenPolicy {
  PretokenMode mode = PretokenMode::whitespace;
  Normalization normalization = Normalization::nfc;
  bool lowercase = false;

  friend bool operator==(const PretokenPolicy&, const PretokenPolicy&) = default;
};

std::string_view to_string(PretokenMode mode);
std::string_view to_string(Normalization norm);
PretokenMode parse_pretoken_mode(std::string_view name);
Normalization parse_normalization(std::string_view name);

/// Applies the policy's normalization and case folding. Input must be valid UTF-8.
std::string normalize(std::string_view text, const PretokenPolicy& policy);

struct Corpus {
  std::vector<std::string> documents;
  std::size_t char_count = 0;
  std::string source_id;
  bool final_newline = false;  // whether the source ended with '\n'
};

Corpus load_corpus(const std::filesystem::path& path, const PretokenPolicy& policy);
Corpus corpus_from_text(std::string_view text, const PretokenPolicy& policy,
                        std::string source_id = "<memory>");
std::string serialize_corpus(const Corpus& corpus);

/// Multiset of words, iterated in first-seen order.
class WordCounts {
 public:
  struct Entry {
    std::string word;
    std::uint64_t count;
  };

  void add(std::string_view word, std::uint64_t n = 1);
  std::uint64_t count(std::string_view word) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t distinct_words() const { return entries_.size(); }
  std::uint64_t total_words() const { return total_; }
  bool empty() const { return entries_.empty(); }

  /// Same keys, every count set to 1.
  WordCounts deduped() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
  std::uint64_t total_ = 0;
};

bool is_dataset_marker(std::string_view token);

/// Drops the annotation markers (beg, end, mid, #, *, NUM) and counts the rest.
WordCounts extract_words(std::span<const std::string> dataset_tokens);

/// Splits a marker-annotated dataset file on ASCII whitespace.
std::vector<std::string> read_dataset_tokens(const std::filesystem::path& path);
std::vector<std::string> split_ascii_whitespace(std::string_view text);

/// Lossless pre-tokenization: `gaps` has one more element than `words`, and
/// gaps[0] + words[0] + gaps[1] + ... + words[n-1] + gaps[n] == text.
struct Pretokens {
  std::vector<std::string> words;
  std::vector<std::string> gaps;
};

Pretokens split_pretokens(std::string_view text, const PretokenPolicy& policy);
std::vector<std::string> pretokenize(std::string_view text, const PretokenPolicy& policy);
std::string join_pretokens(const Pretokens& p);

/// Word frequencies of a corpus under `policy` (the trainers' input).
WordCounts count_words(const Corpus& corpus, const PretokenPolicy& policy);

/// Each word repeated per its count, first-seen order, single-space separated.
std::string concat_words(const WordCounts& wc);

}  // namespace subtok
