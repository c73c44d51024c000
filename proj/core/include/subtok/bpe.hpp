#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "subtok/corpus.hpp"
#include "subtok/token_seq.hpp"
#include "subtok/vocab.hpp"

namespace subtok {

using SymbolPair = std::pair<std::string, std::string>;

/// Ordered merge list; index is the merge rank (0 = learned first).
class MergeTable {
 public:
  MergeTable() = default;
  explicit MergeTable(std::vector<SymbolPair> merges);

  void add(std::string left, std::string right);
  std::size_t size() const { return merges_.size(); }
  bool empty() const { return merges_.empty(); }
  const SymbolPair& operator[](std::size_t rank) const { return merges_[rank]; }
  const std::vector<SymbolPair>& merges() const { return merges_; }
  std::optional<std::size_t> rank_of(std::string_view left, std::string_view right) const;

  auto begin() const { return merges_.begin(); }
  auto end() const { return merges_.end(); }

  friend bool operator==(const MergeTable& a, const MergeTable& b) { return a.merges_ == b.merges_; }

 private:
  std::vector<SymbolPair> merges_;
  std::unordered_map<std::string, std::size_t> ranks_;
};

struct BpeTrainerConfig {
  std::uint64_t min_frequency = 2;
  bool byte_level = false;     // base symbols are the 256 bytes instead of characters
  bool byte_fallback = true;   // reserve <0xNN> tokens for characters outside the alphabet
  std::vector<std::string> specials = {"<unk>"};
};

struct BpeOptions {
  bool byte_level = false;
  bool byte_fallback = true;
  std::vector<std::string> specials = {"<unk>"};
  std::optional<std::string> unk_token = "<unk>";

  friend bool operator==(const BpeOptions&, const BpeOptions&) = default;
};

/// Immutable trained or loaded BPE model. Vocabulary layout: specials, then
/// the 256 byte tokens when byte fallback is on, then base symbols in scalar
/// order, then one piece per merge in rank order.
class BpeModel {
 public:
  /// Validates the merge table against the vocabulary and builds lookup tables.
  BpeModel(Vocab vocab, MergeTable merges, BpeOptions options);

  const Vocab& vocab() const { return vocab_; }
  const MergeTable& merges() const { return merges_; }
  const BpeOptions& options() const { return options_; }

  /// Token ids for a single pre-token. Sets `unk` if the unknown token was used.
  void encode_word(std::string_view word, WordTokens& out) const;

  std::string decode(std::span<const TokenId> ids) const;

 private:
  struct MergeRule {
    std::uint32_t rank;
    TokenId merged;
  };
  Vocab vocab_;
  MergeTable merges_;
  BpeOptions options_;
  std::unordered_map<std::uint64_t, MergeRule> rules_;
  std::vector<TokenId> byte_ids_;  // empty unless byte fallback is on
  std::optional<TokenId> unk_id_;
  std::vector<unsigned char> kind_;  // per id: 0 regular, 1 special, 2 byte token
};

/// Learns merges from word frequencies. Equal pair counts are broken by the
/// lexicographic (scalar order) comparison of (left, right).
BpeModel train_bpe(const WordCounts& wc, std::size_t vocab_size, const BpeTrainerConfig& config = {});

/// Size of the vocabulary before any merge (specials + byte tokens + alphabet).
std::size_t bpe_base_vocab_size(const WordCounts& wc, const BpeTrainerConfig& config);

TokenSeq encode_bpe(const BpeModel& model, std::string_view text, const PretokenPolicy& policy);
std::string decode_bpe(const BpeModel& model, std::span<const TokenId> ids);

/// Writes `<prefix>.vocab` (one JSON string per line, line = id) and
/// `<prefix>.merges` (metadata header, then one "left right" pair per line).
void save_bpe(const BpeModel& model, const std::filesystem::path& prefix);
/// Accepts the prefix or either of the two files.
BpeModel load_bpe(const std::filesystem::path& path);

std::string bpe_vocab_text(const BpeModel& model);
std::string bpe_merges_text(const BpeModel& model);

/// Merge-file field encoding shared with the vocab+merges loader: bare when
/// the symbol has no whitespace and does not start with '"', JSON string otherwise.
std::string encode_merge_field(std::string_view symbol);
/// Parses "left right"; nullopt if the line is not exactly two fields.
std::optional<SymbolPair> parse_merge_line(std::string_view line);

}  // namespace subtok
