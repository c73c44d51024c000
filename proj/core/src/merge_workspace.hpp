#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "subtok/corpus.hpp"

namespace subtok::detail {

using SymbolId = std::uint32_t;
using PairKey = std::uint64_t;

inline PairKey pair_key(SymbolId l, SymbolId r) { return (static_cast<PairKey>(l) << 32) | r; }
inline SymbolId pair_left(PairKey k) { return static_cast<SymbolId>(k >> 32); }
inline SymbolId pair_right(PairKey k) { return static_cast<SymbolId>(k & 0xFFFFFFFFu); }

/// Words as symbol sequences with incrementally maintained adjacent-pair and
/// symbol occurrence counts (weighted by word frequency). Shared by the
/// merge-based trainers.
class MergeWorkspace {
 public:
  SymbolId intern(std::string_view s);
  const std::string& symbol(SymbolId id) const { return symbols_[id]; }
  std::size_t symbol_table_size() const { return symbols_.size(); }

  void add_word(std::vector<SymbolId> symbols, std::uint64_t count);

  /// Counts all pairs from scratch. Call once after the last add_word.
  void count_pairs();

  const std::unordered_map<PairKey, std::int64_t>& pair_counts() const { return pair_counts_; }
  std::int64_t pair_count(PairKey k) const;
  std::int64_t symbol_count(SymbolId id) const;

  /// Replaces every non-overlapping (left, right) occurrence, scanning each word
  /// left to right, by `merged`. Returns the pairs whose counts changed.
  std::vector<PairKey> apply_merge(SymbolId left, SymbolId right, SymbolId merged);

 private:
  struct Word {
    std::vector<SymbolId> symbols;
    std::int64_t count;
  };
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, SymbolId> symbol_index_;
  std::vector<Word> words_;
  std::unordered_map<PairKey, std::int64_t> pair_counts_;
  std::unordered_map<PairKey, std::vector<std::uint32_t>> pair_words_;
  std::vector<std::int64_t> symbol_counts_;
  std::vector<std::uint32_t> visit_stamp_;
  std::uint32_t stamp_ = 0;
};

}  // namespace subtok::detail
