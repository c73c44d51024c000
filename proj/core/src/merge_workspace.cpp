#include "merge_workspace.hpp"

#include <algorithm>

#include "subtok/error.hpp"
#include "subtok/parallel.hpp"

namespace subtok::detail {

SymbolId MergeWorkspace::intern(std::string_view s) {
  auto it = symbol_index_.find(std::string(s));
  if (it != symbol_index_.end()) return it->second;
  const auto id = static_cast<SymbolId>(symbols_.size());
  symbols_.emplace_back(s);
  symbol_index_.emplace(symbols_.back(), id);
  symbol_counts_.push_back(0);
  return id;
}

void MergeWorkspace::add_word(std::vector<SymbolId> symbols, std::uint64_t count) {
  const auto c = static_cast<std::int64_t>(count);
  for (SymbolId s : symbols) symbol_counts_[s] += c;
  words_.push_back({std::move(symbols), c});
}

void MergeWorkspace::count_pairs() {
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (words_.size() + kBlock - 1) / kBlock;
  std::vector<std::unordered_map<PairKey, std::int64_t>> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(words_.size(), (b + 1) * kBlock);
    for (std::size_t w = b * kBlock; w < end; ++w) {
      const auto& syms = words_[w].symbols;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        partial[b][pair_key(syms[i], syms[i + 1])] += words_[w].count;
      }
    }
  });
  pair_counts_.clear();
  for (auto& part : partial) {
    for (const auto& [k, c] : part) pair_counts_[k] += c;
  }
  pair_words_.clear();
  for (std::size_t w = 0; w < words_.size(); ++w) {
    const auto& syms = words_[w].symbols;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto& list = pair_words_[pair_key(syms[i], syms[i + 1])];
      if (list.empty() || list.back() != w) list.push_back(static_cast<std::uint32_t>(w));
    }
  }
  visit_stamp_.assign(words_.size(), 0);
}

std::int64_t MergeWorkspace::pair_count(PairKey k) const {
  auto it = pair_counts_.find(k);
  return it == pair_counts_.end() ? 0 : it->second;
}

std::int64_t MergeWorkspace::symbol_count(SymbolId id) const {
  return id < symbol_counts_.size() ? symbol_counts_[id] : 0;
}

std::vector<PairKey> MergeWorkspace::apply_merge(SymbolId left, SymbolId right, SymbolId merged) {
  const PairKey target = pair_key(left, right);
  auto it = pair_words_.find(target);
  if (it == pair_words_.end()) return {};
  std::vector<std::uint32_t> affected = std::move(it->second);
  pair_words_.erase(it);

  if (merged >= symbol_counts_.size()) throw InternalError("merged symbol not interned");
  ++stamp_;
  std::unordered_map<PairKey, std::int64_t> delta;
  std::vector<SymbolId> next;
  for (std::uint32_t w : affected) {
    if (visit_stamp_[w] == stamp_) continue;
    visit_stamp_[w] = stamp_;
    Word& word = words_[w];
    auto& syms = word.symbols;
    next.clear();
    bool changed = false;
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
        next.push_back(merged);
        i += 2;
        changed = true;
      } else {
        next.push_back(syms[i]);
        ++i;
      }
    }
    if (!changed) continue;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) delta[pair_key(syms[i], syms[i + 1])] -= word.count;
    for (SymbolId s : syms) symbol_counts_[s] -= word.count;
    for (std::size_t i = 0; i + 1 < next.size(); ++i) {
      const PairKey k = pair_key(next[i], next[i + 1]);
      delta[k] += word.count;
      if (next[i] == merged || next[i + 1] == merged) {
        auto& list = pair_words_[k];
        if (list.empty() || list.back() != w) list.push_back(w);
      }
    }
    for (SymbolId s : next) symbol_counts_[s] += word.count;
    syms.swap(next);
  }

  std::vector<PairKey> changed_pairs;
  changed_pairs.reserve(delta.size());
  for (const auto& [k, d] : delta) {
    if (d == 0) continue;
    auto& c = pair_counts_[k];
    c += d;
    if (c < 0) throw InternalError("negative pair count during merge");
    if (c == 0) pair_counts_.erase(k);
    changed_pairs.push_back(k);
  }
  std::sort(changed_pairs.begin(), changed_pairs.end());
  return changed_pairs;
}

}  // namespace subtok::detail
