#include "subtok/wordpiece.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "merge_workspace.hpp"
#include "subtok/error.hpp"
#include "subtok/unicode.hpp"

namespace subtok {

WordPieceModel::WordPieceModel(Vocab vocab, std::string continuation_prefix, std::string unk_token,
                               std::size_t max_word_chars)
    : vocab_(std::move(vocab)),
      prefix_(std::move(continuation_prefix)),
      unk_token_(std::move(unk_token)),
      max_word_chars_(max_word_chars) {
  auto unk = vocab_.find(unk_token_);
  if (!unk) throw DataError("WordPiece vocabulary lacks the unknown token '" + unk_token_ + "'");
  unk_id_ = *unk;
  for (const auto& p : vocab_.pieces()) {
    std::string_view body = p;
    if (!prefix_.empty() && body.starts_with(prefix_)) body.remove_prefix(prefix_.size());
    max_piece_chars_ = std::max(max_piece_chars_, utf8::count_scalars(body));
  }
}

void WordPieceModel::encode_word(std::string_view word, WordTokens& out) const {
  out.ids.clear();
  out.pieces.clear();
  out.unk = false;
  if (word.empty()) return;
  const auto chars = utf8::split_scalars(word);
  auto emit_unk = [&] {
    out.ids.assign(1, unk_id_);
    out.pieces.assign(1, unk_token_);
    out.unk = true;
  };
  if (chars.size() > max_word_chars_) return emit_unk();

  // Byte offset of each scalar boundary.
  std::vector<std::size_t> offset(chars.size() + 1, 0);
  for (std::size_t i = 0; i < chars.size(); ++i) offset[i + 1] = offset[i] + chars[i].size();

  std::string candidate;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::size_t end = std::min(chars.size(), start + max_piece_chars_);
    std::optional<TokenId> match;
    for (; end > start; --end) {
      candidate.clear();
      if (start > 0) candidate = prefix_;
      candidate.append(word.substr(offset[start], offset[end] - offset[start]));
      match = vocab_.find(candidate);
      if (match) break;
    }
    if (!match) return emit_unk();
    out.ids.push_back(*match);
    out.pieces.push_back(candidate);
    start = end;
  }
}

std::string WordPieceModel::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    std::string_view p = vocab_.piece(id);
    if (!prefix_.empty() && p.starts_with(prefix_)) p.remove_prefix(prefix_.size());
    out.append(p);
  }
  return out;
}

namespace {

std::vector<std::string> initial_symbols(std::string_view word, const std::string& prefix) {
  std::vector<std::string> out;
  bool first = true;
  for (auto ch : utf8::split_scalars(word)) {
    out.push_back(first ? std::string(ch) : prefix + std::string(ch));
    first = false;
  }
  return out;
}

Vocab base_vocab(const WordCounts& wc, const WordPieceTrainerConfig& config) {
  Vocab v;
  v.add(config.unk_token);
  for (const auto& s : config.specials) v.add(s);
  std::set<std::string> symbols;
  for (const auto& e : wc) {
    for (auto& s : initial_symbols(e.word, config.continuation_prefix)) symbols.insert(std::move(s));
  }
  for (const auto& s : symbols) v.add(s);
  return v;
}

}  // namespace

std::size_t wordpiece_base_vocab_size(const WordCounts& wc, const WordPieceTrainerConfig& config) {
  return base_vocab(wc, config).size();
}

WordPieceModel train_wordpiece(const WordCounts& wc, std::size_t vocab_size,
                               const WordPieceTrainerConfig& config) {
  if (config.continuation_prefix.empty()) throw UsageError("continuation prefix must not be empty");
  Vocab vocab = base_vocab(wc, config);
  if (vocab_size < vocab.size()) {
    throw UsageError("vocab_size " + std::to_string(vocab_size) +
                     " is smaller than the initial character vocabulary (" + std::to_string(vocab.size()) +
                     " including specials)");
  }
  const std::size_t reserved = 1 + config.specials.size();
  const std::string& prefix = config.continuation_prefix;

  detail::MergeWorkspace ws;
  for (const auto& e : wc) {
    std::vector<detail::SymbolId> syms;
    for (const auto& s : initial_symbols(e.word, prefix)) syms.push_back(ws.intern(s));
    ws.add_word(std::move(syms), e.count);
  }
  ws.count_pairs();

  auto merged_text = [&](detail::SymbolId l, detail::SymbolId r) {
    std::string_view right = ws.symbol(r);
    right.remove_prefix(prefix.size());
    return ws.symbol(l) + std::string(right);
  };
  auto allowed = [&](detail::SymbolId l, detail::SymbolId r) {
    const std::string& left = ws.symbol(l);
    if (!ws.symbol(r).starts_with(prefix)) return false;  // right side is always a continuation
    const std::string m = merged_text(l, r);
    // An initial piece must never look like a continuation piece.
    if (!left.starts_with(prefix) && m.starts_with(prefix)) return false;
    auto id = vocab.find(m);
    return !(id && static_cast<std::size_t>(*id) < reserved);
  };

  __extension__ typedef unsigned __int128 u128;
  const auto min_count = static_cast<std::int64_t>(std::max<std::uint64_t>(1, config.min_frequency));
  while (vocab.size() < vocab_size) {
    bool found = false;
    detail::PairKey best = 0;
    std::int64_t best_count = 0;
    u128 best_den = 1;
    for (const auto& [k, c] : ws.pair_counts()) {
      if (c < min_count) continue;
      const auto l = detail::pair_left(k);
      const auto r = detail::pair_right(k);
      const u128 den = static_cast<u128>(ws.symbol_count(l)) * static_cast<u128>(ws.symbol_count(r));
      if (found) {
        // c / den vs best_count / best_den
        const u128 lhs = static_cast<u128>(c) * best_den;
        const u128 rhs = static_cast<u128>(best_count) * den;
        if (lhs < rhs) continue;
        if (lhs == rhs) {
          if (c < best_count) continue;
          if (c == best_count) {
            const auto bl = detail::pair_left(best);
            const auto br = detail::pair_right(best);
            const auto& ls = ws.symbol(l);
            const auto& bls = ws.symbol(bl);
            if (ls > bls || (ls == bls && ws.symbol(r) >= ws.symbol(br))) continue;
          }
        }
      }
      if (!allowed(l, r)) continue;
      found = true;
      best = k;
      best_count = c;
      best_den = den;
    }
    if (!found) break;
    const double score = static_cast<double>(best_count) / static_cast<double>(best_den);
    if (score <= config.min_score) break;
    const auto l = detail::pair_left(best);
    const auto r = detail::pair_right(best);
    const std::string m = merged_text(l, r);
    const auto mid = ws.intern(m);
    vocab.add(m);
    ws.apply_merge(l, r, mid);
  }
  return WordPieceModel(std::move(vocab), prefix, config.unk_token, config.max_word_chars);
}

TokenSeq encode_wordpiece(const WordPieceModel& model, std::string_view text, const PretokenPolicy& policy) {
  return encode_words(text, policy,
                      [&model](std::string_view w, WordTokens& out) { model.encode_word(w, out); });
}

std::string decode_wordpiece(const WordPieceModel& model, std::span<const TokenId> ids) {
  return model.decode(ids);
}

std::string wordpiece_text(const WordPieceModel& model) {
  nlohmann::json meta = {{"format", "wordpiece/v1"},
                         {"continuation_prefix", model.continuation_prefix()},
                         {"unk_token", model.unk_token()},
                         {"max_word_chars", model.max_word_chars()}};
  std::string out = "#! " + meta.dump() + "\n";
  for (const auto& p : model.vocab().pieces()) {
    if (p.find('\n') != std::string::npos) throw DataError("WordPiece piece contains a newline");
    out += p;
    out += '\n';
  }
  return out;
}

void save_wordpiece(const WordPieceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << wordpiece_text(model);
  if (!out) throw DataError("write failed for " + path.string());
}

WordPieceModel load_wordpiece(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header) || !header.starts_with("#! ")) {
    throw DataError(path.string() + ":1: missing '#!' metadata header");
  }
  std::string prefix = "##";
  std::string unk = "[UNK]";
  std::size_t max_chars = 100;
  try {
    auto meta = nlohmann::json::parse(header.substr(3));
    if (meta.at("format") != "wordpiece/v1") throw DataError(path.string() + ": unsupported WordPiece format");
    prefix = meta.at("continuation_prefix").get<std::string>();
    unk = meta.at("unk_token").get<std::string>();
    max_chars = meta.value("max_word_chars", std::size_t{100});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ":1: bad metadata header: " + e.what());
  }
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  return WordPieceModel(Vocab(std::move(pieces)), prefix, unk, max_chars);
}

}  // namespace subtok
