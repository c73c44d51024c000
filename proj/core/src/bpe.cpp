#include "subtok/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

#include "merge_workspace.hpp"
#include "subtok/error.hpp"
#include "subtok/unicode.hpp"

namespace subtok {

namespace {

std::uint64_t id_pair(TokenId l, TokenId r) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) |
         static_cast<std::uint32_t>(r);
}

std::string pair_text(std::string_view l, std::string_view r) {
  std::string k(l);
  k.push_back('\xFF');  // never occurs in valid UTF-8
  k.append(r);
  return k;
}

// Base symbols of a word: its scalars, or its bytes through the printable byte map.
std::vector<std::string> base_symbols(std::string_view word, bool byte_level) {
  std::vector<std::string> out;
  if (byte_level) {
    const auto& map = byte_to_unicode();
    for (unsigned char b : word) out.push_back(map[b]);
  } else {
    for (auto ch : utf8::split_scalars(word)) out.emplace_back(ch);
  }
  return out;
}

}  // namespace

MergeTable::MergeTable(std::vector<SymbolPair> merges) {
  for (auto& [l, r] : merges) add(std::move(l), std::move(r));
}

void MergeTable::add(std::string left, std::string right) {
  auto key = pair_text(left, right);
  if (ranks_.contains(key)) {
    throw DataError("duplicate merge (" + left + ", " + right + ")");
  }
  ranks_.emplace(std::move(key), merges_.size());
  merges_.emplace_back(std::move(left), std::move(right));
}

std::optional<std::size_t> MergeTable::rank_of(std::string_view left, std::string_view right) const {
  auto it = ranks_.find(pair_text(left, right));
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

BpeModel::BpeModel(Vocab vocab, MergeTable merges, BpeOptions options)
    : vocab_(std::move(vocab)), merges_(std::move(merges)), options_(std::move(options)) {
  kind_.assign(vocab_.size(), 0);
  for (const auto& s : options_.specials) {
    auto id = vocab_.find(s);
    if (!id) throw DataError("special token '" + s + "' missing from vocabulary");
    kind_[static_cast<std::size_t>(*id)] = 1;
  }
  if (options_.unk_token) {
    unk_id_ = vocab_.find(*options_.unk_token);
    if (!unk_id_) throw DataError("unknown token '" + *options_.unk_token + "' missing from vocabulary");
  }
  if (options_.byte_fallback && !options_.byte_level) {
    byte_ids_.resize(256);
    for (int b = 0; b < 256; ++b) {
      auto id = vocab_.find(byte_token(static_cast<unsigned char>(b)));
      if (!id) throw DataError("byte fallback enabled but " + byte_token(static_cast<unsigned char>(b)) + " missing");
      byte_ids_[static_cast<std::size_t>(b)] = *id;
      kind_[static_cast<std::size_t>(*id)] = 2;
    }
  }
  for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
    const auto& [l, r] = merges_[rank];
    auto lid = vocab_.find(l);
    auto rid = vocab_.find(r);
    auto mid = vocab_.find(l + r);
    if (!lid || !rid || !mid) {
      throw DataError("merge " + std::to_string(rank) + " (" + l + ", " + r +
                      ") references a symbol missing from the vocabulary");
    }
    rules_.emplace(id_pair(*lid, *rid), MergeRule{static_cast<std::uint32_t>(rank), *mid});
  }
}

void BpeModel::encode_word(std::string_view word, WordTokens& out) const {
  out.ids.clear();
  out.pieces.clear();
  out.unk = false;
  if (word.empty()) return;

  // Symbols live in a doubly linked list over a flat array; candidate merges
  // sit in a min-heap keyed by (rank, position) and are re-validated on pop.
  struct Node {
    TokenId id;
    int prev;
    int next;
    bool mergeable;
  };
  std::vector<Node> nodes;
  nodes.reserve(word.size());
  auto push_node = [&](TokenId id, bool mergeable) {
    const int idx = static_cast<int>(nodes.size());
    nodes.push_back({id, idx - 1, idx + 1, mergeable});
  };
  if (options_.byte_level) {
    const auto& map = byte_to_unicode();
    for (unsigned char b : word) {
      auto id = vocab_.find(map[b]);
      if (!id) throw DataError("byte-level vocabulary lacks a byte symbol");
      push_node(*id, true);
    }
  } else {
    for (auto ch : utf8::split_scalars(word)) {
      auto id = vocab_.find(ch);
      if (id && kind_[static_cast<std::size_t>(*id)] == 0) {
        push_node(*id, true);
      } else if (!byte_ids_.empty()) {
        for (unsigned char b : ch) push_node(byte_ids_[b], false);
      } else if (unk_id_) {
        push_node(*unk_id_, false);
        out.unk = true;
      } else {
        throw DataError("symbol '" + std::string(ch) +
                        "' is outside the alphabet and the model has neither byte fallback nor an unknown token");
      }
    }
  }
  nodes.back().next = -1;

  using Candidate = std::tuple<std::uint32_t, int, TokenId, TokenId>;  // rank, left pos, ids
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
  auto consider = [&](int left) {
    if (left < 0) return;
    const int right = nodes[static_cast<std::size_t>(left)].next;
    if (right < 0) return;
    const auto& a = nodes[static_cast<std::size_t>(left)];
    const auto& b = nodes[static_cast<std::size_t>(right)];
    if (!a.mergeable || !b.mergeable) return;
    auto it = rules_.find(id_pair(a.id, b.id));
    if (it != rules_.end()) heap.emplace(it->second.rank, left, a.id, b.id);
  };
  for (int i = 0; i + 1 < static_cast<int>(nodes.size()); ++i) consider(i);

  std::vector<bool> dead(nodes.size(), false);
  while (!heap.empty()) {
    auto [rank, left, lid, rid] = heap.top();
    heap.pop();
    auto& a = nodes[static_cast<std::size_t>(left)];
    if (dead[static_cast<std::size_t>(left)] || a.id != lid || a.next < 0) continue;
    auto& b = nodes[static_cast<std::size_t>(a.next)];
    if (b.id != rid) continue;
    a.id = rules_.at(id_pair(lid, rid)).merged;
    dead[static_cast<std::size_t>(a.next)] = true;
    a.next = b.next;
    if (a.next >= 0) nodes[static_cast<std::size_t>(a.next)].prev = left;
    consider(a.prev);
    consider(left);
  }

  for (int i = 0; i >= 0; i = nodes[static_cast<std::size_t>(i)].next) {
    const TokenId id = nodes[static_cast<std::size_t>(i)].id;
    out.ids.push_back(id);
    out.pieces.push_back(vocab_.piece(id));
  }
}

std::string BpeModel::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    const std::string& piece = vocab_.piece(id);
    const auto kind = kind_[static_cast<std::size_t>(id)];
    if (kind == 2) {
      out.push_back(static_cast<char>(*parse_byte_token(piece)));
    } else if (kind == 0 && options_.byte_level) {
      auto bytes = unicode_string_to_bytes(piece);
      if (!bytes) throw DataError("byte-level piece '" + piece + "' contains an unmapped scalar");
      out += *bytes;
    } else {
      out += piece;
    }
  }
  return out;
}

std::size_t bpe_base_vocab_size(const WordCounts& wc, const BpeTrainerConfig& config) {
  Vocab v;
  for (const auto& s : config.specials) v.add(s);
  if (config.byte_level) {
    for (const auto& s : byte_to_unicode()) v.add(s);
  } else {
    if (config.byte_fallback) {
      for (int b = 0; b < 256; ++b) v.add(byte_token(static_cast<unsigned char>(b)));
    }
    std::set<std::string> chars;
    for (const auto& e : wc) {
      for (auto ch : utf8::split_scalars(e.word)) chars.emplace(ch);
    }
    for (const auto& c : chars) v.add(c);
  }
  return v.size();
}

BpeModel train_bpe(const WordCounts& wc, std::size_t vocab_size, const BpeTrainerConfig& config) {
  if (config.min_frequency == 0) throw UsageError("min_frequency must be at least 1");
  Vocab vocab;
  for (const auto& s : config.specials) vocab.add(s);
  const bool fallback = config.byte_fallback && !config.byte_level;
  if (fallback) {
    for (int b = 0; b < 256; ++b) vocab.add(byte_token(static_cast<unsigned char>(b)));
  }
  const std::size_t reserved = vocab.size();

  std::set<std::string> alphabet;  // std::string order == scalar order for UTF-8
  if (config.byte_level) {
    alphabet.insert(byte_to_unicode().begin(), byte_to_unicode().end());
  } else {
    for (const auto& e : wc) {
      for (auto ch : utf8::split_scalars(e.word)) alphabet.emplace(ch);
    }
  }
  for (const auto& c : alphabet) vocab.add(c);
  if (vocab_size < vocab.size()) {
    throw UsageError("vocab_size " + std::to_string(vocab_size) + " is smaller than the base vocabulary (" +
                     std::to_string(vocab.size()) + " = alphabet + specials" +
                     (fallback ? " + 256 byte tokens)" : ")"));
  }

  detail::MergeWorkspace ws;
  for (const auto& e : wc) {
    std::vector<detail::SymbolId> syms;
    for (const auto& s : base_symbols(e.word, config.byte_level)) syms.push_back(ws.intern(s));
    ws.add_word(std::move(syms), e.count);
  }
  ws.count_pairs();

  // A merged piece may not impersonate a special or byte token.
  auto banned = [&](const std::string& merged) {
    auto id = vocab.find(merged);
    return id && static_cast<std::size_t>(*id) < reserved;
  };

  struct Entry {
    std::int64_t count;
    detail::PairKey key;
  };
  auto worse = [&ws](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count < b.count;
    const auto& al = ws.symbol(detail::pair_left(a.key));
    const auto& bl = ws.symbol(detail::pair_left(b.key));
    if (al != bl) return al > bl;
    return ws.symbol(detail::pair_right(a.key)) > ws.symbol(detail::pair_right(b.key));
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  {
    std::vector<detail::PairKey> keys;
    keys.reserve(ws.pair_counts().size());
    for (const auto& [k, c] : ws.pair_counts()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (auto k : keys) heap.push({ws.pair_count(k), k});
  }

  MergeTable merges;
  while (vocab.size() < vocab_size && !heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    if (ws.pair_count(top.key) != top.count) continue;  // stale
    if (top.count < static_cast<std::int64_t>(config.min_frequency)) break;
    const auto l = detail::pair_left(top.key);
    const auto r = detail::pair_right(top.key);
    std::string merged = ws.symbol(l) + ws.symbol(r);
    if (banned(merged)) continue;
    const auto m = ws.intern(merged);
    // A pair can re-form when another merge route rebuilds one of its symbols;
    // it keeps its first rank.
    if (!merges.rank_of(ws.symbol(l), ws.symbol(r))) {
      merges.add(ws.symbol(l), ws.symbol(r));
      vocab.add(merged);
    }
    for (auto k : ws.apply_merge(l, r, m)) {
      const auto c = ws.pair_count(k);
      if (c > 0) heap.push({c, k});
    }
  }

  BpeOptions opts;
  opts.byte_level = config.byte_level;
  opts.byte_fallback = fallback;
  opts.specials = config.specials;
  opts.unk_token = std::nullopt;
  for (const auto& s : config.specials) {
    if (s == "<unk>") opts.unk_token = s;
  }
  return BpeModel(std::move(vocab), std::move(merges), std::move(opts));
}

TokenSeq encode_bpe(const BpeModel& model, std::string_view text, const PretokenPolicy& policy) {
  return encode_words(text, policy,
                      [&model](std::string_view w, WordTokens& out) { model.encode_word(w, out); });
}

std::string decode_bpe(const BpeModel& model, std::span<const TokenId> ids) { return model.decode(ids); }

// ---- persistence -----------------------------------------------------------

std::string encode_merge_field(std::string_view symbol) {
  bool quote = symbol.empty() || symbol.front() == '"';
  for (std::size_t pos = 0; !quote && pos < symbol.size();) {
    if (is_whitespace(utf8::decode(symbol, pos))) quote = true;
  }
  if (!quote) return std::string(symbol);
  return nlohmann::json(std::string(symbol)).dump();
}

namespace {
// Reads one merge-file field starting at `pos`; advances past it.
std::optional<std::string> read_field(std::string_view line, std::size_t& pos) {
  if (pos >= line.size()) return std::nullopt;
  if (line[pos] == '"') {
    std::size_t end = pos + 1;
    while (end < line.size() && line[end] != '"') end += line[end] == '\\' ? 2 : 1;
    if (end >= line.size()) return std::nullopt;
    try {
      auto s = nlohmann::json::parse(line.substr(pos, end - pos + 1)).get<std::string>();
      pos = end + 1;
      return s;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }
  const std::size_t end = line.find(' ', pos);
  std::string s(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
  pos = end == std::string_view::npos ? line.size() : end;
  return s;
}
}  // namespace

std::optional<SymbolPair> parse_merge_line(std::string_view line) {
  std::size_t pos = 0;
  auto l = read_field(line, pos);
  if (!l || pos >= line.size() || line[pos] != ' ') return std::nullopt;
  ++pos;
  auto r = read_field(line, pos);
  if (!r || pos != line.size() || l->empty() || r->empty()) return std::nullopt;
  return SymbolPair{std::move(*l), std::move(*r)};
}

std::string bpe_vocab_text(const BpeModel& model) {
  std::string out;
  for (const auto& p : model.vocab().pieces()) {
    out += nlohmann::json(p).dump();
    out += '\n';
  }
  return out;
}

std::string bpe_merges_text(const BpeModel& model) {
  const auto& o = model.options();
  nlohmann::json meta = {{"format", "bpe/v1"},
                         {"base", o.byte_level ? "byte" : "char"},
                         {"byte_fallback", o.byte_fallback},
                         {"specials", o.specials}};
  meta["unk_token"] = o.unk_token ? nlohmann::json(*o.unk_token) : nlohmann::json(nullptr);
  std::string out = "#! " + meta.dump() + "\n";
  for (const auto& [l, r] : model.merges()) {
    out += encode_merge_field(l);
    out += ' ';
    out += encode_merge_field(r);
    out += '\n';
  }
  return out;
}

namespace {
void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::filesystem::path strip_model_ext(const std::filesystem::path& p) {
  const auto ext = p.extension();
  if (ext == ".vocab" || ext == ".merges") {
    auto q = p;
    q.replace_extension();
    return q;
  }
  return p;
}

std::filesystem::path with_suffix(std::filesystem::path p, const char* suffix) {
  p += suffix;
  return p;
}
}  // namespace

void save_bpe(const BpeModel& model, const std::filesystem::path& prefix) {
  const auto base = strip_model_ext(prefix);
  write_file(with_suffix(base, ".vocab"), bpe_vocab_text(model));
  write_file(with_suffix(base, ".merges"), bpe_merges_text(model));
}

BpeModel load_bpe(const std::filesystem::path& path) {
  const auto base = strip_model_ext(path);
  const auto vocab_path = with_suffix(base, ".vocab");
  const auto merges_path = with_suffix(base, ".merges");

  std::vector<std::string> pieces;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(vocab_path)) {
    ++lineno;
    try {
      pieces.push_back(nlohmann::json::parse(line).get<std::string>());
    } catch (const nlohmann::json::exception&) {
      throw DataError(vocab_path.string() + ":" + std::to_string(lineno) + ": expected a JSON string");
    }
  }

  auto lines = read_lines(merges_path);
  if (lines.empty() || !lines[0].starts_with("#! ")) {
    throw DataError(merges_path.string() + ":1: missing '#!' metadata header");
  }
  BpeOptions opts;
  try {
    auto meta = nlohmann::json::parse(lines[0].substr(3));
    if (meta.at("format") != "bpe/v1") throw DataError("unsupported BPE model format");
    opts.byte_level = meta.at("base") == "byte";
    opts.byte_fallback = meta.at("byte_fallback").get<bool>();
    opts.specials = meta.at("specials").get<std::vector<std::string>>();
    const auto& unk = meta.at("unk_token");
    opts.unk_token = unk.is_null() ? std::nullopt : std::optional<std::string>(unk.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(merges_path.string() + ":1: bad metadata header: " + e.what());
  }
  MergeTable merges;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto pair = parse_merge_line(lines[i]);
    if (!pair) throw DataError(merges_path.string() + ":" + std::to_string(i + 1) + ": malformed merge line");
    merges.add(std::move(pair->first), std::move(pair->second));
  }
  return BpeModel(Vocab(std::move(pieces)), std::move(merges), std::move(opts));
}

}  // namespace subtok
