#include "subtok/baselines.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include <sodium.h>

#include "json.hpp"

#include "subtok/bpe.hpp"
#include "subtok/error.hpp"
#include "subtok/vocab.hpp"

namespace subtok {

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::vocab_merges_bpe: return "vocab_merges_bpe";
    case EncoderKind::rank_file_bpe: return "rank_file_bpe";
    case EncoderKind::unigram_tsv: return "unigram_tsv";
  }
  return "?";
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string rank_key(std::string_view l, std::string_view r) {
  std::string k;
  k.reserve(l.size() + r.size() + 1);
  k.append(l);
  k.push_back('\xFF');
  k.append(r);
  return k;
}

// Visits each line with its 1-based number; strips a trailing '\r'.
template <class F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    f(line_no, line);
  }
}

}  // namespace

std::size_t PretrainedEncoder::vocab_size() const {
  if (auto* vm = std::get_if<VocabMerges>(&data_)) return vm->ids.size();
  if (auto* rf = std::get_if<RankFile>(&data_)) return rf->ranks.size();
  return std::get<UnigramModel>(data_).vocab_size();
}

bool PretrainedEncoder::byte_level() const {
  if (auto* vm = std::get_if<VocabMerges>(&data_)) return vm->byte_level;
  return std::holds_alternative<RankFile>(data_);
}

void PretrainedEncoder::encode_word(std::string_view word, WordTokens& out) const {
  out.ids.clear();
  out.pieces.clear();
  out.unk = false;
  if (word.empty()) return;
  if (auto* um = std::get_if<UnigramModel>(&data_)) return um->encode_word(word, out);

  WordTokens chunk_out;
  auto run = [&](std::string_view chunk) {
    if (auto* vm = std::get_if<VocabMerges>(&data_)) {
      encode_vocab_merges(*vm, chunk, chunk_out);
    } else {
      encode_rank_file(std::get<RankFile>(data_), chunk, chunk_out);
    }
    out.ids.insert(out.ids.end(), chunk_out.ids.begin(), chunk_out.ids.end());
    for (auto& p : chunk_out.pieces) out.pieces.push_back(std::move(p));
    out.unk = out.unk || chunk_out.unk;
  };
  if (!splitter_) return run(word);
  for (const auto& chunk : splitter_->split(word)) run(chunk);
}

void PretrainedEncoder::encode_vocab_merges(const VocabMerges& vm, std::string_view chunk, WordTokens& out) const {
  out.ids.clear();
  out.pieces.clear();
  out.unk = false;

  struct Sym {
    std::string text;
    bool mergeable;
  };
  std::vector<Sym> syms;
  if (vm.byte_level) {
    const auto& map = byte_to_unicode();
    for (unsigned char b : chunk) syms.push_back({map[b], true});
  } else {
    for (auto ch : utf8::split_scalars(chunk)) {
      if (vm.ids.contains(std::string(ch))) {
        syms.push_back({std::string(ch), true});
      } else if (vm.byte_fallback) {
        for (unsigned char b : ch) syms.push_back({byte_token(b), false});
      } else if (vm.unk) {
        syms.push_back({vm.pieces.at(*vm.unk), false});
        out.unk = true;
      } else {
        throw DataError("symbol '" + std::string(ch) + "' is not in the vocabulary and there is no fallback");
      }
    }
  }

  // Merge every occurrence of the lowest-ranked adjacent pair until none is left.
  std::vector<Sym> next;
  while (syms.size() > 1) {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    const std::string* bl = nullptr;
    const std::string* br = nullptr;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      if (!syms[i].mergeable || !syms[i + 1].mergeable) continue;
      auto it = vm.ranks.find(rank_key(syms[i].text, syms[i + 1].text));
      if (it != vm.ranks.end() && it->second < best) {
        best = it->second;
        bl = &syms[i].text;
        br = &syms[i + 1].text;
      }
    }
    if (!bl) break;
    const std::string left = *bl;
    const std::string right = *br;
    next.clear();
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i].mergeable && syms[i + 1].mergeable && syms[i].text == left &&
          syms[i + 1].text == right) {
        next.push_back({left + right, true});
        i += 2;
      } else {
        next.push_back(std::move(syms[i]));
        ++i;
      }
    }
    syms.swap(next);
  }

  for (auto& s : syms) {
    auto it = vm.ids.find(s.text);
    if (it == vm.ids.end()) throw DataError("symbol '" + s.text + "' produced by encoding is not in the vocabulary");
    out.ids.push_back(it->second);
    out.pieces.push_back(std::move(s.text));
  }
}

void PretrainedEncoder::encode_rank_file(const RankFile& rf, std::string_view chunk, WordTokens& out) const {
  out.ids.clear();
  out.pieces.clear();
  out.unk = false;
  auto emit = [&](std::string_view bytes) {
    auto it = rf.ranks.find(std::string(bytes));
    if (it == rf.ranks.end()) throw DataError("byte sequence has no rank in the rank file");
    out.ids.push_back(static_cast<TokenId>(it->second));
    out.pieces.emplace_back(bytes);
  };
  if (rf.ranks.contains(std::string(chunk))) return emit(chunk);

  constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
  // Part boundaries; rank[i] is the rank of bytes [bounds[i], bounds[i + 2]).
  std::vector<std::size_t> bounds(chunk.size() + 1);
  for (std::size_t i = 0; i <= chunk.size(); ++i) bounds[i] = i;
  auto pair_rank = [&](std::size_t i) -> std::uint32_t {
    if (i + 2 >= bounds.size()) return kNone;
    auto it = rf.ranks.find(std::string(chunk.substr(bounds[i], bounds[i + 2] - bounds[i])));
    return it == rf.ranks.end() ? kNone : it->second;
  };
  std::vector<std::uint32_t> ranks(bounds.size());
  for (std::size_t i = 0; i < bounds.size(); ++i) ranks[i] = pair_rank(i);
  while (bounds.size() > 2) {
    std::uint32_t best = kNone;
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < ranks.size(); ++i) {
      if (ranks[i] < best) {
        best = ranks[i];
        at = i;
      }
    }
    if (best == kNone) break;
    bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(at) + 1);
    ranks.erase(ranks.begin() + static_cast<std::ptrdiff_t>(at) + 1);
    ranks[at] = pair_rank(at);
    if (at > 0) ranks[at - 1] = pair_rank(at - 1);
  }
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) emit(chunk.substr(bounds[i], bounds[i + 1] - bounds[i]));
}

std::string PretrainedEncoder::decode(std::span<const TokenId> ids) const {
  std::string out;
  if (auto* um = std::get_if<UnigramModel>(&data_)) return um->decode(ids);
  if (auto* rf = std::get_if<RankFile>(&data_)) {
    for (TokenId id : ids) {
      auto it = id < 0 ? rf->bytes.end() : rf->bytes.find(static_cast<std::uint32_t>(id));
      if (it == rf->bytes.end()) throw DataError("token id " + std::to_string(id) + " is not in the rank file");
      out += it->second;
    }
    return out;
  }
  const auto& vm = std::get<VocabMerges>(data_);
  for (TokenId id : ids) {
    auto it = vm.pieces.find(id);
    if (it == vm.pieces.end()) throw DataError("token id " + std::to_string(id) + " is not in the vocabulary");
    if (vm.byte_level) {
      auto bytes = unicode_string_to_bytes(it->second);
      if (!bytes) throw DataError("piece '" + it->second + "' is not a byte-level symbol");
      out += *bytes;
    } else if (auto b = parse_byte_token(it->second); b && vm.byte_fallback) {
      out.push_back(static_cast<char>(*b));
    } else {
      out += it->second;
    }
  }
  return out;
}

PretrainedEncoder vocab_merges_from_text(std::string_view vocab_json, std::string_view merges,
                                         const VocabMergesOptions& options, std::string_view source) {
  PretrainedEncoder::VocabMerges vm;
  vm.byte_level = options.byte_level;
  const std::string src(source);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(vocab_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(src + ": vocabulary is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError(src + ": vocabulary must be a JSON object mapping piece to id");
  for (const auto& [piece, id] : j.items()) {
    if (!id.is_number_integer() || id.get<std::int64_t>() < 0 ||
        id.get<std::int64_t>() > std::numeric_limits<TokenId>::max()) {
      throw DataError(src + ": vocabulary entry '" + piece + "' has a non-integer or negative id");
    }
    const auto tid = static_cast<TokenId>(id.get<std::int64_t>());
    if (!vm.pieces.emplace(tid, piece).second) {
      throw DataError(src + ": id " + std::to_string(tid) + " is assigned to more than one piece");
    }
    vm.ids.emplace(piece, tid);
  }

  if (vm.byte_level) {
    for (const auto& s : byte_to_unicode()) {
      if (!vm.ids.contains(s)) throw DataError(src + ": byte-level vocabulary lacks the symbol '" + s + "'");
    }
  } else {
    vm.byte_fallback = true;
    for (int b = 0; b < 256 && vm.byte_fallback; ++b) {
      vm.byte_fallback = vm.ids.contains(byte_token(static_cast<unsigned char>(b)));
    }
    if (options.unk_token) {
      auto it = vm.ids.find(*options.unk_token);
      if (it != vm.ids.end()) vm.unk = it->second;
    }
  }

  std::uint32_t rank = 0;
  for_each_line(merges, [&](std::size_t line_no, std::string_view line) {
    if (line.empty() || line.starts_with("#version") || line.starts_with("#!")) return;
    auto pair = parse_merge_line(line);
    const std::string where = src + ":" + std::to_string(line_no) + ": ";
    if (!pair) throw DataError(where + "malformed merge line");
    auto& [l, r] = *pair;
    for (const auto* s : {&l, &r}) {
      if (!vm.ids.contains(*s)) throw DataError(where + "merge references unknown symbol '" + *s + "'");
    }
    if (!vm.ids.contains(l + r)) throw DataError(where + "merged symbol '" + l + r + "' is not in the vocabulary");
    if (!vm.ranks.emplace(rank_key(l, r), rank).second) throw DataError(where + "duplicate merge");
    ++rank;
  });

  PretrainedEncoder enc(EncoderKind::vocab_merges_bpe, std::move(vm));
  if (!options.pattern.empty()) enc.splitter_.emplace(options.pattern);
  return enc;
}

PretrainedEncoder load_vocab_merges(const std::filesystem::path& vocab_path, const std::filesystem::path& merges_path,
                                    const VocabMergesOptions& options) {
  return vocab_merges_from_text(read_file(vocab_path), read_file(merges_path), options,
                                vocab_path.string() + "|" + merges_path.string());
}

std::optional<std::string> base64_decode(std::string_view in) {
  std::string out(in.size() / 4 * 3, '\0');
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), in.data(), in.size(), nullptr, &len,
                        &end, sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != in.data() + in.size()) {
    return std::nullopt;
  }
  out.resize(len);
  return out;
}

std::string base64_encode(std::string_view bytes) {
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

PretrainedEncoder rank_file_from_text(std::string_view text, const std::string& pattern, std::string_view source) {
  PretrainedEncoder::RankFile rf;
  const std::string src(source);
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) return;
    const std::string where = src + ":" + std::to_string(line_no) + ": ";
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos || line.find(' ', sp + 1) != std::string_view::npos) {
      throw DataError(where + "expected '<base64> <rank>'");
    }
    auto bytes = base64_decode(line.substr(0, sp));
    if (!bytes || bytes->empty()) throw DataError(where + "bad base64 token");
    const auto rank_text = line.substr(sp + 1);
    std::uint32_t rank = 0;
    auto [ptr, ec] = std::from_chars(rank_text.data(), rank_text.data() + rank_text.size(), rank);
    if (ec != std::errc() || ptr != rank_text.data() + rank_text.size() ||
        rank > static_cast<std::uint32_t>(std::numeric_limits<TokenId>::max())) {
      throw DataError(where + "bad rank '" + std::string(rank_text) + "'");
    }
    if (!rf.bytes.emplace(rank, *bytes).second) throw DataError(where + "duplicate rank " + std::to_string(rank));
    if (!rf.ranks.emplace(*bytes, rank).second) throw DataError(where + "duplicate token bytes");
  });
  PretrainedEncoder enc(EncoderKind::rank_file_bpe, std::move(rf));
  if (!pattern.empty()) enc.splitter_.emplace(pattern);
  return enc;
}

PretrainedEncoder load_rank_file(const std::filesystem::path& path, const std::string& pattern) {
  return rank_file_from_text(read_file(path), pattern, path.string());
}

PretrainedEncoder load_unigram_tsv(const std::filesystem::path& path) {
  return PretrainedEncoder(EncoderKind::unigram_tsv, load_unigram(path));
}

PretrainedEncoder make_byte_baseline() {
  PretrainedEncoder::VocabMerges vm;
  vm.byte_level = true;
  const auto& map = byte_to_unicode();
  for (int b = 0; b < 256; ++b) {
    vm.ids.emplace(map[static_cast<std::size_t>(b)], b);
    vm.pieces.emplace(b, map[static_cast<std::size_t>(b)]);
  }
  return PretrainedEncoder(EncoderKind::vocab_merges_bpe, std::move(vm));
}

TokenSeq encode_baseline(const PretrainedEncoder& enc, std::string_view text, const PretokenPolicy& policy) {
  return encode_words(text, policy, [&enc](std::string_view w, WordTokens& out) { enc.encode_word(w, out); });
}

std::string decode_baseline(const PretrainedEncoder& enc, std::span<const TokenId> ids) { return enc.decode(ids); }

}  // namespace subtok
