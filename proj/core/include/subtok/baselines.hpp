#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "subtok/corpus.hpp"
#include "subtok/token_seq.hpp"
#include "subtok/unicode.hpp"
#include "subtok/unigram.hpp"

namespace subtok {

enum class EncoderKind { vocab_merges_bpe, rank_file_bpe, unigram_tsv };
std::string_view to_string(EncoderKind kind);

struct VocabMergesOptions {
  bool byte_level = true;             // apply the printable byte <-> scalar mapping
  std::string pattern = kGpt2Pattern; // empty: no splitting inside a word
  std::optional<std::string> unk_token;
};

/// A tokenizer loaded from a third-party file format. Encoders are immutable
/// and safe to share across threads.
class PretrainedEncoder {
 public:
  EncoderKind kind() const { return kind_; }
  /// Pre-tokenization pattern applied inside each word; empty if none.
  std::string pattern() const { return splitter_ ? splitter_->pattern() : std::string(); }
  std::size_t vocab_size() const;
  bool byte_level() const;

  void encode_word(std::string_view word, WordTokens& out) const;
  std::string decode(std::span<const TokenId> ids) const;

 private:
  struct VocabMerges {
    std::unordered_map<std::string, TokenId> ids;
    std::unordered_map<TokenId, std::string> pieces;
    std::unordered_map<std::string, std::uint32_t> ranks;  // key: left '\xFF' right
    bool byte_level = true;
    bool byte_fallback = false;
    std::optional<TokenId> unk;
  };
  struct RankFile {
    std::unordered_map<std::string, std::uint32_t> ranks;
    std::unordered_map<std::uint32_t, std::string> bytes;
  };

  void encode_vocab_merges(const VocabMerges& vm, std::string_view chunk, WordTokens& out) const;
  void encode_rank_file(const RankFile& rf, std::string_view chunk, WordTokens& out) const;

  EncoderKind kind_ = EncoderKind::vocab_merges_bpe;
  std::optional<RegexSplitter> splitter_;
  std::variant<VocabMerges, RankFile, UnigramModel> data_;

  PretrainedEncoder(EncoderKind kind, std::variant<VocabMerges, RankFile, UnigramModel> data)
      : kind_(kind), data_(std::move(data)) {}

  friend PretrainedEncoder vocab_merges_from_text(std::string_view, std::string_view, const VocabMergesOptions&,
                                                  std::string_view);
  friend PretrainedEncoder rank_file_from_text(std::string_view, const std::string&, std::string_view);
  friend PretrainedEncoder load_unigram_tsv(const std::filesystem::path&);
  friend PretrainedEncoder make_byte_baseline();
};

/// vocab: JSON object piece -> id. merges: one "left right" per line, with an
/// optional leading "#version" line.
PretrainedEncoder load_vocab_merges(const std::filesystem::path& vocab_path, const std::filesystem::path& merges_path,
                                    const VocabMergesOptions& options = {});
PretrainedEncoder vocab_merges_from_text(std::string_view vocab_json, std::string_view merges,
                                         const VocabMergesOptions& options = {}, std::string_view source = "<memory>");

/// Rank file: "base64(token bytes) rank" per line; token id = rank.
PretrainedEncoder load_rank_file(const std::filesystem::path& path, const std::string& pattern = kO200kPattern);
PretrainedEncoder rank_file_from_text(std::string_view text, const std::string& pattern = kO200kPattern,
                                      std::string_view source = "<memory>");

PretrainedEncoder load_unigram_tsv(const std::filesystem::path& path);

/// Byte-level encoder with no merges: one token per UTF-8 byte.
PretrainedEncoder make_byte_baseline();

TokenSeq encode_baseline(const PretrainedEncoder& enc, std::string_view text, const PretokenPolicy& policy);
std::string decode_baseline(const PretrainedEncoder& enc, std::span<const TokenId> ids);

std::optional<std::string> base64_decode(std::string_view in);
std::string base64_encode(std::string_view bytes);

}  // namespace subtok
