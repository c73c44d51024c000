#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "subtok/corpus.hpp"
#include "subtok/token_seq.hpp"
#include "subtok/vocab.hpp"

namespace subtok {

struct WordPieceTrainerConfig {
  std::string continuation_prefix = "##";
  std::string unk_token = "[UNK]";
  std::vector<std::string> specials;  // extra reserved tokens after unk_token
  std::size_t max_word_chars = 100;
  std::uint64_t min_frequency = 1;    // pairs below this count are never merged
  double min_score = 0.0;             // stop once the best score is <= this
};

/// Greedy longest-match WordPiece model. Pieces starting with the
/// continuation prefix are exactly the non-initial pieces.
class WordPieceModel {
 public:
  WordPieceModel(Vocab vocab, std::string continuation_prefix = "##", std::string unk_token = "[UNK]",
                 std::size_t max_word_chars = 100);

  const Vocab& vocab() const { return vocab_; }
  const std::string& continuation_prefix() const { return prefix_; }
  const std::string& unk_token() const { return unk_token_; }
  std::size_t max_word_chars() const { return max_word_chars_; }
  TokenId unk_id() const { return unk_id_; }

  void encode_word(std::string_view word, WordTokens& out) const;
  std::string decode(std::span<const TokenId> ids) const;

 private:
  Vocab vocab_;
  std::string prefix_;
  std::string unk_token_;
  std::size_t max_word_chars_;
  TokenId unk_id_ = 0;
  std::size_t max_piece_chars_ = 1;
};

/// Merge score count(pair) / (count(left) * count(right)), compared exactly.
/// Ties: higher pair count, then lexicographic (left, right).
WordPieceModel train_wordpiece(const WordCounts& wc, std::size_t vocab_size,
                               const WordPieceTrainerConfig& config = {});

/// Initial vocabulary size (unk + specials + every initial/continuation character).
std::size_t wordpiece_base_vocab_size(const WordCounts& wc, const WordPieceTrainerConfig& config = {});

TokenSeq encode_wordpiece(const WordPieceModel& model, std::string_view text, const PretokenPolicy& policy);
std::string decode_wordpiece(const WordPieceModel& model, std::span<const TokenId> ids);

/// One piece per line after a "#! " JSON metadata header; line i+1 holds id i.
void save_wordpiece(const WordPieceModel& model, const std::filesystem::path& path);
WordPieceModel load_wordpiece(const std::filesystem::path& path);
std::string wordpiece_text(const WordPieceModel& model);

}  // namespace subtok
