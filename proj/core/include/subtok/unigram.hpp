#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "subtok/corpus.hpp"
#include "subtok/token_seq.hpp"
#include "subtok/vocab.hpp"

namespace subtok {

struct UnigramPiece {
  std::string piece;
  double log_prob;

  friend bool operator==(const UnigramPiece&, const UnigramPiece&) = default;
};

/// Segmentation lattice of one word. Positions are scalar offsets; an edge
/// spells word[start, end) with piece `piece` (or the unknown token when
/// piece == kUnkPiece).
struct Lattice {
  static constexpr std::size_t kUnkPiece = std::numeric_limits<std::size_t>::max();
  struct Edge {
    std::size_t start;
    std::size_t end;
    std::size_t piece;
    double log_prob;
  };
  std::size_t length = 0;                     // number of scalars
  std::vector<std::size_t> byte_offset;       // length + 1 entries
  std::vector<std::vector<Edge>> ending_at;   // edges indexed by end position
  std::vector<std::vector<Edge>> starting_at; // edges indexed by start position
};

struct Segmentation {
  std::vector<std::size_t> pieces;  // piece indices (Lattice::kUnkPiece for unknown)
  std::vector<std::string> surfaces;
  double score = 0.0;
  bool unk = false;
};

/// Unigram language model over pieces. Token ids: the unknown token (if any)
/// is id 0, piece i has id i + 1 (or i without an unknown token).
/// Every single-scalar piece is a required character and survives pruning.
class UnigramModel {
 public:
  UnigramModel(std::vector<UnigramPiece> pieces, std::optional<std::string> unk_token = "<unk>");

  const std::vector<UnigramPiece>& pieces() const { return pieces_; }
  const std::optional<std::string>& unk_token() const { return unk_token_; }
  std::optional<std::size_t> find(std::string_view piece) const;
  bool is_required(std::size_t piece) const { return required_[piece]; }
  std::size_t required_count() const;
  std::size_t max_piece_chars() const { return max_piece_chars_; }
  double min_log_prob() const { return min_log_prob_; }

  std::size_t vocab_size() const { return pieces_.size() + (unk_token_ ? 1 : 0); }
  TokenId id_of(std::size_t piece) const { return static_cast<TokenId>(piece + (unk_token_ ? 1 : 0)); }
  std::optional<TokenId> unk_id() const { return unk_token_ ? std::optional<TokenId>(0) : std::nullopt; }
  const std::string& id_to_piece(TokenId id) const;

  /// `excluded` removes one piece from the lattice (used by pruning);
  /// `allow_unk` adds unknown-token edges for scalars lacking a piece.
  Lattice lattice(std::string_view word, bool allow_unk, std::size_t excluded = Lattice::kUnkPiece) const;

  void encode_word(std::string_view word, WordTokens& out) const;
  std::string decode(std::span<const TokenId> ids) const;

  /// Score given to an unknown-token edge.
  double unk_log_prob() const { return min_log_prob_ - 10.0; }

  friend bool operator==(const UnigramModel& a, const UnigramModel& b) {
    return a.pieces_ == b.pieces_ && a.unk_token_ == b.unk_token_;
  }

 private:
  std::vector<UnigramPiece> pieces_;
  std::optional<std::string> unk_token_;
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
  std::vector<bool> required_;
  std::size_t max_piece_chars_ = 1;
  double min_log_prob_ = 0.0;
};

struct UnigramTrainerConfig {
  std::size_t seed_size = 0;            // 0: 4 x vocab_size
  std::size_t max_piece_length = 16;    // in scalars
  std::size_t em_iters = 2;             // EM steps per pruning round
  double shrink_factor = 0.75;
  double character_coverage = 1.0;
  std::optional<std::string> unk_token = "<unk>";
};

/// Candidate pieces: every substring up to max_piece_length, ranked by
/// frequency x length. All single scalars are kept; log-probs are the log of
/// normalized frequencies.
UnigramModel seed_vocab(const WordCounts& wc, std::size_t seed_size, std::size_t max_piece_length,
                        std::optional<std::string> unk_token = "<unk>");

/// log P(word) summed over all segmentations, or -inf if not coverable.
double word_log_likelihood(const UnigramModel& model, std::string_view word);

struct EmResult {
  UnigramModel model;
  double log_likelihood;  // corpus log-likelihood under the input model
};

/// One EM iteration: forward-backward expected counts, then renormalization.
/// Pieces whose expected count is exactly zero are dropped (never required ones).
EmResult em_step(const UnigramModel& model, const WordCounts& wc);

/// Best segmentation; ties prefer fewer pieces, then a longer leftmost piece.
Segmentation viterbi_segment(const UnigramModel& model, std::string_view word, bool allow_unk = true);
Segmentation viterbi_segment(const Lattice& lattice, std::string_view word);

/// Viterbi log-likelihood loss of removing each piece (0 for required pieces
/// and pieces on no best path), indexed like model.pieces().
std::vector<double> removal_losses(const UnigramModel& model, const WordCounts& wc);

/// Drops the lowest-loss (1 - keep_fraction) share of the removable
/// (non-required) pieces and renormalizes.
UnigramModel prune(const UnigramModel& model, const WordCounts& wc, double keep_fraction);

/// Drops lowest-loss removable pieces until at most `target_pieces` remain
/// (never below the required characters).
UnigramModel prune_to_size(const UnigramModel& model, const WordCounts& wc, std::size_t target_pieces);

/// Scalars covering `coverage` of all scalar occurrences, most frequent first.
std::vector<std::string> covered_characters(const WordCounts& wc, double coverage);

UnigramModel train_unigram(const WordCounts& wc, std::size_t vocab_size, const UnigramTrainerConfig& config = {});

TokenSeq encode_unigram(const UnigramModel& model, std::string_view text, const PretokenPolicy& policy);
std::string decode_unigram(const UnigramModel& model, std::span<const TokenId> ids);

/// "#! unigram v1" header, a "#! " JSON metadata line, then "piece<TAB>log_prob" per line.
void save_unigram(const UnigramModel& model, const std::filesystem::path& path);
UnigramModel load_unigram(const std::filesystem::path& path);
std::string unigram_text(const UnigramModel& model);
UnigramModel parse_unigram(std::string_view text, std::string_view source = "<memory>");

}  // namespace subtok
