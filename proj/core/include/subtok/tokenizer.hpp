#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "subtok/baselines.hpp"
#include "subtok/bpe.hpp"
#include "subtok/corpus.hpp"
#include "subtok/token_seq.hpp"
#include "subtok/unigram.hpp"
#include "subtok/wordpiece.hpp"

namespace subtok {

enum class Algorithm { bpe, wordpiece, unigram };
std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

/// Uniform handle over trained models and pretrained baselines.
class Tokenizer {
 public:
  using Model = std::variant<BpeModel, WordPieceModel, UnigramModel, PretrainedEncoder>;

  Tokenizer(std::string name, Model model) : name_(std::move(name)), model_(std::move(model)) {}

  const std::string& name() const { return name_; }
  const Model& model() const { return model_; }
  /// "bpe", "wordpiece", "unigram" or the baseline encoder kind.
  std::string kind() const;
  std::size_t vocab_size() const;

  void encode_word(std::string_view word, WordTokens& out) const;
  TokenSeq encode(std::string_view text, const PretokenPolicy& policy) const;
  /// Concatenates the surfaces of `ids` (no inter-word text).
  std::string decode(std::span<const TokenId> ids) const;
  /// Exact inverse of encode, using the gaps recorded in `seq`.
  std::string detokenize(const TokenSeq& seq) const;

 private:
  std::string name_;
  Model model_;
};

struct TrainOptions {
  Algorithm algorithm = Algorithm::bpe;
  std::size_t vocab_size = 0;
  BpeTrainerConfig bpe;
  WordPieceTrainerConfig wordpiece;
  UnigramTrainerConfig unigram;
};

Tokenizer train_tokenizer(const WordCounts& wc, const TrainOptions& options, std::string name = {});

/// Serializes the model's files next to `prefix` and returns their paths.
/// Baseline encoders cannot be saved.
std::vector<std::filesystem::path> save_tokenizer(const Tokenizer& tok, const std::filesystem::path& prefix);
/// File contents keyed by extension, as save_tokenizer would write them.
std::vector<std::pair<std::string, std::string>> serialize_tokenizer(const Tokenizer& tok);

/// Loads a saved model, detecting the format from the file name or header.
/// Accepts a BPE prefix, any BPE file, a ".wordpiece" file or a ".unigram" file.
Tokenizer load_model(const std::filesystem::path& path);

/// Parses "<kind>[:<args>]". Kinds: bytes; vocab_merges:VOCAB,MERGES (or a
/// directory holding vocab.json and merges.txt); vocab_merges_char:VOCAB,MERGES;
/// rank_file:PATH; unigram_tsv:PATH; model:PATH. Aliases: gpt2, tiktoken.
Tokenizer load_baseline(std::string_view spec);

}  // namespace subtok
