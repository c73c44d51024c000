#include "subtok/tokenizer.hpp"

#include <fstream>

#include "subtok/error.hpp"

namespace subtok {

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::bpe: return "bpe";
    case Algorithm::wordpiece: return "wordpiece";
    case Algorithm::unigram: return "unigram";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "bpe") return Algorithm::bpe;
  if (name == "wordpiece") return Algorithm::wordpiece;
  if (name == "unigram") return Algorithm::unigram;
  throw UsageError("unknown algorithm '" + std::string(name) + "' (expected bpe, wordpiece or unigram)");
}

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

std::string Tokenizer::kind() const {
  return std::visit(overloaded{[](const BpeModel&) { return std::string("bpe"); },
                               [](const WordPieceModel&) { return std::string("wordpiece"); },
                               [](const UnigramModel&) { return std::string("unigram"); },
                               [](const PretrainedEncoder& e) { return std::string(to_string(e.kind())); }},
                    model_);
}

std::size_t Tokenizer::vocab_size() const {
  return std::visit(overloaded{[](const BpeModel& m) { return m.vocab().size(); },
                               [](const WordPieceModel& m) { return m.vocab().size(); },
                               [](const UnigramModel& m) { return m.vocab_size(); },
                               [](const PretrainedEncoder& e) { return e.vocab_size(); }},
                    model_);
}

void Tokenizer::encode_word(std::string_view word, WordTokens& out) const {
  std::visit([&](const auto& m) { m.encode_word(word, out); }, model_);
}

TokenSeq Tokenizer::encode(std::string_view text, const PretokenPolicy& policy) const {
  return encode_words(text, policy, [this](std::string_view w, WordTokens& out) { encode_word(w, out); });
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  return std::visit([&](const auto& m) { return m.decode(ids); }, model_);
}

std::string Tokenizer::detokenize(const TokenSeq& seq) const {
  return subtok::detokenize(seq, [this](std::span<const TokenId> ids) { return decode(ids); });
}

Tokenizer train_tokenizer(const WordCounts& wc, const TrainOptions& options, std::string name) {
  if (options.vocab_size == 0) throw UsageError("vocab_size must be positive");
  if (name.empty()) name = std::string(to_string(options.algorithm)) + "-" + std::to_string(options.vocab_size);
  switch (options.algorithm) {
    case Algorithm::bpe: return Tokenizer(std::move(name), train_bpe(wc, options.vocab_size, options.bpe));
    case Algorithm::wordpiece:
      return Tokenizer(std::move(name), train_wordpiece(wc, options.vocab_size, options.wordpiece));
    case Algorithm::unigram:
      return Tokenizer(std::move(name), train_unigram(wc, options.vocab_size, options.unigram));
  }
  throw InternalError("unhandled algorithm");
}

std::vector<std::pair<std::string, std::string>> serialize_tokenizer(const Tokenizer& tok) {
  return std::visit(
      overloaded{[](const BpeModel& m) {
                   return std::vector<std::pair<std::string, std::string>>{{".vocab", bpe_vocab_text(m)},
                                                                           {".merges", bpe_merges_text(m)}};
                 },
                 [](const WordPieceModel& m) {
                   return std::vector<std::pair<std::string, std::string>>{{".wordpiece", wordpiece_text(m)}};
                 },
                 [](const UnigramModel& m) {
                   return std::vector<std::pair<std::string, std::string>>{{".unigram", unigram_text(m)}};
                 },
                 [](const PretrainedEncoder&) -> std::vector<std::pair<std::string, std::string>> {
                   throw UsageError("baseline encoders cannot be saved");
                 }},
      tok.model());
}

std::vector<std::filesystem::path> save_tokenizer(const Tokenizer& tok, const std::filesystem::path& prefix) {
  std::vector<std::filesystem::path> written;
  for (const auto& [ext, text] : serialize_tokenizer(tok)) {
    auto path = prefix;
    path += ext;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
    written.push_back(std::move(path));
  }
  return written;
}

namespace {

std::string first_line(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::filesystem::path plus(std::filesystem::path p, const char* ext) {
  p += ext;
  return p;
}

std::string model_name(const std::filesystem::path& path) {
  auto stem = path.filename();
  const auto ext = stem.extension();
  if (ext == ".vocab" || ext == ".merges" || ext == ".wordpiece" || ext == ".unigram") stem.replace_extension();
  return stem.string();
}

}  // namespace

Tokenizer load_model(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const auto ext = path.extension();
  const auto name = model_name(path);
  if (ext == ".vocab" || ext == ".merges") return Tokenizer(name, load_bpe(path));
  if (!fs::is_regular_file(path)) {
    if (fs::exists(plus(path, ".merges"))) return Tokenizer(name, load_bpe(path));
    if (fs::exists(plus(path, ".wordpiece"))) return Tokenizer(name, load_wordpiece(plus(path, ".wordpiece")));
    if (fs::exists(plus(path, ".unigram"))) return Tokenizer(name, load_unigram(plus(path, ".unigram")));
    throw DataError("no model found at " + path.string());
  }
  const auto head = first_line(path);
  if (head.starts_with("#! unigram")) return Tokenizer(name, load_unigram(path));
  if (head.find("\"wordpiece/v1\"") != std::string::npos) return Tokenizer(name, load_wordpiece(path));
  if (head.find("\"bpe/v1\"") != std::string::npos) return Tokenizer(name, load_bpe(path));
  throw DataError(path.string() + ": unrecognized model format");
}

Tokenizer load_baseline(std::string_view spec) {
  namespace fs = std::filesystem;
  const auto colon = spec.find(':');
  std::string kind(spec.substr(0, colon));
  const std::string args = colon == std::string_view::npos ? std::string() : std::string(spec.substr(colon + 1));
  if (kind == "gpt2") kind = "vocab_merges";
  if (kind == "tiktoken") kind = "rank_file";

  auto need_args = [&] {
    if (args.empty()) throw UsageError("baseline '" + kind + "' needs a path: " + kind + ":<path>");
  };
  auto stem_name = [&](const std::string& path) { return kind + ":" + fs::path(path).stem().string(); };

  if (kind == "bytes") return Tokenizer("bytes", make_byte_baseline());
  if (kind == "vocab_merges" || kind == "vocab_merges_char") {
    need_args();
    fs::path vocab;
    fs::path merges;
    if (const auto comma = args.find(','); comma != std::string::npos) {
      vocab = args.substr(0, comma);
      merges = args.substr(comma + 1);
    } else if (fs::is_directory(args)) {
      vocab = fs::path(args) / "vocab.json";
      merges = fs::path(args) / "merges.txt";
    } else {
      throw UsageError("expected " + kind + ":<vocab.json>,<merges.txt> or a directory holding both");
    }
    VocabMergesOptions opts;
    if (kind == "vocab_merges_char") {
      opts.byte_level = false;
      opts.pattern.clear();
      opts.unk_token = "<unk>";
    }
    const std::string name = kind + ":" + (fs::is_directory(args) ? fs::path(args).filename() : vocab.stem()).string();
    return Tokenizer(name, load_vocab_merges(vocab, merges, opts));
  }
  if (kind == "rank_file") {
    need_args();
    return Tokenizer(stem_name(args), load_rank_file(args));
  }
  if (kind == "unigram_tsv") {
    need_args();
    return Tokenizer(stem_name(args), load_unigram_tsv(args));
  }
  if (kind == "model") {
    need_args();
    return load_model(args);
  }
  throw UsageError("unknown baseline kind '" + kind +
                   "' (expected bytes, vocab_merges, vocab_merges_char, rank_file, unigram_tsv or model)");
}

}  // namespace subtok
