// Structural invariants checked over random inputs.

#include <map>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "subtok/bpe.hpp"
#include "subtok/corpus.hpp"
#include "subtok/metrics.hpp"
#include "subtok/unicode.hpp"
#include "subtok/wordpiece.hpp"
#include "test_util.hpp"

using namespace subtok;

namespace {

bool has_whitespace(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (is_whitespace(utf8::decode(s, pos))) return true;
  }
  return false;
}

}  // namespace

TEST(WordCountsProperty, TotalsAndKeysMatchCounts) {
  oracle::Rng rng(71);
  for (int iter = 0; iter < 100; ++iter) {
    const auto alphabet = oracle::random_alphabet(rng, 5);
    WordCounts wc;
    std::map<std::string, std::uint64_t> ref;
    for (int k = std::uniform_int_distribution<int>(0, 40)(rng); k > 0; --k) {
      const std::string w = oracle::random_word(rng, alphabet, 1, 5);
      const std::uint64_t n = std::uniform_int_distribution<std::uint64_t>(1, 4)(rng);
      wc.add(w, n);
      ref[w] += n;
    }
    std::uint64_t sum = 0;
    for (const auto& e : wc) {
      ASSERT_GE(e.count, 1u);
      ASSERT_EQ(e.count, ref.at(e.word));
      sum += e.count;
    }
    ASSERT_EQ(wc.total_words(), sum);
    ASSERT_EQ(wc.distinct_words(), ref.size());
  }
}

TEST(WordCountsProperty, KeysNeverContainDelimiters) {
  oracle::Rng rng(72);
  for (PretokenMode mode : {PretokenMode::whitespace, PretokenMode::tsheg_syllable}) {
    PretokenPolicy policy;
    policy.mode = mode;
    policy.normalization = Normalization::none;
    std::string text;
    for (int i = 0; i < 300; ++i) text += oracle::random_utf8(rng, 30) + (i % 3 == 0 ? "་" : "") + "\n";
    const WordCounts wc = count_words(corpus_from_text(text, policy), policy);
    ASSERT_FALSE(wc.empty());
    for (const auto& e : wc) {
      ASSERT_FALSE(e.word.empty());
      ASSERT_FALSE(has_whitespace(e.word)) << e.word;
      if (mode == PretokenMode::tsheg_syllable) {
        // A tsheg may only close a syllable.
        const auto pos = e.word.find("་");
        ASSERT_TRUE(pos == std::string::npos || pos + 3 == e.word.size()) << e.word;
      }
    }
  }
}

TEST(CorpusProperty, CharCountAndNormalization) {
  oracle::Rng rng(73);
  std::string text;
  // Decomposed sequences NFC must compose: e + combining acute, A + ring.
  for (int i = 0; i < 200; ++i) text += oracle::random_utf8(rng, 20) + (i % 4 == 0 ? "e\xCC\x81 A\xCC\x8A" : "") + "\n";
  testutil::TempDir dir;
  testutil::write(dir / "c.txt", text);
  const Corpus c = load_corpus(dir / "c.txt", PretokenPolicy{});
  std::size_t scalars = 0;
  for (const auto& d : c.documents) {
    ASSERT_FALSE(utf8::find_invalid(d).has_value());
    ASSERT_EQ(normalize_nfc(d), d);
    scalars += utf8::count_scalars(d);
  }
  EXPECT_EQ(c.char_count, scalars);
}

TEST(BpeProperty, MergeTableAndVocabStructure) {
  oracle::Rng rng(74);
  for (int iter = 0; iter < 40; ++iter) {
    const auto alphabet = oracle::random_alphabet(rng, 3 + iter % 6);
    const WordCounts wc = oracle::random_word_counts(rng, alphabet, 40, 9, 8);
    BpeTrainerConfig cfg;
    cfg.min_frequency = 1;
    cfg.byte_fallback = iter % 2 == 0;
    const std::size_t base = bpe_base_vocab_size(wc, cfg);
    const BpeModel m = train_bpe(wc, base + 30, cfg);
    const Vocab& v = m.vocab();

    ASSERT_EQ(v.piece(0), "<unk>");  // specials first
    ASSERT_EQ(v.size(), base + m.merges().size());
    ASSERT_LE(v.size(), base + 30);
    for (const auto& ch : alphabet) {
      if (wc.count(ch) || std::any_of(wc.begin(), wc.end(), [&](const auto& e) { return e.word.find(ch) != std::string::npos; })) {
        ASSERT_TRUE(v.contains(ch)) << ch;
      }
    }
    std::set<std::string> seen;
    std::set<std::string> available;
    for (TokenId id = 0; static_cast<std::size_t>(id) < base; ++id) available.insert(v.piece(id));
    for (std::size_t r = 0; r < m.merges().size(); ++r) {
      const auto& [l, rt] = m.merges()[r];
      ASSERT_TRUE(seen.insert(l + '\x1f' + rt).second) << "duplicate pair at rank " << r;
      ASSERT_TRUE(available.count(l) && available.count(rt)) << "rank " << r << " uses a later symbol";
      ASSERT_TRUE(v.contains(l + rt));
      available.insert(l + rt);
    }
    // Ids are dense and the id <-> piece map is a bijection.
    for (TokenId id = 0; static_cast<std::size_t>(id) < v.size(); ++id) ASSERT_EQ(v.find(v.piece(id)), id);
  }
}

TEST(BpeProperty, TokensPerWordNeverGrowWithVocab) {
  const Corpus corpus = load_corpus(testutil::data_dir() / "tibetan_corpus.txt", PretokenPolicy{});
  Corpus part;
  part.documents.assign(corpus.documents.begin(), corpus.documents.begin() + 3000);
  const WordCounts wc = count_words(part, PretokenPolicy{});
  const BpeModel small = train_bpe(wc, 1000);
  const BpeModel big = train_bpe(wc, 3000);
  const WordCounts eval = extract_words(read_dataset_tokens(testutil::data_dir() / "tibetan_dataset.txt"));
  std::size_t fewer = 0;
  for (const auto& e : eval) {
    WordTokens a;
    WordTokens b;
    small.encode_word(e.word, a);
    big.encode_word(e.word, b);
    ASSERT_LE(b.ids.size(), a.ids.size()) << e.word;
    fewer += b.ids.size() < a.ids.size();
  }
  EXPECT_GT(fewer, 0u);
}

TEST(WordPieceProperty, VocabularyWordsHaveFertilityOne) {
  oracle::Rng rng(75);
  const auto alphabet = oracle::random_alphabet(rng, 6);
  const WordCounts wc = oracle::random_word_counts(rng, alphabet, 60, 8, 9);
  const WordPieceModel m = train_wordpiece(wc, wordpiece_base_vocab_size(wc) + 80);
  std::string text;
  for (const auto& p : m.vocab().pieces()) {
    if (p == m.unk_token() || p.rfind(m.continuation_prefix(), 0) == 0) continue;
    text += p + " ";
  }
  PretokenPolicy raw;
  raw.normalization = Normalization::none;
  const TokenSeq ts = encode_wordpiece(m, text, raw);
  ASSERT_FALSE(ts.word_spans.empty());
  EXPECT_FALSE(ts.has_unk());
  EXPECT_DOUBLE_EQ(fertility(ts), 1.0);
  EXPECT_EQ(pcw(ts).continued, 0u);
}
