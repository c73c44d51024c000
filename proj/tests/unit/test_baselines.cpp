#include <algorithm>

#include <gtest/gtest.h>

#include "json.hpp"
#include "oracles.hpp"
#include "subtok/baselines.hpp"
#include "subtok/bpe.hpp"
#include "subtok/error.hpp"
#include "subtok/tokenizer.hpp"
#include "subtok/unicode.hpp"
#include "test_util.hpp"

using namespace subtok;

namespace {

PretokenPolicy raw_policy() {
  PretokenPolicy p;
  p.normalization = Normalization::none;
  return p;
}

std::string byte_vocab_json(const std::vector<std::string>& extra = {}) {
  nlohmann::json j = nlohmann::json::object();
  int id = 0;
  for (const auto& s : byte_to_unicode()) j[s] = id++;
  for (const auto& s : extra) j[s] = id++;
  return j.dump();
}

std::string rank_line(std::string_view bytes, int rank) { return base64_encode(bytes) + " " + std::to_string(rank) + "\n"; }

// All 256 single bytes plus a handful of English merges.
std::string latin_rank_file() {
  std::string text;
  int rank = 0;
  for (int b = 0; b < 256; ++b) text += rank_line(std::string(1, static_cast<char>(b)), rank++);
  for (const char* m : {"th", "he", "the", " t", " the", "in", "ing", "er", "an", "and"}) text += rank_line(m, rank++);
  return text;
}

VocabMergesOptions char_options() {
  VocabMergesOptions o;
  o.byte_level = false;
  o.pattern.clear();
  o.unk_token = "<unk>";
  return o;
}

}  // namespace

TEST(VocabMerges, AgreesWithBpeOnToyTable) {
  Vocab v;
  v.add("<unk>");
  for (const char* p : {"a", "b", "aa", "ab"}) v.add(p);
  BpeOptions opts;
  opts.byte_fallback = false;
  const BpeModel bpe(v, MergeTable({{"a", "a"}, {"a", "b"}}), opts);
  const PretrainedEncoder enc =
      vocab_merges_from_text(oracle::vocab_json(v), "#version: 0.2\na a\na b\n", char_options());
  const TokenSeq a = encode_bpe(bpe, "aaab", raw_policy());
  const TokenSeq b = encode_baseline(enc, "aaab", raw_policy());
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(b.pieces, (std::vector<std::string>{"aa", "ab"}));
}

TEST(VocabMerges, EmptyMergesIsPureByteLevel) {
  const PretrainedEncoder enc = vocab_merges_from_text(byte_vocab_json(), "");
  EXPECT_TRUE(enc.byte_level());
  for (std::string word : {"hello", "ཀ་ཁ།", "a\xC3\xA9"}) {
    const TokenSeq ts = encode_baseline(enc, word, raw_policy());
    EXPECT_EQ(ts.size(), word.size()) << word;
    EXPECT_EQ(decode_baseline(enc, ts.ids), word);
  }
}

TEST(VocabMerges, ByteLevelMergesApply) {
  const auto& m = byte_to_unicode();
  const std::string th = m['t'] + m['h'];
  const PretrainedEncoder enc =
      vocab_merges_from_text(byte_vocab_json({th, th + m['e']}), m['t'] + " " + m['h'] + "\n" + th + " " + m['e'] + "\n");
  const TokenSeq ts = encode_baseline(enc, "the then", raw_policy());
  EXPECT_EQ(ts.pieces, (std::vector<std::string>{"the", "the", "n"}));
  EXPECT_EQ(decode_baseline(enc, ts.ids), "thethen");
}

TEST(VocabMerges, MismatchesAreStructuredErrors) {
  Vocab v;
  for (const char* p : {"<unk>", "a", "b", "ab"}) v.add(p);
  const std::string vj = oracle::vocab_json(v);
  EXPECT_NO_THROW(vocab_merges_from_text(vj, "a b\n", char_options()));
  try {
    vocab_merges_from_text(vj, "a b\nb a\n", char_options(), "toy");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("toy:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(vocab_merges_from_text(vj, "a z\n", char_options()), DataError);
  EXPECT_THROW(vocab_merges_from_text(vj, "a b\na b\n", char_options()), DataError);
  EXPECT_THROW(vocab_merges_from_text(vj, "a b c\n", char_options()), DataError);
  EXPECT_THROW(vocab_merges_from_text("[1, 2]", "", char_options()), DataError);
  EXPECT_THROW(vocab_merges_from_text(R"({"a": 0, "b": 0})", "", char_options()), DataError);
  EXPECT_THROW(vocab_merges_from_text(R"({"a": 0})", ""), DataError);  // byte-level needs all 256 symbols
}

TEST(VocabMerges, CharModeFallsBackToUnk) {
  Vocab v;
  for (const char* p : {"<unk>", "a", "b"}) v.add(p);
  const PretrainedEncoder enc = vocab_merges_from_text(oracle::vocab_json(v), "", char_options());
  const TokenSeq ts = encode_baseline(enc, "azb", raw_policy());
  EXPECT_TRUE(ts.has_unk());
  EXPECT_EQ(ts.pieces, (std::vector<std::string>{"a", "<unk>", "b"}));
}

TEST(VocabMerges, LoadsFromFilesAndDirectory) {
  testutil::TempDir dir;
  testutil::write(dir / "vocab.json", byte_vocab_json());
  testutil::write(dir / "merges.txt", "#version: 0.2\n");
  const Tokenizer t = load_baseline("gpt2:" + dir.path().string());
  EXPECT_EQ(t.kind(), "vocab_merges_bpe");
  EXPECT_EQ(t.encode("ab", raw_policy()).size(), 2u);
  const Tokenizer u =
      load_baseline("vocab_merges:" + (dir / "vocab.json").string() + "," + (dir / "merges.txt").string());
  EXPECT_EQ(u.name(), "vocab_merges:vocab");
}

TEST(RankFile, TwoLineToyRoundTrips) {
  const std::string file = rank_line("a", 0) + rank_line("b", 1);
  const PretrainedEncoder enc = rank_file_from_text(file);
  const TokenSeq ts = encode_baseline(enc, "abba ab", raw_policy());
  EXPECT_EQ(ts.ids, (std::vector<TokenId>{0, 1, 1, 0, 0, 1}));
  EXPECT_EQ(detokenize(ts, [&](std::span<const TokenId> ids) { return decode_baseline(enc, ids); }), "abba ab");
}

TEST(RankFile, LineOrderDoesNotMatter) {
  std::string text = latin_rank_file();
  std::vector<std::string> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl - pos + 1));
    pos = nl + 1;
  }
  oracle::Rng rng(51);
  std::shuffle(lines.begin(), lines.end(), rng);
  std::string shuffled;
  for (const auto& l : lines) shuffled += l;
  const PretrainedEncoder a = rank_file_from_text(text);
  const PretrainedEncoder b = rank_file_from_text(shuffled);
  for (int i = 0; i < 200; ++i) {
    const std::string s = oracle::random_utf8(rng, 30);
    ASSERT_EQ(encode_baseline(a, s, raw_policy()), encode_baseline(b, s, raw_policy()));
  }
}

TEST(RankFile, MergesByLowestRank) {
  const PretrainedEncoder enc = rank_file_from_text(latin_rank_file());
  const TokenSeq ts = encode_baseline(enc, "the thing", raw_policy());
  EXPECT_EQ(ts.pieces, (std::vector<std::string>{"the", "th", "ing"}));
}

TEST(RankFile, TibetanStaysUnmergedUnderLatinRanks) {
  const PretrainedEncoder enc = rank_file_from_text(latin_rank_file());
  const std::string text = "ཀ་ཁ་ག་ང";
  const TokenSeq ts = encode_baseline(enc, text, raw_policy());
  EXPECT_EQ(ts.size(), text.size());  // 3 bytes per scalar, none merged
  EXPECT_GE(ts.size(), 3u * 4u);
}

TEST(RankFile, RejectsBadInput) {
  EXPECT_THROW(rank_file_from_text("!!!! 0\n"), DataError);
  EXPECT_THROW(rank_file_from_text(rank_line("a", 0) + rank_line("b", 0)), DataError);
  EXPECT_THROW(rank_file_from_text(rank_line("a", 0) + rank_line("a", 1)), DataError);
  EXPECT_THROW(rank_file_from_text(base64_encode("a") + " x\n"), DataError);
  EXPECT_THROW(rank_file_from_text(base64_encode("a") + "\n"), DataError);
}

TEST(Base64, RoundTripAndRejects) {
  oracle::Rng rng(52);
  for (int i = 0; i < 200; ++i) {
    std::string bytes;
    for (int n = std::uniform_int_distribution<int>(0, 20)(rng); n > 0; --n) {
      bytes.push_back(static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng)));
    }
    ASSERT_EQ(base64_decode(base64_encode(bytes)), bytes);
  }
  EXPECT_EQ(base64_encode("ab"), "YWI=");
  EXPECT_EQ(base64_decode("YWI="), "ab");
  EXPECT_FALSE(base64_decode("YWI").has_value());
  EXPECT_FALSE(base64_decode("Y*I=").has_value());
}

TEST(ByteBaseline, SnippetRegression) {
  // 100 scalars: 99 three-byte Tibetan scalars and one ASCII space, which the
  // whitespace policy keeps as a gap.
  const std::string snippet = testutil::read(testutil::data_dir() / "dzongkha_snippet.txt");
  ASSERT_EQ(utf8::count_scalars(snippet), 100u);
  ASSERT_EQ(snippet.size(), 298u);
  const PretrainedEncoder enc = make_byte_baseline();
  const TokenSeq ts = encode_baseline(enc, snippet, raw_policy());
  EXPECT_EQ(ts.size(), 297u);
  EXPECT_EQ(ts.word_spans.size(), 2u);
}

TEST(ByteBaseline, TotalAndLossless) {
  const PretrainedEncoder enc = make_byte_baseline();
  EXPECT_TRUE(encode_baseline(enc, "", raw_policy()).empty());
  oracle::Rng rng(53);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = oracle::random_utf8(rng, 30);
    const TokenSeq ts = encode_baseline(enc, s, raw_policy());
    ASSERT_FALSE(ts.has_unk());
    ASSERT_EQ(detokenize(ts, [&](std::span<const TokenId> ids) { return decode_baseline(enc, ids); }), s);
  }
}

TEST(UnigramTsv, LoadsAsBaseline) {
  testutil::TempDir dir;
  testutil::write(dir / "m.tsv", "#! unigram v1\na\t-1\nb\t-1.5\nab\t-0.5\n");
  const Tokenizer t = load_baseline("unigram_tsv:" + (dir / "m.tsv").string());
  EXPECT_EQ(t.kind(), "unigram_tsv");
  EXPECT_EQ(t.name(), "unigram_tsv:m");
  EXPECT_EQ(t.encode("ab", raw_policy()).pieces, std::vector<std::string>{"ab"});
}

TEST(BaselineSpec, UnknownKindsAndMissingPaths) {
  EXPECT_THROW(load_baseline("nonsense:x"), UsageError);
  EXPECT_THROW(load_baseline("rank_file"), UsageError);
  EXPECT_THROW(load_baseline("rank_file:/nonexistent/file.tiktoken"), DataError);
  EXPECT_EQ(load_baseline("bytes").name(), "bytes");
}
