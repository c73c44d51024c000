#include <benchmark/benchmark.h>

#include <filesystem>
#include <map>

#include "subtok/evaluation.hpp"
#include "subtok/tokenizer.hpp"

using namespace subtok;

namespace {

const std::filesystem::path kData = SUBTOK_DATA_DIR;

const WordCounts& corpus_words() {
  static const WordCounts wc = [] {
    RunConfig c;
    c.corpus_path = (kData / "tibetan_corpus.txt").string();
    return training_words(c);
  }();
  return wc;
}

const std::string& dataset_text() {
  static const std::string text = [] {
    EvalConfig c;
    c.dataset_path = (kData / "tibetan_dataset.txt").string();
    return evaluation_text(c);
  }();
  return text;
}

const Tokenizer& trained(Algorithm algo, std::size_t vocab) {
  static std::map<std::pair<Algorithm, std::size_t>, Tokenizer> cache;
  auto it = cache.find({algo, vocab});
  if (it == cache.end()) {
    TrainOptions o;
    o.algorithm = algo;
    o.vocab_size = vocab;
    it = cache.emplace(std::make_pair(algo, vocab), train_tokenizer(corpus_words(), o)).first;
  }
  return it->second;
}

void encode_dataset(benchmark::State& state, const Tokenizer& tok) {
  const std::string& text = dataset_text();
  const PretokenPolicy policy;
  std::size_t tokens = 0;
  for (auto _ : state) {
    const TokenSeq ts = tok.encode(text, policy);
    tokens = ts.size();
    benchmark::DoNotOptimize(tokens);
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
  state.counters["tokens"] = static_cast<double>(tokens);
}

void BM_EncodeBpe(benchmark::State& s) { encode_dataset(s, trained(Algorithm::bpe, s.range(0))); }
void BM_EncodeWordPiece(benchmark::State& s) { encode_dataset(s, trained(Algorithm::wordpiece, s.range(0))); }
void BM_EncodeUnigram(benchmark::State& s) { encode_dataset(s, trained(Algorithm::unigram, s.range(0))); }
void BM_EncodeBytes(benchmark::State& s) { encode_dataset(s, load_baseline("bytes")); }

void train_once(benchmark::State& state, Algorithm algo) {
  TrainOptions o;
  o.algorithm = algo;
  o.vocab_size = static_cast<std::size_t>(state.range(0));
  const WordCounts& wc = corpus_words();
  for (auto _ : state) benchmark::DoNotOptimize(train_tokenizer(wc, o).vocab_size());
}

void BM_TrainBpe(benchmark::State& s) { train_once(s, Algorithm::bpe); }
void BM_TrainWordPiece(benchmark::State& s) { train_once(s, Algorithm::wordpiece); }
void BM_TrainUnigram(benchmark::State& s) { train_once(s, Algorithm::unigram); }

}  // namespace

BENCHMARK(BM_EncodeBpe)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EncodeWordPiece)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EncodeUnigram)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EncodeBytes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainBpe)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainWordPiece)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainUnigram)->Arg(3000)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
