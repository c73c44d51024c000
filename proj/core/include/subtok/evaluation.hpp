#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "subtok/corpus.hpp"
#include "subtok/metrics.hpp"
#include "subtok/tokenizer.hpp"

namespace subtok {

/// Training run. Serialized verbatim into the run record.
struct RunConfig {
  Algorithm algorithm = Algorithm::bpe;
  std::size_t vocab_size = 0;
  std::string corpus_path;
  std::string dataset_path;  // unused by training; kept so one config can drive train and eval
  PretokenPolicy policy;
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  bool dedupe = false;
  std::uint64_t min_frequency = 2;
  bool byte_level = false;
  bool byte_fallback = true;
  double character_coverage = 1.0;
  int runs = 7;  // timed training repetitions
};

std::string to_json(const RunConfig& c);
RunConfig run_config_from_json(std::string_view json);
TrainOptions train_options(const RunConfig& c);

/// Word frequencies the trainers see for this config.
WordCounts training_words(const RunConfig& c);

struct TrainResult {
  Tokenizer tokenizer;
  std::vector<std::filesystem::path> files;
  BenchResult timing;
};

/// Trains `runs` times (checking that every run yields identical model files),
/// then writes `<output_dir>/<algo>-<vocab_size>.*`.
TrainResult run_training(const RunConfig& c);

struct EvalConfig {
  std::vector<std::string> models;     // saved model paths (candidates)
  std::vector<std::string> baselines;  // baseline specs, see load_baseline
  std::string dataset_path;
  PretokenPolicy policy;
  bool dedupe = false;
  NslMode nsl_mode = NslMode::corpus_total;
  int runs = 7;             // 0 disables timing
  std::uint64_t loops = 0;  // 0 picks the loop count automatically
  std::uint64_t seed = 0;
};

std::string to_json(const EvalConfig& c);
EvalConfig eval_config_from_json(std::string_view json);

/// Evaluation text: dataset words without markers, each repeated per its
/// count, space separated, normalized per policy.
std::string evaluation_text(const EvalConfig& c);

/// Loads every tokenizer, encodes the dataset and assembles the report.
/// Tokenizers that fail to load or encode are listed under errors.
MetricsReport run_evaluation(const EvalConfig& c);

/// Reads config_echo from a report written by run_evaluation.
EvalConfig replay_config(std::string_view report_json);

}  // namespace subtok
