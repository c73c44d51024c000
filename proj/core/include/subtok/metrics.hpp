#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subtok/token_seq.hpp"

namespace subtok {

/// Normalized sequence length |candidate| / |baseline| over the whole text.
double nsl(const TokenSeq& candidate, const TokenSeq& baseline);
/// Mean of per-line ratios; lines with an empty baseline are skipped.
double nsl_line_mean(std::span<const std::uint64_t> candidate_tokens, std::span<const std::uint64_t> baseline_tokens);

/// Tokens per word span.
double fertility(const TokenSeq& ts);
/// Tokens per dataset word, independent of the span definition.
double fertility_raw(const TokenSeq& ts, std::uint64_t dataset_words);

struct Pcw {
  std::uint64_t continued = 0;
  std::uint64_t words = 0;
  double proportion = 0.0;
};
/// Words split into two or more tokens.
Pcw pcw(const TokenSeq& ts);
Pcw pcw_from_counts(std::uint64_t continued, std::uint64_t words);

/// num / den rounded half-to-even at `decimals` places, computed exactly.
std::string round_half_even(std::uint64_t num, std::uint64_t den, int decimals);

struct BenchResult {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;  // population std. dev. of the per-run means
  int runs = 7;
  std::uint64_t loops_per_run = 1;
  std::vector<double> run_means_ms;

  friend bool operator==(const BenchResult&, const BenchResult&) = default;
};

struct BenchOptions {
  int runs = 7;
  std::uint64_t loops = 0;          // 0: grow 1, 2, 5, 10, ... until a run lasts min_run_seconds
  double min_run_seconds = 0.2;
  double min_resolvable_seconds = 1e-3;  // explicit loop counts grow until a run lasts this long
};

/// Times `fn` after one discarded warm-up call. Output that changes between
/// runs is an internal error.
BenchResult bench(const std::function<TokenSeq()>& fn, const BenchOptions& options = {});

/// Mean and population std. dev. of per-run means (milliseconds per loop).
BenchResult bench_from_runs(std::vector<double> run_means_ms, std::uint64_t loops_per_run);

/// Duration in the interactive-timer style: "131 ms", "2.56 µs", "2min 7s".
std::string format_time(double seconds, int precision = 3);
/// "131 ms ± 2.56 ms per loop (mean ± std. dev. of 7 runs, 10 loops each)".
std::string format_bench(const BenchResult& r);

/// 64-bit FNV-1a, used to fingerprint texts and token streams.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fingerprint(const TokenSeq& ts);

enum class NslMode { corpus_total, line_mean };
std::string_view to_string(NslMode mode);
NslMode parse_nsl_mode(std::string_view name);

/// One tokenizer's outcome on the evaluation text.
struct EvalEntry {
  std::string name;
  std::string kind;
  bool candidate = true;
  bool baseline = false;
  std::uint64_t text_digest = 0;
  std::optional<TokenSeq> tokens;                  // absent when encoding failed
  std::vector<std::uint64_t> line_tokens;          // per dataset line, for NslMode::line_mean
  std::optional<BenchResult> timing;
  std::string error;
};

struct TokenizerStats {
  std::string kind;
  std::uint64_t tokens = 0;
  std::uint64_t words = 0;
  std::uint64_t continued = 0;
  std::uint64_t unk_words = 0;
  double fertility = 0.0;
  double fertility_raw = 0.0;
  double pcw = 0.0;
};

struct MetricsReport {
  std::string config_echo = "{}";  // JSON text
  NslMode nsl_mode = NslMode::corpus_total;
  std::uint64_t dataset_words = 0;
  std::map<std::string, TokenizerStats> candidates;
  std::map<std::string, TokenizerStats> baselines;
  std::map<std::string, std::map<std::string, double>> nsl_matrix;  // candidate -> baseline -> value
  std::map<std::string, BenchResult> timing;
  std::map<std::string, std::string> errors;

  bool empty() const { return candidates.empty() && baselines.empty() && errors.empty(); }
};

/// Throws DataError when entries were computed on different texts.
MetricsReport build_report(std::span<const EvalEntry> entries, std::string config_echo = "{}",
                           NslMode mode = NslMode::corpus_total, std::uint64_t dataset_words = 0);

/// Deterministic "metrics/v1" JSON (sorted keys).
std::string report_json(const MetricsReport& r, bool include_timing = true);
/// NSL matrix: one row per candidate, one column per baseline.
std::string report_csv(const MetricsReport& r);
/// Human-readable summary (NSL to 4 places, other ratios to 2, half-even).
std::string report_table(const MetricsReport& r);

}  // namespace subtok
