#include "subtok/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <fmt/format.h>

#include "json.hpp"
#include "subtok/error.hpp"

namespace subtok {

double nsl(const TokenSeq& candidate, const TokenSeq& baseline) {
  if (baseline.empty()) throw DataError("NSL is undefined for an empty baseline sequence");
  return static_cast<double>(candidate.size()) / static_cast<double>(baseline.size());
}

double nsl_line_mean(std::span<const std::uint64_t> candidate_tokens, std::span<const std::uint64_t> baseline_tokens) {
  if (candidate_tokens.size() != baseline_tokens.size()) {
    throw DataError("per-line NSL needs the same number of lines for both tokenizers");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < candidate_tokens.size(); ++i) {
    if (baseline_tokens[i] == 0) continue;
    sum += static_cast<double>(candidate_tokens[i]) / static_cast<double>(baseline_tokens[i]);
    ++n;
  }
  if (n == 0) throw DataError("NSL is undefined for an empty baseline sequence");
  return sum / static_cast<double>(n);
}

double fertility(const TokenSeq& ts) {
  if (ts.word_spans.empty()) throw DataError("fertility is undefined for zero words");
  std::uint64_t tokens = 0;
  for (const auto& s : ts.word_spans) tokens += s.token_count;
  return static_cast<double>(tokens) / static_cast<double>(ts.word_spans.size());
}

double fertility_raw(const TokenSeq& ts, std::uint64_t dataset_words) {
  if (dataset_words == 0) throw DataError("fertility is undefined for zero words");
  return static_cast<double>(ts.size()) / static_cast<double>(dataset_words);
}

Pcw pcw_from_counts(std::uint64_t continued, std::uint64_t words) {
  if (words == 0) throw DataError("PCW is undefined for zero words");
  if (continued > words) throw UsageError("continued words exceed total words");
  return {continued, words, static_cast<double>(continued) / static_cast<double>(words)};
}

Pcw pcw(const TokenSeq& ts) {
  std::uint64_t continued = 0;
  for (const auto& s : ts.word_spans) continued += s.token_count >= 2 ? 1 : 0;
  return pcw_from_counts(continued, ts.word_spans.size());
}

std::string round_half_even(std::uint64_t num, std::uint64_t den, int decimals) {
  if (den == 0) throw UsageError("division by zero");
  if (decimals < 0 || decimals > 18) throw UsageError("decimals must be in [0, 18]");
  __extension__ typedef unsigned __int128 u128;
  u128 scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  const u128 scaled = static_cast<u128>(num) * scale;
  u128 q = scaled / den;
  const u128 r = scaled % den;
  const u128 twice = 2 * r;
  if (twice > den || (twice == den && q % 2 == 1)) ++q;

  const u128 whole = q / scale;
  u128 frac = q % scale;
  std::string out = fmt::format("{}", static_cast<std::uint64_t>(whole));
  if (decimals > 0) {
    std::string digits(static_cast<std::size_t>(decimals), '0');
    for (int i = decimals - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = static_cast<char>('0' + static_cast<int>(frac % 10));
      frac /= 10;
    }
    out += '.';
    out += digits;
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fingerprint(const TokenSeq& ts) {
  std::uint64_t h = fnv1a({});
  h = fnv1a({reinterpret_cast<const char*>(ts.ids.data()), ts.ids.size() * sizeof(TokenId)}, h);
  for (const auto& s : ts.word_spans) {
    const std::uint64_t v[3] = {s.token_start, s.token_count, s.unk ? 1u : 0u};
    h = fnv1a({reinterpret_cast<const char*>(v), sizeof v}, h);
  }
  return h;
}

BenchResult bench(const std::function<TokenSeq()>& fn, const BenchOptions& options) {
  if (options.runs < 1) throw UsageError("runs must be at least 1");
  using clock = std::chrono::steady_clock;
  const std::uint64_t expected = fingerprint(fn());  // warm-up

  TokenSeq last;
  auto timed = [&](std::uint64_t loops) {
    const auto t0 = clock::now();
    for (std::uint64_t i = 0; i < loops; ++i) last = fn();
    const std::chrono::duration<double> dt = clock::now() - t0;
    if (fingerprint(last) != expected) throw InternalError("encoder output changed between benchmark runs");
    return dt.count();
  };

  std::uint64_t loops = options.loops;
  if (loops == 0) {
    // 1, 2, 5, 10, 20, 50, ...
    for (std::uint64_t base = 1;; base *= 10) {
      bool done = false;
      for (std::uint64_t m : {1u, 2u, 5u}) {
        loops = base * m;
        if (timed(loops) >= options.min_run_seconds) {
          done = true;
          break;
        }
      }
      if (done || base > (1ull << 40)) break;
    }
  } else {
    while (timed(loops) < options.min_resolvable_seconds && loops < (1ull << 40)) loops *= 10;
  }

  std::vector<double> means;
  for (int i = 0; i < options.runs; ++i) means.push_back(timed(loops) / static_cast<double>(loops) * 1e3);
  return bench_from_runs(std::move(means), loops);
}

BenchResult bench_from_runs(std::vector<double> run_means_ms, std::uint64_t loops_per_run) {
  if (run_means_ms.empty()) throw UsageError("at least one run is required");
  BenchResult r;
  r.runs = static_cast<int>(run_means_ms.size());
  r.loops_per_run = loops_per_run;
  r.run_means_ms = std::move(run_means_ms);
  double sum = 0.0;
  for (double m : r.run_means_ms) sum += m;
  r.mean_ms = sum / static_cast<double>(r.runs);
  double sq = 0.0;
  for (double m : r.run_means_ms) sq += (m - r.mean_ms) * (m - r.mean_ms);
  r.stddev_ms = std::sqrt(sq / static_cast<double>(r.runs));
  return r;
}

std::string format_time(double seconds, int precision) {
  if (seconds >= 60.0) {
    static constexpr std::pair<const char*, double> parts[] = {{"d", 86400.0}, {"h", 3600.0}, {"min", 60.0}, {"s", 1.0}};
    std::string out;
    double leftover = seconds;
    for (const auto& [suffix, length] : parts) {
      const auto value = static_cast<long long>(leftover / length);
      if (value > 0) {
        leftover = std::fmod(leftover, length);
        if (!out.empty()) out += ' ';
        out += fmt::format("{}{}", value, suffix);
      }
      if (leftover < 1.0) break;
    }
    return out;
  }
  static constexpr const char* units[] = {"s", "ms", "µs", "ns"};
  static constexpr double scaling[] = {1.0, 1e3, 1e6, 1e9};
  int order = 3;
  if (seconds > 0.0) {
    const auto f = static_cast<long long>(std::floor(std::log10(seconds)));
    const long long floordiv = f >= 0 ? f / 3 : -((-f + 2) / 3);
    order = static_cast<int>(std::min<long long>(-floordiv, 3));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g %s", precision, seconds * scaling[order], units[order]);
  return buf;
}

namespace {
std::string with_thousands(std::uint64_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}
}  // namespace

std::string format_bench(const BenchResult& r) {
  return fmt::format("{} ± {} per loop (mean ± std. dev. of {} run{}, {} loop{} each)",
                     format_time(r.mean_ms / 1e3), format_time(r.stddev_ms / 1e3), r.runs, r.runs == 1 ? "" : "s",
                     with_thousands(r.loops_per_run), r.loops_per_run == 1 ? "" : "s");
}

std::string_view to_string(NslMode mode) { return mode == NslMode::corpus_total ? "corpus_total" : "line_mean"; }

NslMode parse_nsl_mode(std::string_view name) {
  if (name == "corpus_total") return NslMode::corpus_total;
  if (name == "line_mean") return NslMode::line_mean;
  throw UsageError("unknown NSL mode '" + std::string(name) + "' (expected corpus_total or line_mean)");
}

MetricsReport build_report(std::span<const EvalEntry> entries, std::string config_echo, NslMode mode,
                           std::uint64_t dataset_words) {
  MetricsReport r;
  r.config_echo = std::move(config_echo);
  r.nsl_mode = mode;
  r.dataset_words = dataset_words;
  if (entries.empty()) return r;

  for (const auto& e : entries) {
    if (e.text_digest != entries.front().text_digest) {
      throw DataError("'" + e.name + "' was evaluated on a different text than '" + entries.front().name + "'");
    }
  }

  std::map<std::string, const EvalEntry*> ok;
  for (const auto& e : entries) {
    if (r.candidates.contains(e.name) || r.baselines.contains(e.name) || r.errors.contains(e.name)) {
      throw UsageError("duplicate tokenizer name '" + e.name + "'");
    }
    if (!e.tokens || !e.error.empty()) {
      r.errors[e.name] = e.error.empty() ? "no output" : e.error;
      continue;
    }
    const TokenSeq& ts = *e.tokens;
    TokenizerStats s;
    s.kind = e.kind;
    try {
      s.tokens = ts.size();
      s.words = ts.word_spans.size();
      const Pcw p = pcw(ts);
      s.continued = p.continued;
      s.pcw = p.proportion;
      s.fertility = fertility(ts);
      s.fertility_raw = fertility_raw(ts, dataset_words ? dataset_words : s.words);
      for (const auto& span : ts.word_spans) s.unk_words += span.unk ? 1 : 0;
    } catch (const Error& err) {
      r.errors[e.name] = err.what();
      continue;
    }
    if (e.candidate) r.candidates[e.name] = s;
    if (e.baseline) r.baselines[e.name] = s;
    if (e.timing) r.timing[e.name] = *e.timing;
    ok[e.name] = &e;
  }

  for (const auto& [cname, c] : ok) {
    if (!c->candidate) continue;
    for (const auto& [bname, b] : ok) {
      if (!b->baseline) continue;
      if (mode == NslMode::corpus_total) {
        r.nsl_matrix[cname][bname] = nsl(*c->tokens, *b->tokens);
      } else {
        r.nsl_matrix[cname][bname] = nsl_line_mean(c->line_tokens, b->line_tokens);
      }
    }
  }
  return r;
}

namespace {

nlohmann::json stats_json(const TokenizerStats& s) {
  return {{"kind", s.kind},
          {"tokens", s.tokens},
          {"words", s.words},
          {"continued", s.continued},
          {"unk_words", s.unk_words},
          {"fertility", s.fertility},
          {"fertility_raw", s.fertility_raw},
          {"pcw", s.pcw},
          {"pcw_rounded", round_half_even(s.continued, s.words, 2)}};
}

nlohmann::json bench_json(const BenchResult& b) {
  return {{"mean_ms", b.mean_ms},
          {"stddev_ms", b.stddev_ms},
          {"runs", b.runs},
          {"loops_per_run", b.loops_per_run},
          {"run_means_ms", b.run_means_ms},
          {"text", format_bench(b)}};
}

std::string nsl_text(const MetricsReport& r, const std::string& cand, const std::string& base) {
  const double v = r.nsl_matrix.at(cand).at(base);
  if (r.nsl_mode == NslMode::corpus_total) {
    return round_half_even(r.candidates.at(cand).tokens, r.baselines.at(base).tokens, 4);
  }
  return fmt::format("{:.4f}", v);
}

}  // namespace

std::string report_json(const MetricsReport& r, bool include_timing) {
  nlohmann::json j;
  j["schema"] = "metrics/v1";
  j["config_echo"] = nlohmann::json::parse(r.config_echo);
  j["nsl_mode"] = std::string(to_string(r.nsl_mode));
  j["dataset_words"] = r.dataset_words;
  j["candidates"] = nlohmann::json::object();
  for (const auto& [name, s] : r.candidates) j["candidates"][name] = stats_json(s);
  j["baselines"] = nlohmann::json::object();
  for (const auto& [name, s] : r.baselines) j["baselines"][name] = stats_json(s);
  if (!r.baselines.empty()) {
    j["nsl_matrix"] = nlohmann::json::object();
    for (const auto& [c, row] : r.nsl_matrix) {
      for (const auto& [b, v] : row) j["nsl_matrix"][c][b] = v;
    }
  }
  if (include_timing && !r.timing.empty()) {
    j["timing"] = nlohmann::json::object();
    for (const auto& [name, b] : r.timing) j["timing"][name] = bench_json(b);
  }
  j["errors"] = r.errors;
  return j.dump(2) + "\n";
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace

std::string report_csv(const MetricsReport& r) {
  std::string out = "candidate";
  for (const auto& [b, _] : r.baselines) out += "," + csv_field(b);
  out += "\n";
  for (const auto& [c, _] : r.candidates) {
    out += csv_field(c);
    for (const auto& [b, __] : r.baselines) {
      auto row = r.nsl_matrix.find(c);
      out += ",";
      if (row != r.nsl_matrix.end() && row->second.contains(b)) out += fmt::format("{}", row->second.at(b));
    }
    out += "\n";
  }
  return out;
}

std::string report_table(const MetricsReport& r) {
  std::string out;
  std::size_t w = 9;
  for (const auto& [n, _] : r.candidates) w = std::max(w, n.size());
  for (const auto& [n, _] : r.baselines) w = std::max(w, n.size());

  auto stats_rows = [&](const char* title, const std::map<std::string, TokenizerStats>& m) {
    if (m.empty()) return;
    out += fmt::format("{}\n{:<{}}  {:>10}  {:>8}  {:>9}  {:>5}  {:>9}\n", title, "tokenizer", w, "tokens", "words",
                       "fertility", "pcw", "continued");
    for (const auto& [n, s] : m) {
      out += fmt::format("{:<{}}  {:>10}  {:>8}  {:>9}  {:>5}  {:>9}\n", n, w, s.tokens, s.words,
                         round_half_even(s.tokens, s.words, 2), round_half_even(s.continued, s.words, 2),
                         s.continued);
    }
    out += "\n";
  };
  stats_rows("candidates", r.candidates);
  stats_rows("baselines", r.baselines);

  if (!r.nsl_matrix.empty()) {
    out += fmt::format("NSL ({})\n{:<{}}", to_string(r.nsl_mode), "", w);
    for (const auto& [b, _] : r.baselines) out += fmt::format("  {:>{}}", b, std::max<std::size_t>(b.size(), 6));
    out += "\n";
    for (const auto& [c, row] : r.nsl_matrix) {
      out += fmt::format("{:<{}}", c, w);
      for (const auto& [b, _] : r.baselines) {
        out += fmt::format("  {:>{}}", row.contains(b) ? nsl_text(r, c, b) : "-", std::max<std::size_t>(b.size(), 6));
      }
      out += "\n";
    }
    out += "\n";
  }
  if (!r.timing.empty()) {
    out += "execution time\n";
    for (const auto& [n, b] : r.timing) out += fmt::format("{:<{}}  {}\n", n, w, format_bench(b));
    out += "\n";
  }
  for (const auto& [n, e] : r.errors) out += fmt::format("error: {}: {}\n", n, e);
  return out;
}

}  // namespace subtok
