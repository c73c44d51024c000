#include "subtok_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "subtok/error.hpp"
#include "subtok/evaluation.hpp"
#include "subtok/tokenizer.hpp"
#include "subtok/version.hpp"

namespace subtok::cli {
namespace {

struct PolicyFlags {
  std::string mode = "whitespace";
  std::string normalization = "nfc";
  bool lowercase = false;

  void add_to(CLI::App& app) {
    app.add_option("--policy", mode, "pre-tokenization: whitespace, tsheg or regex")->capture_default_str();
    app.add_option("--normalization", normalization, "nfc or none")->capture_default_str();
    app.add_flag("--lowercase", lowercase, "lowercase before pre-tokenization");
  }
  PretokenPolicy policy() const {
    PretokenPolicy p;
    p.mode = parse_pretoken_mode(mode);
    p.normalization = parse_normalization(normalization);
    p.lowercase = lowercase;
    return p;
  }
};

std::string read_all(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_all(in);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

// Splits on '\n'; `last_terminated` tells whether the final line had one.
std::vector<std::string_view> split_lines(std::string_view text, bool& last_terminated) {
  std::vector<std::string_view> lines;
  last_terminated = !text.empty() && text.back() == '\n';
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string json_string(std::string_view s) {
  return nlohmann::json(std::string(s)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

// One output line per input line: ids separated by spaces, with the text
// between words as JSON string literals so the line can be decoded exactly.
std::string encode_line(const Tokenizer& tok, std::string_view line, const PretokenPolicy& policy, bool pieces) {
  const TokenSeq seq = tok.encode(line, policy);
  std::string out;
  auto put = [&](const std::string& field) {
    if (!out.empty()) out += ' ';
    out += field;
  };
  for (std::size_t w = 0; w < seq.word_spans.size(); ++w) {
    if (w < seq.gaps.size() && !seq.gaps[w].empty()) put(json_string(seq.gaps[w]));
    const auto& s = seq.word_spans[w];
    for (std::size_t i = s.token_start; i < s.token_start + s.token_count; ++i) {
      put(pieces ? json_string(seq.pieces[i]) : std::to_string(seq.ids[i]));
    }
  }
  if (!seq.gaps.empty() && !seq.gaps.back().empty()) put(json_string(seq.gaps.back()));
  return out;
}

std::string decode_line(const Tokenizer& tok, std::string_view line, std::size_t line_no) {
  std::string out;
  std::vector<TokenId> run;
  auto flush = [&] {
    out += tok.decode(run);
    run.clear();
  };
  std::size_t pos = 0;
  const auto bad = [&](const std::string& what) {
    return DataError("input line " + std::to_string(line_no) + ": " + what);
  };
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    if (line[pos] == '"') {
      std::size_t end = pos + 1;
      while (end < line.size() && line[end] != '"') end += line[end] == '\\' ? 2 : 1;
      if (end >= line.size()) throw bad("unterminated string");
      flush();
      try {
        out += nlohmann::json::parse(line.substr(pos, end - pos + 1)).get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw bad("bad string literal");
      }
      pos = end + 1;
      continue;
    }
    auto end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    TokenId id = 0;
    const auto field = line.substr(pos, end - pos);
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), id);
    if (ec != std::errc() || ptr != field.data() + field.size()) throw bad("expected a token id, got '" + std::string(field) + "'");
    run.push_back(id);
    pos = end;
  }
  flush();
  return out;
}

Tokenizer open_tokenizer(const std::string& model, const std::string& baseline) {
  if (model.empty() == baseline.empty()) throw UsageError("give exactly one of --model or --baseline");
  return model.empty() ? load_baseline(baseline) : load_model(model);
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  err << "subtok: training " << to_string(cfg.algorithm) << " (vocab " << cfg.vocab_size << ", " << cfg.runs
      << " run" << (cfg.runs == 1 ? "" : "s") << ") on " << cfg.corpus_path << "\n";
  const TrainResult r = run_training(cfg);
  nlohmann::json record = {{"config", nlohmann::json::parse(to_json(cfg))},
                           {"vocab_size", r.tokenizer.vocab_size()},
                           {"timing",
                            {{"mean_ms", r.timing.mean_ms},
                             {"stddev_ms", r.timing.stddev_ms},
                             {"runs", r.timing.runs},
                             {"loops_per_run", r.timing.loops_per_run},
                             {"text", format_bench(r.timing)}}}};
  const auto record_path = std::filesystem::path(cfg.output_dir) / (r.tokenizer.name() + ".train.json");
  write_file(record_path, record.dump(2) + "\n");
  for (const auto& f : r.files) err << "subtok: wrote " << f.string() << "\n";
  err << "subtok: wrote " << record_path.string() << "\n";
  out << r.tokenizer.name() << ": " << format_bench(r.timing) << "\n";
  return 0;
}

int cmd_encode(const std::string& model, const std::string& baseline, const std::string& input,
               const PretokenPolicy& policy, bool decode, bool pieces, std::istream& in, std::ostream& out) {
  if (decode && pieces) throw UsageError("--pieces cannot be combined with --decode");
  const Tokenizer tok = open_tokenizer(model, baseline);
  const std::string text = input.empty() || input == "-" ? read_all(in) : read_file(input);
  bool terminated = false;
  const auto lines = split_lines(text, terminated);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out << (decode ? decode_line(tok, lines[i], i + 1) : encode_line(tok, lines[i], policy, pieces));
    if (i + 1 < lines.size() || terminated) out << '\n';
  }
  return 0;
}

int report_status(const MetricsReport& r, std::ostream& err) {
  for (const auto& [name, e] : r.errors) err << "subtok: " << name << ": " << e << "\n";
  return r.errors.empty() ? 0 : static_cast<int>(ErrorCode::data);
}

int cmd_eval(const EvalConfig& cfg, const std::string& format, const std::string& out_dir, std::ostream& out,
             std::ostream& err) {
  if (cfg.models.empty() && cfg.baselines.empty()) throw UsageError("nothing to evaluate: give --model or --baseline");
  err << "subtok: evaluating " << cfg.models.size() << " model(s) against " << cfg.baselines.size()
      << " baseline(s) on " << cfg.dataset_path << "\n";
  const MetricsReport r = run_evaluation(cfg);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(std::filesystem::path(out_dir) / "report.json", report_json(r));
    write_file(std::filesystem::path(out_dir) / "nsl.csv", report_csv(r));
    err << "subtok: wrote " << (std::filesystem::path(out_dir) / "report.json").string() << "\n";
  }
  if (format == "json") {
    out << report_json(r);
  } else if (format == "csv") {
    out << report_csv(r);
  } else {
    out << report_table(r);
  }
  return report_status(r, err);
}

int cmd_bench(const EvalConfig& cfg, const std::string& format, std::ostream& out, std::ostream& err) {
  if (cfg.models.empty() && cfg.baselines.empty()) throw UsageError("nothing to benchmark: give --model or --baseline");
  if (cfg.runs < 1) throw UsageError("--runs must be at least 1");
  const MetricsReport r = run_evaluation(cfg);
  if (format == "json") {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, b] : r.timing) {
      j[name] = {{"mean_ms", b.mean_ms},
                 {"stddev_ms", b.stddev_ms},
                 {"runs", b.runs},
                 {"loops_per_run", b.loops_per_run},
                 {"text", format_bench(b)}};
    }
    out << j.dump(2) << "\n";
  } else {
    std::size_t w = 9;
    for (const auto& [name, _] : r.timing) w = std::max(w, name.size());
    for (const auto& [name, b] : r.timing) {
      out << name << std::string(w - name.size() + 2, ' ') << format_bench(b) << "\n";
    }
  }
  return report_status(r, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"subword tokenizer training and evaluation", "subtok"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a tokenizer and report training time");
  RunConfig tc;
  std::string algo;
  PolicyFlags train_policy;
  bool no_byte_fallback = false;
  train->add_option("--algo", algo, "bpe, wordpiece or unigram")->required();
  train->add_option("--vocab-size", tc.vocab_size, "target vocabulary size")->required();
  train->add_option("--corpus", tc.corpus_path, "UTF-8 training corpus, one document per line")->required();
  train->add_option("--dataset", tc.dataset_path, "evaluation dataset (recorded only)");
  train->add_option("--out", tc.output_dir, "output directory")->capture_default_str();
  train->add_option("--runs", tc.runs, "timed training runs")->capture_default_str();
  train->add_option("--seed", tc.seed, "recorded for replay")->capture_default_str();
  train->add_option("--min-frequency", tc.min_frequency, "BPE: minimum pair count")->capture_default_str();
  train->add_option("--coverage", tc.character_coverage, "Unigram: character coverage")->capture_default_str();
  train->add_flag("--byte-level", tc.byte_level, "BPE: byte-level base symbols");
  train->add_flag("--no-byte-fallback", no_byte_fallback, "BPE: no <0xNN> tokens");
  train->add_flag("--dedupe", tc.dedupe, "count each distinct word once");
  train_policy.add_to(*train);

  // encode
  auto* encode = app.add_subcommand("encode", "encode (or decode) text line by line");
  std::string enc_model, enc_baseline, enc_input;
  bool enc_decode = false, enc_pieces = false;
  PolicyFlags enc_policy;
  enc_policy.normalization = "none";
  encode->add_option("--model", enc_model, "saved model path");
  encode->add_option("--baseline", enc_baseline, "baseline spec <kind>:<path>");
  encode->add_option("--input", enc_input, "input file (default: standard input)");
  encode->add_flag("--decode", enc_decode, "decode id lines back to text");
  encode->add_flag("--pieces", enc_pieces, "print pieces instead of ids");
  enc_policy.add_to(*encode);

  // eval and bench share most flags
  EvalConfig ec;
  std::string format = "table", out_dir, replay, nsl_mode = "corpus_total";
  PolicyFlags eval_policy;
  auto* eval = app.add_subcommand("eval", "compute NSL, fertility, PCW and timing");
  eval->add_option("--model", ec.models, "candidate model path (repeatable)");
  eval->add_option("--baseline", ec.baselines, "baseline spec <kind>:<path> (repeatable)");
  eval->add_option("--dataset", ec.dataset_path, "marker-annotated dataset");
  eval->add_option("--runs", ec.runs, "timing runs per tokenizer (0: no timing)")->capture_default_str();
  eval->add_option("--loops", ec.loops, "loops per run (0: automatic)")->capture_default_str();
  eval->add_option("--nsl-mode", nsl_mode, "corpus_total or line_mean")->capture_default_str();
  eval->add_option("--format", format, "json, csv or table")->capture_default_str();
  eval->add_option("--out", out_dir, "also write report.json and nsl.csv here");
  eval->add_option("--replay", replay, "re-run the configuration embedded in a report");
  eval->add_option("--seed", ec.seed, "recorded for replay")->capture_default_str();
  eval->add_flag("--dedupe", ec.dedupe, "count each distinct dataset word once");
  eval_policy.add_to(*eval);

  auto* benchc = app.add_subcommand("bench", "time encoding of the dataset per tokenizer");
  benchc->add_option("--model", ec.models, "candidate model path (repeatable)");
  benchc->add_option("--baseline", ec.baselines, "baseline spec <kind>:<path> (repeatable)");
  benchc->add_option("--dataset", ec.dataset_path, "marker-annotated dataset")->required();
  benchc->add_option("--runs", ec.runs, "timing runs")->capture_default_str();
  benchc->add_option("--loops", ec.loops, "loops per run (0: automatic)")->capture_default_str();
  benchc->add_option("--format", format, "table or json")->capture_default_str();
  benchc->add_flag("--dedupe", ec.dedupe, "count each distinct dataset word once");
  PolicyFlags bench_policy;
  bench_policy.add_to(*benchc);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;
    err << "subtok: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::usage);
  }

  try {
    if (*train) {
      tc.algorithm = parse_algorithm(algo);
      tc.policy = train_policy.policy();
      tc.byte_fallback = !no_byte_fallback;
      return cmd_train(tc, out, err);
    }
    if (*encode) {
      return cmd_encode(enc_model, enc_baseline, enc_input, enc_policy.policy(), enc_decode, enc_pieces, in, out);
    }
    if (format != "json" && format != "csv" && format != "table") {
      throw UsageError("--format must be json, csv or table");
    }
    if (*eval) {
      if (!replay.empty()) {
        if (!ec.models.empty() || !ec.baselines.empty() || !ec.dataset_path.empty()) {
          throw UsageError("--replay takes the whole configuration from the report");
        }
        ec = replay_config(read_file(replay));
      } else {
        if (ec.dataset_path.empty()) throw UsageError("--dataset is required");
        ec.policy = eval_policy.policy();
        ec.nsl_mode = parse_nsl_mode(nsl_mode);
      }
      return cmd_eval(ec, format, out_dir, out, err);
    }
    if (*benchc) {
      ec.policy = bench_policy.policy();
      return cmd_bench(ec, format, out, err);
    }
  } catch (const Error& e) {
    err << "subtok: error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "subtok: internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::internal);
  }
  return static_cast<int>(ErrorCode::usage);
}

}  // namespace subtok::cli
