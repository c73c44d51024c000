#include "subtok/evaluation.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "subtok/error.hpp"
#include "subtok/parallel.hpp"

namespace subtok {

using nlohmann::json;

namespace {

json policy_json(const PretokenPolicy& p) {
  return {{"mode", std::string(to_string(p.mode))},
          {"normalization", std::string(to_string(p.normalization))},
          {"lowercase", p.lowercase}};
}

PretokenPolicy policy_from(const json& j) {
  PretokenPolicy p;
  p.mode = parse_pretoken_mode(j.at("mode").get<std::string>());
  p.normalization = parse_normalization(j.at("normalization").get<std::string>());
  p.lowercase = j.value("lowercase", false);
  return p;
}

template <class F>
auto parse_config(std::string_view text, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad configuration: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string to_json(const RunConfig& c) {
  json j = {{"algorithm", std::string(to_string(c.algorithm))},
            {"vocab_size", c.vocab_size},
            {"corpus_path", c.corpus_path},
            {"dataset_path", c.dataset_path},
            {"policy", policy_json(c.policy)},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"dedupe", c.dedupe},
            {"min_frequency", c.min_frequency},
            {"byte_level", c.byte_level},
            {"byte_fallback", c.byte_fallback},
            {"character_coverage", c.character_coverage},
            {"runs", c.runs}};
  return j.dump();
}

RunConfig run_config_from_json(std::string_view text) {
  return parse_config(text, [](const json& j) {
    RunConfig c;
    c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.corpus_path = j.value("corpus_path", std::string());
    c.dataset_path = j.value("dataset_path", std::string());
    if (j.contains("policy")) c.policy = policy_from(j.at("policy"));
    c.seed = j.value("seed", std::uint64_t{0});
    c.output_dir = j.value("output_dir", std::string("."));
    c.dedupe = j.value("dedupe", false);
    c.min_frequency = j.value("min_frequency", std::uint64_t{2});
    c.byte_level = j.value("byte_level", false);
    c.byte_fallback = j.value("byte_fallback", true);
    c.character_coverage = j.value("character_coverage", 1.0);
    c.runs = j.value("runs", 7);
    return c;
  });
}

TrainOptions train_options(const RunConfig& c) {
  TrainOptions o;
  o.algorithm = c.algorithm;
  o.vocab_size = c.vocab_size;
  o.bpe.min_frequency = c.min_frequency;
  o.bpe.byte_level = c.byte_level;
  o.bpe.byte_fallback = c.byte_fallback;
  if (c.character_coverage <= 0.0 || c.character_coverage > 1.0) {
    throw UsageError("character_coverage must be in (0, 1]");
  }
  o.unigram.character_coverage = c.character_coverage;
  return o;
}

WordCounts training_words(const RunConfig& c) {
  if (c.corpus_path.empty()) throw UsageError("a training corpus is required");
  const Corpus corpus = load_corpus(c.corpus_path, c.policy);
  WordCounts wc = count_words(corpus, c.policy);
  return c.dedupe ? wc.deduped() : wc;
}

TrainResult run_training(const RunConfig& c) {
  if (c.runs < 1) throw UsageError("runs must be at least 1");
  const TrainOptions opts = train_options(c);
  const WordCounts wc = training_words(c);

  using clock = std::chrono::steady_clock;
  std::optional<Tokenizer> tok;
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<double> run_ms;
  for (int i = 0; i < c.runs; ++i) {
    const auto t0 = clock::now();
    Tokenizer t = train_tokenizer(wc, opts);
    const std::chrono::duration<double, std::milli> dt = clock::now() - t0;
    run_ms.push_back(dt.count());
    auto text = serialize_tokenizer(t);
    if (tok && text != files) throw InternalError("training is not deterministic: runs produced different models");
    files = std::move(text);
    tok.emplace(std::move(t));
  }

  std::filesystem::create_directories(c.output_dir);
  const auto prefix = std::filesystem::path(c.output_dir) / tok->name();
  TrainResult r{*tok, save_tokenizer(*tok, prefix), bench_from_runs(std::move(run_ms), 1)};
  return r;
}

std::string to_json(const EvalConfig& c) {
  json j = {{"models", c.models},
            {"baselines", c.baselines},
            {"dataset_path", c.dataset_path},
            {"policy", policy_json(c.policy)},
            {"dedupe", c.dedupe},
            {"nsl_mode", std::string(to_string(c.nsl_mode))},
            {"runs", c.runs},
            {"loops", c.loops},
            {"seed", c.seed}};
  return j.dump();
}

EvalConfig eval_config_from_json(std::string_view text) {
  return parse_config(text, [](const json& j) {
    EvalConfig c;
    c.models = j.value("models", std::vector<std::string>{});
    c.baselines = j.value("baselines", std::vector<std::string>{});
    c.dataset_path = j.at("dataset_path").get<std::string>();
    if (j.contains("policy")) c.policy = policy_from(j.at("policy"));
    c.dedupe = j.value("dedupe", false);
    c.nsl_mode = parse_nsl_mode(j.value("nsl_mode", std::string("corpus_total")));
    c.runs = j.value("runs", 7);
    c.loops = j.value("loops", std::uint64_t{0});
    c.seed = j.value("seed", std::uint64_t{0});
    return c;
  });
}

namespace {

WordCounts dataset_words(const EvalConfig& c) {
  if (c.dataset_path.empty()) throw UsageError("a dataset is required");
  WordCounts wc = extract_words(read_dataset_tokens(c.dataset_path));
  return c.dedupe ? wc.deduped() : wc;
}

}  // namespace

std::string evaluation_text(const EvalConfig& c) { return normalize(concat_words(dataset_words(c)), c.policy); }

MetricsReport run_evaluation(const EvalConfig& c) {
  if (c.runs < 0) throw UsageError("runs must not be negative");
  if (c.nsl_mode == NslMode::line_mean && c.dedupe) throw UsageError("per-line NSL cannot be combined with dedupe");
  const WordCounts wc = dataset_words(c);
  if (wc.total_words() == 0) throw DataError(c.dataset_path + ": dataset has no words");
  const std::string text = normalize(concat_words(wc), c.policy);
  const std::uint64_t digest = fnv1a(text);

  std::vector<std::string> lines;
  if (c.nsl_mode == NslMode::line_mean) {
    std::istringstream in(read_text(c.dataset_path));
    std::string raw;
    while (std::getline(in, raw)) {
      lines.push_back(normalize(concat_words(extract_words(split_ascii_whitespace(raw))), c.policy));
    }
  }

  struct Slot {
    std::optional<Tokenizer> tok;
    EvalEntry entry;
  };
  std::vector<Slot> slots;
  std::map<std::string, std::size_t> by_name;
  auto add = [&](const std::string& source, bool candidate, auto&& load) {
    Slot s;
    s.entry.text_digest = digest;
    try {
      s.tok.emplace(load());
      s.entry.name = s.tok->name();
      s.entry.kind = s.tok->kind();
    } catch (const Error& e) {
      s.entry.name = source;
      s.entry.error = e.what();
    }
    // A candidate also listed as a baseline shares one entry.
    if (auto it = by_name.find(s.entry.name); it != by_name.end()) {
      auto& prev = slots[it->second].entry;
      if (prev.kind == s.entry.kind && prev.error.empty() && s.entry.error.empty()) {
        (candidate ? prev.candidate : prev.baseline) = true;
        return;
      }
      s.entry.name += "#" + std::to_string(slots.size());
    }
    s.entry.candidate = candidate;
    s.entry.baseline = !candidate;
    by_name[s.entry.name] = slots.size();
    slots.push_back(std::move(s));
  };
  for (const auto& m : c.models) add(m, true, [&] { return load_model(m); });
  for (const auto& b : c.baselines) add(b, false, [&] { return load_baseline(b); });

  parallel_for(slots.size(), [&](std::size_t i) {
    Slot& s = slots[i];
    if (!s.tok) return;
    try {
      s.entry.tokens = s.tok->encode(text, c.policy);
      for (const auto& line : lines) s.entry.line_tokens.push_back(s.tok->encode(line, c.policy).size());
    } catch (const Error& e) {
      s.entry.tokens.reset();
      s.entry.error = e.what();
    }
  });

  if (c.runs > 0) {
    BenchOptions bo;
    bo.runs = c.runs;
    bo.loops = c.loops;
    for (auto& s : slots) {
      if (!s.entry.tokens) continue;
      const Tokenizer& t = *s.tok;
      s.entry.timing = bench([&] { return t.encode(text, c.policy); }, bo);
    }
  }

  std::vector<EvalEntry> entries;
  for (auto& s : slots) entries.push_back(std::move(s.entry));
  return build_report(entries, to_json(c), c.nsl_mode, wc.total_words());
}

EvalConfig replay_config(std::string_view report_json) {
  return parse_config(report_json, [](const json& j) {
    if (j.value("schema", std::string()) != "metrics/v1") throw UsageError("not a metrics/v1 report");
    return eval_config_from_json(j.at("config_echo").dump());
  });
}

}  // namespace subtok
