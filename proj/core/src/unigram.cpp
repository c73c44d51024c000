#include "subtok/unigram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include "json.hpp"

#include "subtok/error.hpp"
#include "subtok/parallel.hpp"
#include "subtok/unicode.hpp"

namespace subtok {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Fixed partition for parallel reductions, independent of the worker count.
constexpr std::size_t kReductionBlocks = 64;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

std::vector<UnigramPiece> normalized(std::vector<UnigramPiece> pieces) {
  double total = kNegInf;
  for (const auto& p : pieces) total = log_add(total, p.log_prob);
  for (auto& p : pieces) p.log_prob = std::min(0.0, p.log_prob - total);
  return pieces;
}

std::pair<std::size_t, std::size_t> block_range(std::size_t n, std::size_t blocks, std::size_t b) {
  const std::size_t per = (n + blocks - 1) / blocks;
  return {std::min(n, b * per), std::min(n, (b + 1) * per)};
}

}  // namespace

UnigramModel::UnigramModel(std::vector<UnigramPiece> pieces, std::optional<std::string> unk_token)
    : pieces_(std::move(pieces)), unk_token_(std::move(unk_token)) {
  required_.resize(pieces_.size());
  min_log_prob_ = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    if (p.piece.empty()) throw DataError("empty Unigram piece");
    if (!(p.log_prob <= 0.0) || std::isnan(p.log_prob)) {
      throw DataError("Unigram piece '" + p.piece + "' has log-probability " + fmt::format("{}", p.log_prob));
    }
    if (!index_.emplace(p.piece, i).second) throw DataError("duplicate Unigram piece '" + p.piece + "'");
    const std::size_t chars = utf8::count_scalars(p.piece);
    required_[i] = chars == 1;
    max_piece_chars_ = std::max(max_piece_chars_, chars);
    min_log_prob_ = std::min(min_log_prob_, p.log_prob);
  }
  if (unk_token_ && index_.contains(*unk_token_)) {
    throw DataError("unknown token '" + *unk_token_ + "' must not also be a piece");
  }
}

std::optional<std::size_t> UnigramModel::find(std::string_view piece) const {
  auto it = index_.find(piece);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t UnigramModel::required_count() const {
  return static_cast<std::size_t>(std::count(required_.begin(), required_.end(), true));
}

const std::string& UnigramModel::id_to_piece(TokenId id) const {
  if (unk_token_ && id == 0) return *unk_token_;
  const auto offset = unk_token_ ? 1 : 0;
  if (id < offset || static_cast<std::size_t>(id - offset) >= pieces_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return pieces_[static_cast<std::size_t>(id - offset)].piece;
}

Lattice UnigramModel::lattice(std::string_view word, bool allow_unk, std::size_t excluded) const {
  Lattice lat;
  const auto chars = utf8::split_scalars(word);
  const std::size_t n = chars.size();
  lat.length = n;
  lat.byte_offset.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) lat.byte_offset[i + 1] = lat.byte_offset[i] + chars[i].size();
  lat.ending_at.resize(n + 1);
  lat.starting_at.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    bool has_single = false;
    const std::size_t max_end = std::min(n, i + max_piece_chars_);
    for (std::size_t j = i + 1; j <= max_end; ++j) {
      const auto sub = word.substr(lat.byte_offset[i], lat.byte_offset[j] - lat.byte_offset[i]);
      auto it = index_.find(sub);
      if (it == index_.end() || it->second == excluded) continue;
      const Lattice::Edge e{i, j, it->second, pieces_[it->second].log_prob};
      lat.starting_at[i].push_back(e);
      lat.ending_at[j].push_back(e);
      has_single |= j == i + 1;
    }
    if (!has_single && allow_unk && unk_token_) {
      const Lattice::Edge e{i, i + 1, Lattice::kUnkPiece, unk_log_prob()};
      lat.starting_at[i].push_back(e);
      lat.ending_at[i + 1].push_back(e);
    }
  }
  return lat;
}

Segmentation viterbi_segment(const Lattice& lat, std::string_view word) {
  const std::size_t n = lat.length;
  Segmentation seg;
  if (n == 0) return seg;
  // Backward DP over suffixes makes the tie-break exact: equal score, then
  // fewer pieces, then the longer first piece.
  std::vector<double> score(n + 1, kNegInf);
  std::vector<std::size_t> count(n + 1, 0);
  std::vector<const Lattice::Edge*> choice(n + 1, nullptr);
  score[n] = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    for (const auto& e : lat.starting_at[i]) {
      if (score[e.end] == kNegInf) continue;
      const double s = e.log_prob + score[e.end];
      const std::size_t c = count[e.end] + 1;
      const auto* cur = choice[i];
      const bool better = cur == nullptr || s > score[i] ||
                          (s == score[i] && (c < count[i] || (c == count[i] && e.end > cur->end)));
      if (better) {
        score[i] = s;
        count[i] = c;
        choice[i] = &e;
      }
    }
  }
  if (choice[0] == nullptr) {
    throw DataError("word '" + std::string(word) + "' cannot be segmented with the current pieces");
  }
  seg.score = score[0];
  for (std::size_t i = 0; i < n; i = choice[i]->end) {
    const auto* e = choice[i];
    seg.pieces.push_back(e->piece);
    seg.surfaces.emplace_back(word.substr(lat.byte_offset[e->start], lat.byte_offset[e->end] - lat.byte_offset[e->start]));
    if (e->piece == Lattice::kUnkPiece) seg.unk = true;
  }
  return seg;
}

Segmentation viterbi_segment(const UnigramModel& model, std::string_view word, bool allow_unk) {
  return viterbi_segment(model.lattice(word, allow_unk), word);
}

void UnigramModel::encode_word(std::string_view word, WordTokens& out) const {
  out.ids.clear();
  out.pieces.clear();
  out.unk = false;
  if (word.empty()) return;
  Segmentation seg = viterbi_segment(*this, word, true);
  for (std::size_t k = 0; k < seg.pieces.size(); ++k) {
    if (seg.pieces[k] == Lattice::kUnkPiece) {
      out.ids.push_back(0);
      out.pieces.push_back(*unk_token_);
    } else {
      out.ids.push_back(id_of(seg.pieces[k]));
      out.pieces.push_back(std::move(seg.surfaces[k]));
    }
  }
  out.unk = seg.unk;
}

std::string UnigramModel::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += id_to_piece(id);
  return out;
}

namespace {

struct ForwardBackward {
  std::vector<double> alpha;
  std::vector<double> beta;
  double z = kNegInf;
};

ForwardBackward forward_backward(const Lattice& lat) {
  const std::size_t n = lat.length;
  ForwardBackward fb;
  fb.alpha.assign(n + 1, kNegInf);
  fb.beta.assign(n + 1, kNegInf);
  fb.alpha[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    for (const auto& e : lat.ending_at[j]) fb.alpha[j] = log_add(fb.alpha[j], fb.alpha[e.start] + e.log_prob);
  }
  fb.beta[n] = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    for (const auto& e : lat.starting_at[i]) fb.beta[i] = log_add(fb.beta[i], e.log_prob + fb.beta[e.end]);
  }
  fb.z = fb.alpha[n];
  return fb;
}

}  // namespace

double word_log_likelihood(const UnigramModel& model, std::string_view word) {
  return forward_backward(model.lattice(word, false)).z;
}

EmResult em_step(const UnigramModel& model, const WordCounts& wc) {
  const auto& entries = wc.entries();
  const std::size_t np = model.pieces().size();
  std::vector<std::vector<double>> block_counts(kReductionBlocks);
  std::vector<double> block_ll(kReductionBlocks, 0.0);

  parallel_for(kReductionBlocks, [&](std::size_t b) {
    const auto [begin, end] = block_range(entries.size(), kReductionBlocks, b);
    if (begin == end) return;
    auto& counts = block_counts[b];
    counts.assign(np, 0.0);
    for (std::size_t w = begin; w < end; ++w) {
      const auto& e = entries[w];
      const Lattice lat = model.lattice(e.word, false);
      const ForwardBackward fb = forward_backward(lat);
      if (fb.z == kNegInf) {
        throw DataError("EM: word '" + e.word + "' is not coverable by the current pieces");
      }
      const double freq = static_cast<double>(e.count);
      block_ll[b] += freq * fb.z;
      for (std::size_t i = 0; i < lat.length; ++i) {
        for (const auto& edge : lat.starting_at[i]) {
          counts[edge.piece] += freq * std::exp(fb.alpha[edge.start] + edge.log_prob + fb.beta[edge.end] - fb.z);
        }
      }
    }
  });

  std::vector<double> counts(np, 0.0);
  double ll = 0.0;
  for (std::size_t b = 0; b < kReductionBlocks; ++b) {
    ll += block_ll[b];
    if (block_counts[b].empty()) continue;
    for (std::size_t i = 0; i < np; ++i) counts[i] += block_counts[b][i];
  }

  constexpr double kRequiredFloor = 1e-10;
  std::vector<UnigramPiece> next;
  next.reserve(np);
  double total = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    double c = counts[i];
    if (c <= 0.0) {
      if (!model.is_required(i)) continue;
      c = kRequiredFloor;
    }
    next.push_back({model.pieces()[i].piece, c});
    total += c;
  }
  for (auto& p : next) p.log_prob = std::min(0.0, std::log(p.log_prob / total));
  return {UnigramModel(std::move(next), model.unk_token()), ll};
}

std::vector<std::string> covered_characters(const WordCounts& wc, double coverage) {
  std::map<std::string, std::uint64_t> freq;
  std::uint64_t total = 0;
  for (const auto& e : wc) {
    for (auto ch : utf8::split_scalars(e.word)) {
      freq[std::string(ch)] += e.count;
      total += e.count;
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> chars(freq.begin(), freq.end());
  std::stable_sort(chars.begin(), chars.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  const double needed = coverage * static_cast<double>(total);
  double acc = 0.0;
  for (auto& [c, f] : chars) {
    if (coverage < 1.0 && acc >= needed) break;
    out.push_back(c);
    acc += static_cast<double>(f);
  }
  return out;
}

UnigramModel seed_vocab(const WordCounts& wc, std::size_t seed_size, std::size_t max_piece_length,
                        std::optional<std::string> unk_token) {
  if (max_piece_length == 0) throw UsageError("max_piece_length must be positive");
  std::unordered_map<std::string, std::uint64_t> freq;
  std::map<std::string, std::uint64_t> chars;
  for (const auto& e : wc) {
    const auto sc = utf8::split_scalars(e.word);
    std::vector<std::size_t> off(sc.size() + 1, 0);
    for (std::size_t i = 0; i < sc.size(); ++i) off[i + 1] = off[i] + sc[i].size();
    for (std::size_t i = 0; i < sc.size(); ++i) {
      chars[std::string(sc[i])] += e.count;
      const std::size_t max_end = std::min(sc.size(), i + max_piece_length);
      for (std::size_t j = i + 2; j <= max_end; ++j) {
        freq[std::string(e.word.substr(off[i], off[j] - off[i]))] += e.count;
      }
    }
  }
  if (seed_size < chars.size()) {
    throw UsageError("seed size " + std::to_string(seed_size) + " is smaller than the character set (" +
                     std::to_string(chars.size()) + ")");
  }

  struct Candidate {
    std::string piece;
    std::uint64_t freq;
    std::uint64_t score;
  };
  std::vector<Candidate> cands;
  cands.reserve(freq.size());
  for (auto& [p, f] : freq) cands.push_back({p, f, f * utf8::count_scalars(p)});
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.piece < b.piece;
  });
  const std::size_t slots = seed_size - chars.size();
  if (cands.size() > slots) cands.resize(slots);

  std::vector<UnigramPiece> pieces;
  pieces.reserve(chars.size() + cands.size());
  double total = 0.0;
  for (const auto& [c, f] : chars) total += static_cast<double>(f);
  for (const auto& c : cands) total += static_cast<double>(c.freq);
  for (const auto& [c, f] : chars) pieces.push_back({c, std::log(static_cast<double>(f) / total)});
  for (const auto& c : cands) pieces.push_back({c.piece, std::log(static_cast<double>(c.freq) / total)});
  return UnigramModel(std::move(pieces), std::move(unk_token));
}

std::vector<double> removal_losses(const UnigramModel& model, const WordCounts& wc) {
  const auto& entries = wc.entries();
  const std::size_t np = model.pieces().size();
  std::vector<double> best(entries.size());
  std::vector<std::vector<std::size_t>> paths(entries.size());
  parallel_for(kReductionBlocks, [&](std::size_t b) {
    const auto [begin, end] = block_range(entries.size(), kReductionBlocks, b);
    for (std::size_t w = begin; w < end; ++w) {
      Segmentation seg = viterbi_segment(model, entries[w].word, false);
      best[w] = seg.score;
      paths[w] = std::move(seg.pieces);
      std::sort(paths[w].begin(), paths[w].end());
      paths[w].erase(std::unique(paths[w].begin(), paths[w].end()), paths[w].end());
    }
  });
  std::vector<std::vector<std::size_t>> users(np);
  for (std::size_t w = 0; w < entries.size(); ++w) {
    for (auto p : paths[w]) users[p].push_back(w);
  }

  std::vector<double> loss(np, 0.0);
  parallel_for(kReductionBlocks, [&](std::size_t b) {
    const auto [begin, end] = block_range(np, kReductionBlocks, b);
    for (std::size_t p = begin; p < end; ++p) {
      if (model.is_required(p)) continue;
      double l = 0.0;
      for (auto w : users[p]) {
        const auto& word = entries[w].word;
        const Segmentation alt = viterbi_segment(model.lattice(word, false, p), word);
        l += static_cast<double>(entries[w].count) * (best[w] - alt.score);
      }
      loss[p] = l;
    }
  });
  return loss;
}

namespace {

UnigramModel drop_lowest_loss(const UnigramModel& model, const WordCounts& wc, std::size_t drop) {
  if (drop == 0) return model;
  const auto loss = removal_losses(model, wc);
  const auto& pieces = model.pieces();
  std::vector<std::size_t> removable;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!model.is_required(i)) removable.push_back(i);
  }
  std::sort(removable.begin(), removable.end(), [&](std::size_t a, std::size_t b) {
    if (loss[a] != loss[b]) return loss[a] < loss[b];
    if (pieces[a].log_prob != pieces[b].log_prob) return pieces[a].log_prob < pieces[b].log_prob;
    return pieces[a].piece < pieces[b].piece;
  });
  drop = std::min(drop, removable.size());
  std::vector<bool> removed(pieces.size(), false);
  for (std::size_t k = 0; k < drop; ++k) removed[removable[k]] = true;
  std::vector<UnigramPiece> kept;
  kept.reserve(pieces.size() - drop);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!removed[i]) kept.push_back(pieces[i]);
  }
  return UnigramModel(normalized(std::move(kept)), model.unk_token());
}

}  // namespace

UnigramModel prune(const UnigramModel& model, const WordCounts& wc, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw UsageError("keep_fraction must lie in (0, 1]");
  }
  const std::size_t removable = model.pieces().size() - model.required_count();
  const auto drop = static_cast<std::size_t>(std::floor(static_cast<double>(removable) * (1.0 - keep_fraction)));
  return drop_lowest_loss(model, wc, drop);
}

UnigramModel prune_to_size(const UnigramModel& model, const WordCounts& wc, std::size_t target_pieces) {
  const std::size_t size = model.pieces().size();
  if (size <= target_pieces) return model;
  return drop_lowest_loss(model, wc, size - target_pieces);
}

UnigramModel train_unigram(const WordCounts& wc, std::size_t vocab_size, const UnigramTrainerConfig& config) {
  if (!(config.shrink_factor > 0.0 && config.shrink_factor < 1.0)) {
    throw UsageError("shrink_factor must lie in (0, 1)");
  }
  if (!(config.character_coverage > 0.0 && config.character_coverage <= 1.0)) {
    throw UsageError("character_coverage must lie in (0, 1]");
  }
  const std::size_t specials = config.unk_token ? 1 : 0;
  const auto chars = covered_characters(wc, config.character_coverage);
  if (vocab_size < chars.size() + specials) {
    throw UsageError("vocab_size " + std::to_string(vocab_size) + " is smaller than the required characters (" +
                     std::to_string(chars.size()) + ") plus specials (" + std::to_string(specials) + ")");
  }

  // Words with characters outside the coverage set are not trained on.
  WordCounts train;
  {
    std::unordered_map<std::string, bool> covered;
    for (const auto& c : chars) covered.emplace(c, true);
    for (const auto& e : wc) {
      bool ok = true;
      for (auto ch : utf8::split_scalars(e.word)) ok = ok && covered.contains(std::string(ch));
      if (ok) train.add(e.word, e.count);
    }
  }

  const std::size_t target = vocab_size - specials;
  const std::size_t seed_size = std::max(config.seed_size ? config.seed_size : 4 * vocab_size, chars.size());
  UnigramModel model = seed_vocab(train, seed_size, config.max_piece_length, config.unk_token);

  while (true) {
    for (std::size_t k = 0; k < config.em_iters; ++k) model = em_step(model, train).model;
    const std::size_t size = model.pieces().size();
    if (size <= target) break;
    auto next = static_cast<std::size_t>(std::floor(static_cast<double>(size) * config.shrink_factor));
    next = std::clamp(next, target, size - 1);
    UnigramModel pruned = prune_to_size(model, train, next);
    if (pruned.pieces().size() == size) break;  // only required pieces left
    model = std::move(pruned);
  }
  for (std::size_t k = 0; k < config.em_iters; ++k) model = em_step(model, train).model;

  std::vector<UnigramPiece> pieces = model.pieces();
  std::sort(pieces.begin(), pieces.end(), [](const UnigramPiece& a, const UnigramPiece& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.piece < b.piece;
  });
  return UnigramModel(std::move(pieces), config.unk_token);
}

TokenSeq encode_unigram(const UnigramModel& model, std::string_view text, const PretokenPolicy& policy) {
  return encode_words(text, policy,
                      [&model](std::string_view w, WordTokens& out) { model.encode_word(w, out); });
}

std::string decode_unigram(const UnigramModel& model, std::span<const TokenId> ids) { return model.decode(ids); }

// ---- persistence -----------------------------------------------------------

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::optional<std::string> unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) return std::nullopt;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: return std::nullopt;
    }
  }
  return out;
}

}  // namespace

std::string unigram_text(const UnigramModel& model) {
  nlohmann::json meta = {{"unk_token", model.unk_token() ? nlohmann::json(*model.unk_token()) : nlohmann::json(nullptr)}};
  std::string out = "#! unigram v1\n#! " + meta.dump() + "\n";
  for (const auto& p : model.pieces()) {
    out += escape_field(p.piece);
    out += '\t';
    out += fmt::format("{}", p.log_prob);
    out += '\n';
  }
  return out;
}

UnigramModel parse_unigram(std::string_view text, std::string_view source) {
  std::vector<UnigramPiece> pieces;
  std::optional<std::string> unk = "<unk>";
  std::size_t lineno = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) {
    return DataError(std::string(source) + ":" + std::to_string(lineno) + ": " + why);
  };
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (lineno == 1) {
      if (line != "#! unigram v1") throw fail("expected '#! unigram v1' header");
      continue;
    }
    if (line.starts_with("#! ")) {
      try {
        auto meta = nlohmann::json::parse(line.substr(3));
        if (meta.contains("unk_token")) {
          unk = meta["unk_token"].is_null() ? std::nullopt
                                             : std::optional<std::string>(meta["unk_token"].get<std::string>());
        }
      } catch (const nlohmann::json::exception& e) {
        throw fail(std::string("bad metadata line: ") + e.what());
      }
      continue;
    }
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) throw fail("expected 'piece<TAB>log_prob'");
    auto piece = unescape_field(line.substr(0, tab));
    if (!piece) throw fail("bad escape sequence in piece");
    double lp = 0.0;
    try {
      std::size_t used = 0;
      const std::string num(line.substr(tab + 1));
      lp = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw fail("bad log-probability");
    }
    pieces.push_back({std::move(*piece), lp});
  }
  if (lineno == 0) throw DataError(std::string(source) + ": empty Unigram model file");
  return UnigramModel(std::move(pieces), std::move(unk));
}

void save_unigram(const UnigramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << unigram_text(model);
  if (!out) throw DataError("write failed for " + path.string());
}

UnigramModel load_unigram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_unigram(text, path.string());
}

}  // namespace subtok
