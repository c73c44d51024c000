#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"
#include "subtok/unicode.hpp"
#include "subtok/vocab.hpp"

namespace oracle {

using subtok::SymbolPair;
using subtok::WordCounts;

namespace {

using Word = std::pair<std::vector<std::string>, std::uint64_t>;

std::vector<std::string> scalars(const std::string& w) {
  std::vector<std::string> out;
  for (auto s : subtok::utf8::split_scalars(w)) out.emplace_back(s);
  return out;
}

void merge_all(std::vector<std::string>& syms, const std::string& l, const std::string& r) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < syms.size();) {
    if (i + 1 < syms.size() && syms[i] == l && syms[i + 1] == r) {
      out.push_back(l + r);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  syms.swap(out);
}

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -1e300 || std::isinf(b)) return a;
  return a + std::log1p(std::exp(b - a));
}

// Calls f(pieces, score) for every segmentation made of model pieces.
template <class F>
void for_each_segmentation(const subtok::UnigramModel& model, const std::string& word, F&& f) {
  const auto chars = scalars(word);
  const std::size_t n = chars.size();
  if (n == 0) return;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
    std::vector<std::size_t> pieces;
    double score = 0.0;
    std::string cur;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      cur += chars[i];
      const bool cut = i + 1 == n || ((mask >> i) & 1);
      if (!cut) continue;
      auto p = model.find(cur);
      if (!p) {
        ok = false;
        break;
      }
      pieces.push_back(*p);
      score += model.pieces()[*p].log_prob;
      cur.clear();
    }
    if (ok) f(pieces, score);
  }
}

}  // namespace

std::vector<SymbolPair> naive_bpe_merges(const WordCounts& wc, std::size_t vocab_size,
                                         const subtok::BpeTrainerConfig& config) {
  std::set<std::string> reserved(config.specials.begin(), config.specials.end());
  if (config.byte_fallback && !config.byte_level) {
    for (int b = 0; b < 256; ++b) reserved.insert(subtok::byte_token(static_cast<unsigned char>(b)));
  }
  std::set<std::string> vocab = reserved;
  std::vector<Word> words;
  for (const auto& e : wc) {
    std::vector<std::string> syms;
    if (config.byte_level) {
      for (unsigned char b : e.word) syms.push_back(subtok::byte_to_unicode()[b]);
    } else {
      syms = scalars(e.word);
    }
    words.emplace_back(syms, e.count);
  }
  if (config.byte_level) {
    vocab.insert(subtok::byte_to_unicode().begin(), subtok::byte_to_unicode().end());
  } else {
    for (const auto& [syms, _] : words) vocab.insert(syms.begin(), syms.end());
  }

  std::vector<SymbolPair> merges;
  while (vocab.size() < vocab_size) {
    std::map<SymbolPair, std::uint64_t> counts;
    for (const auto& [syms, c] : words) {
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) counts[{syms[i], syms[i + 1]}] += c;
    }
    const SymbolPair* best = nullptr;
    std::uint64_t best_count = 0;
    for (const auto& [p, c] : counts) {  // ascending (left, right): the first maximum wins
      if (reserved.contains(p.first + p.second)) continue;
      if (c > best_count) {
        best = &p;
        best_count = c;
      }
    }
    if (!best || best_count < config.min_frequency) break;
    const SymbolPair chosen = *best;
    for (auto& [syms, _] : words) merge_all(syms, chosen.first, chosen.second);
    if (std::find(merges.begin(), merges.end(), chosen) == merges.end()) merges.push_back(chosen);
    vocab.insert(chosen.first + chosen.second);
  }
  return merges;
}

std::vector<std::string> naive_wordpiece_vocab(const WordCounts& wc, std::size_t vocab_size,
                                               const subtok::WordPieceTrainerConfig& config) {
  const std::string& prefix = config.continuation_prefix;
  std::vector<std::string> vocab{config.unk_token};
  for (const auto& s : config.specials) {
    if (std::find(vocab.begin(), vocab.end(), s) == vocab.end()) vocab.push_back(s);
  }
  const std::set<std::string> reserved(vocab.begin(), vocab.end());
  std::vector<Word> words;
  std::set<std::string> initial;
  for (const auto& e : wc) {
    auto syms = scalars(e.word);
    for (std::size_t i = 1; i < syms.size(); ++i) syms[i] = prefix + syms[i];
    initial.insert(syms.begin(), syms.end());
    words.emplace_back(syms, e.count);
  }
  for (const auto& s : initial) {
    if (!reserved.contains(s)) vocab.push_back(s);
  }
  auto in_vocab = [&](const std::string& s) { return std::find(vocab.begin(), vocab.end(), s) != vocab.end(); };

  __extension__ typedef unsigned __int128 u128;
  while (vocab.size() < vocab_size) {
    std::map<SymbolPair, std::uint64_t> pairs;
    std::map<std::string, std::uint64_t> units;
    for (const auto& [syms, c] : words) {
      for (const auto& s : syms) units[s] += c;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) pairs[{syms[i], syms[i + 1]}] += c;
    }
    const SymbolPair* best = nullptr;
    std::uint64_t bc = 0;
    u128 bden = 1;
    for (const auto& [p, c] : pairs) {
      if (c < std::max<std::uint64_t>(1, config.min_frequency)) continue;
      const std::string merged = p.first + p.second.substr(prefix.size());
      if (!p.first.starts_with(prefix) && merged.starts_with(prefix)) continue;
      if (reserved.contains(merged)) continue;
      const u128 den = static_cast<u128>(units[p.first]) * units[p.second];
      if (best) {
        const u128 lhs = static_cast<u128>(c) * bden;
        const u128 rhs = static_cast<u128>(bc) * den;
        // Ascending map order means an equal (score, count) keeps the earlier pair.
        if (lhs < rhs || (lhs == rhs && c <= bc)) continue;
      }
      best = &p;
      bc = c;
      bden = den;
    }
    if (!best) break;
    if (static_cast<double>(bc) / static_cast<double>(bden) <= config.min_score) break;
    const SymbolPair chosen = *best;
    const std::string merged = chosen.first + chosen.second.substr(prefix.size());
    for (auto& [syms, _] : words) {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == chosen.first && syms[i + 1] == chosen.second) {
          out.push_back(merged);
          i += 2;
        } else {
          out.push_back(syms[i++]);
        }
      }
      syms.swap(out);
    }
    if (!in_vocab(merged)) vocab.push_back(merged);
  }
  return vocab;
}

std::vector<std::string> naive_bpe_encode(const std::vector<SymbolPair>& merges, const std::string& word) {
  auto syms = scalars(word);
  for (;;) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      for (std::size_t r = 0; r < merges.size() && r < best_rank; ++r) {
        if (merges[r].first == syms[i] && merges[r].second == syms[i + 1]) {
          best_rank = r;
          at = i;
          break;
        }
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) return syms;
    syms[at] += syms[at + 1];
    syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(at) + 1);
  }
}

Enumeration enumerate_segmentations(const subtok::UnigramModel& model, const std::string& word) {
  Enumeration e;
  for_each_segmentation(model, word, [&](const std::vector<std::size_t>&, double score) {
    e.best = std::max(e.best, score);
    e.log_total = log_add(e.log_total, score);
    ++e.segmentations;
  });
  return e;
}

double brute_log_likelihood(const subtok::UnigramModel& model, const WordCounts& wc) {
  double ll = 0.0;
  for (const auto& e : wc) ll += static_cast<double>(e.count) * enumerate_segmentations(model, e.word).log_total;
  return ll;
}

std::vector<double> brute_em_log_probs(const subtok::UnigramModel& model, const WordCounts& wc) {
  std::vector<double> expected(model.pieces().size(), 0.0);
  for (const auto& e : wc) {
    const double z = enumerate_segmentations(model, e.word).log_total;
    for_each_segmentation(model, e.word, [&](const std::vector<std::size_t>& pieces, double score) {
      const double w = std::exp(score - z) * static_cast<double>(e.count);
      for (auto p : pieces) expected[p] += w;
    });
  }
  double total = 0.0;
  for (double x : expected) total += x;
  std::vector<double> out;
  for (double x : expected) out.push_back(x > 0 ? std::log(x / total) : -std::numeric_limits<double>::infinity());
  return out;
}

std::vector<std::string> random_alphabet(Rng& rng, std::size_t n) {
  std::vector<std::string> pool;
  for (char c = 'a'; c <= 'z'; ++c) pool.emplace_back(1, c);
  for (char32_t cp = 0x0F40; cp <= 0x0F60; ++cp) pool.push_back(subtok::utf8::encode(cp));
  for (char32_t cp : {U'ི', U'ུ', U'ེ', U'ོ', U'་'}) pool.push_back(subtok::utf8::encode(cp));
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(n, pool.size()));
  return pool;
}

std::string random_word(Rng& rng, const std::vector<std::string>& alphabet, std::size_t min_len,
                        std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string w;
  for (std::size_t i = len(rng); i > 0; --i) w += alphabet[pick(rng)];
  return w;
}

WordCounts random_word_counts(Rng& rng, const std::vector<std::string>& alphabet, std::size_t max_words,
                              std::size_t max_len, std::uint64_t max_count) {
  WordCounts wc;
  std::uniform_int_distribution<std::size_t> nwords(1, max_words);
  std::uniform_int_distribution<std::uint64_t> count(1, max_count);
  for (std::size_t i = nwords(rng); i > 0; --i) wc.add(random_word(rng, alphabet, 1, max_len), count(rng));
  return wc;
}

std::string random_utf8(Rng& rng, std::size_t max_scalars) {
  static const char32_t spaces[] = {U' ', U'\t', U'\n', U'\r', U' ', U'　', U' '};
  std::uniform_int_distribution<std::size_t> len(0, max_scalars);
  std::uniform_int_distribution<int> cat(0, 99);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) {
    const int c = cat(rng);
    char32_t cp;
    if (c < 25) {
      cp = std::uniform_int_distribution<char32_t>(0x21, 0x7E)(rng);
    } else if (c < 30) {
      cp = std::uniform_int_distribution<char32_t>(0x00, 0x7F)(rng);
    } else if (c < 45) {
      cp = spaces[std::uniform_int_distribution<std::size_t>(0, std::size(spaces) - 1)(rng)];
    } else if (c < 75) {
      cp = std::uniform_int_distribution<char32_t>(0x0F00, 0x0FFF)(rng);
    } else if (c < 90) {
      do {
        cp = std::uniform_int_distribution<char32_t>(0x80, 0xFFFF)(rng);
      } while (cp >= 0xD800 && cp <= 0xDFFF);
    } else {
      cp = std::uniform_int_distribution<char32_t>(0x10000, 0x10FFFF)(rng);
    }
    subtok::utf8::append(s, cp);
  }
  return s;
}

std::string random_text(Rng& rng, const std::vector<std::string>& alphabet, std::size_t max_words) {
  static const char* gaps[] = {" ", " ", " ", "  ", "\t", "\n", " \n "};
  std::uniform_int_distribution<std::size_t> nwords(0, max_words);
  std::uniform_int_distribution<std::size_t> gap(0, std::size(gaps) - 1);
  std::bernoulli_distribution edge(0.2);
  std::string s;
  if (edge(rng)) s += gaps[gap(rng)];
  for (std::size_t i = nwords(rng); i > 0; --i) {
    s += random_word(rng, alphabet, 1, 8);
    if (i > 1 || edge(rng)) s += gaps[gap(rng)];
  }
  return s;
}

subtok::TokenSeq random_token_seq(Rng& rng, std::size_t max_words, std::size_t max_tokens) {
  subtok::TokenSeq ts;
  std::uniform_int_distribution<std::size_t> nwords(1, max_words);
  std::uniform_int_distribution<std::size_t> ntok(1, max_tokens);
  std::uniform_int_distribution<subtok::TokenId> id(0, 999);
  const std::size_t n = nwords(rng);
  ts.gaps.assign(n + 1, " ");
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t k = ntok(rng);
    ts.word_spans.push_back({w, ts.ids.size(), k, false});
    for (std::size_t i = 0; i < k; ++i) {
      ts.ids.push_back(id(rng));
      ts.pieces.push_back("p" + std::to_string(ts.ids.back()));
    }
  }
  return ts;
}

std::string vocab_json(const subtok::Vocab& vocab) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < vocab.size(); ++i) j[vocab.pieces()[i]] = i;
  return j.dump();
}

}  // namespace oracle
