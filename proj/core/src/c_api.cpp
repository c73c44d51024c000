#include "subtok/c_api.h"

#include <cstdlib>
#include <cstring>
#include <new>

#include "json.hpp"
#include "subtok/error.hpp"
#include "subtok/evaluation.hpp"
#include "subtok/tokenizer.hpp"
#include "subtok/version.hpp"

struct subtok_tokenizer {
  subtok::Tokenizer tok;
};

namespace {

char* dup(std::string_view s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

void set_error(char** error, std::string_view msg) {
  if (!error) return;
  *error = static_cast<char*>(std::malloc(msg.size() + 1));
  if (!*error) return;
  std::memcpy(*error, msg.data(), msg.size());
  (*error)[msg.size()] = '\0';
}

template <class F>
int guarded(char** error, F&& f) {
  if (error) *error = nullptr;
  try {
    f();
    return SUBTOK_OK;
  } catch (const subtok::Error& e) {
    set_error(error, e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    set_error(error, e.what());
    return SUBTOK_ERR_INTERNAL;
  } catch (...) {
    set_error(error, "unknown error");
    return SUBTOK_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw subtok::UsageError(std::string(what) + " must not be NULL");
}

subtok::PretokenPolicy policy_from(const char* policy_json) {
  subtok::PretokenPolicy p;
  if (!policy_json || !*policy_json) return p;
  try {
    auto j = nlohmann::json::parse(policy_json);
    if (j.contains("mode")) p.mode = subtok::parse_pretoken_mode(j["mode"].get<std::string>());
    if (j.contains("normalization")) p.normalization = subtok::parse_normalization(j["normalization"].get<std::string>());
    if (j.contains("lowercase")) p.lowercase = j["lowercase"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw subtok::UsageError(std::string("bad policy: ") + e.what());
  }
  return p;
}

}  // namespace

extern "C" {

const char* subtok_version(void) { return SUBTOK_VERSION; }

int subtok_train(const char* config_json, subtok_tokenizer** out, char** error) {
  return guarded(error, [&] {
    require(config_json, "config_json");
    require(out, "out");
    const auto cfg = subtok::run_config_from_json(config_json);
    auto tok = subtok::train_tokenizer(subtok::training_words(cfg), subtok::train_options(cfg));
    *out = new subtok_tokenizer{std::move(tok)};
  });
}

int subtok_save(const subtok_tokenizer* tok, const char* prefix, char** paths_json, char** error) {
  return guarded(error, [&] {
    require(tok, "tok");
    require(prefix, "prefix");
    require(paths_json, "paths_json");
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : subtok::save_tokenizer(tok->tok, prefix)) list.push_back(p.string());
    *paths_json = dup(list.dump());
  });
}

int subtok_load(const char* path, subtok_tokenizer** out, char** error) {
  return guarded(error, [&] {
    require(path, "path");
    require(out, "out");
    *out = new subtok_tokenizer{subtok::load_model(path)};
  });
}

int subtok_load_baseline(const char* spec, subtok_tokenizer** out, char** error) {
  return guarded(error, [&] {
    require(spec, "spec");
    require(out, "out");
    *out = new subtok_tokenizer{subtok::load_baseline(spec)};
  });
}

int subtok_name(const subtok_tokenizer* tok, char** name_out, char** error) {
  return guarded(error, [&] {
    require(tok, "tok");
    require(name_out, "name_out");
    *name_out = dup(tok->tok.name());
  });
}

int subtok_encode(const subtok_tokenizer* tok, const char* text, size_t len, const char* policy_json,
                  char** result_json, char** error) {
  return guarded(error, [&] {
    require(tok, "tok");
    require(result_json, "result_json");
    if (len > 0) require(text, "text");
    const auto seq = tok->tok.encode(std::string_view(text ? text : "", len), policy_from(policy_json));
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < seq.size(); ++i) {
      // Byte-level pieces may be partial UTF-8; replace rather than fail.
      arr.push_back({seq.ids[i], seq.pieces[i]});
    }
    *result_json = dup(arr.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
  });
}

int subtok_roundtrip(const subtok_tokenizer* tok, const char* text, size_t len, const char* policy_json,
                     char** out, size_t* out_len, char** error) {
  return guarded(error, [&] {
    require(tok, "tok");
    require(out, "out");
    if (len > 0) require(text, "text");
    const auto seq = tok->tok.encode(std::string_view(text ? text : "", len), policy_from(policy_json));
    const std::string s = tok->tok.detokenize(seq);
    *out = dup(s);
    if (out_len) *out_len = s.size();
  });
}

int subtok_decode(const subtok_tokenizer* tok, const int32_t* ids, size_t n, char** out, size_t* out_len,
                  char** error) {
  return guarded(error, [&] {
    require(tok, "tok");
    require(out, "out");
    if (n > 0) require(ids, "ids");
    const std::string s = tok->tok.decode(std::span<const std::int32_t>(ids, n));
    *out = dup(s);
    if (out_len) *out_len = s.size();
  });
}

int subtok_evaluate(const char* config_json, char** report_json, char** error) {
  return guarded(error, [&] {
    require(config_json, "config_json");
    require(report_json, "report_json");
    const auto cfg = subtok::eval_config_from_json(config_json);
    *report_json = dup(subtok::report_json(subtok::run_evaluation(cfg)));
  });
}

void subtok_free_string(char* s) { std::free(s); }

void subtok_free(subtok_tokenizer* tok) { delete tok; }

}  // extern "C"
