/* C-compatible boundary for language bindings. Strings are UTF-8. Every
 * function returns a status (0 ok, 1 usage, 2 data, 3 internal); on failure
 * *error receives a message to release with subtok_free_string. */
#ifndef SUBTOK_C_API_H
#define SUBTOK_C_API_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct subtok_tokenizer subtok_tokenizer;

enum {
  SUBTOK_OK = 0,
  SUBTOK_ERR_USAGE = 1,
  SUBTOK_ERR_DATA = 2,
  SUBTOK_ERR_INTERNAL = 3
};

const char* subtok_version(void);

/* config_json: a training configuration object ("algorithm", "vocab_size",
 * "corpus_path", optional "policy", "min_frequency", ...). Trains once and
 * writes no files. */
int subtok_train(const char* config_json, subtok_tokenizer** out, char** error);

/* Writes the model next to `prefix`; *paths_json receives a JSON list of paths. */
int subtok_save(const subtok_tokenizer* tok, const char* prefix, char** paths_json, char** error);

int subtok_load(const char* path, subtok_tokenizer** out, char** error);
int subtok_load_baseline(const char* spec, subtok_tokenizer** out, char** error);

/* *name_out: tokenizer name. Release with subtok_free_string. */
int subtok_name(const subtok_tokenizer* tok, char** name_out, char** error);

/* *result_json: [[id, "piece"], ...]. policy_json may be NULL (whitespace). */
int subtok_encode(const subtok_tokenizer* tok, const char* text, size_t len, const char* policy_json,
                  char** result_json, char** error);

/* Exact inverse of subtok_encode for the same text and policy. */
int subtok_roundtrip(const subtok_tokenizer* tok, const char* text, size_t len, const char* policy_json,
                     char** out, size_t* out_len, char** error);

/* Concatenated surfaces of `ids`; *out may contain NUL bytes, see *out_len. */
int subtok_decode(const subtok_tokenizer* tok, const int32_t* ids, size_t n, char** out, size_t* out_len,
                  char** error);

/* config_json: evaluation configuration; *report_json: "metrics/v1" report. */
int subtok_evaluate(const char* config_json, char** report_json, char** error);

void subtok_free_string(char* s);
void subtok_free(subtok_tokenizer* tok);

#ifdef __cplusplus
}
#endif

#endif
