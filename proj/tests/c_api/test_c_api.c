/* Exercises the C interface from a C translation unit. */
#define _POSIX_C_SOURCE 200809L
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

#include "subtok/c_api.h"

static int failures = 0;

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void write_file(const char* path, const char* text) {
  FILE* f = fopen(path, "wb");
  if (!f) {
    perror(path);
    exit(2);
  }
  fputs(text, f);
  fclose(f);
}

static void test_errors(void) {
  char* err = NULL;
  subtok_tokenizer* tok = NULL;
  CHECK(subtok_load_baseline("nonsense:x", &tok, &err) == SUBTOK_ERR_USAGE);
  CHECK(tok == NULL);
  CHECK(err != NULL && strlen(err) > 0);
  subtok_free_string(err);
  err = NULL;
  CHECK(subtok_load("/nonexistent/model.unigram", &tok, &err) == SUBTOK_ERR_DATA);
  subtok_free_string(err);
  err = NULL;
  CHECK(subtok_train("{not json", &tok, &err) == SUBTOK_ERR_USAGE);
  subtok_free_string(err);
  err = NULL;
  CHECK(subtok_name(NULL, NULL, &err) == SUBTOK_ERR_USAGE);
  subtok_free_string(err);
  /* A NULL error pointer is allowed. */
  CHECK(subtok_load_baseline("nonsense:x", &tok, NULL) == SUBTOK_ERR_USAGE);
}

static void test_bytes(void) {
  char* err = NULL;
  subtok_tokenizer* tok = NULL;
  CHECK(subtok_load_baseline("bytes", &tok, &err) == SUBTOK_OK);
  char* name = NULL;
  CHECK(subtok_name(tok, &name, &err) == SUBTOK_OK);
  CHECK(strcmp(name, "bytes") == 0);
  subtok_free_string(name);

  char* json = NULL;
  CHECK(subtok_encode(tok, "ab", 2, NULL, &json, &err) == SUBTOK_OK);
  CHECK(strcmp(json, "[[97,\"a\"],[98,\"b\"]]") == 0);
  subtok_free_string(json);

  /* Embedded NUL survives decode. */
  const int32_t ids[] = {97, 0, 98};
  char* out = NULL;
  size_t out_len = 0;
  CHECK(subtok_decode(tok, ids, 3, &out, &out_len, &err) == SUBTOK_OK);
  CHECK(out_len == 3 && memcmp(out, "a\0b", 3) == 0);
  subtok_free_string(out);

  const int32_t bad[] = {4096};
  CHECK(subtok_decode(tok, bad, 1, &out, &out_len, &err) != SUBTOK_OK);
  subtok_free_string(err);
  err = NULL;

  const char text[] = "  x\ty  ";
  CHECK(subtok_roundtrip(tok, text, strlen(text), "{\"mode\":\"whitespace\",\"normalization\":\"none\"}", &out,
                         &out_len, &err) == SUBTOK_OK);
  CHECK(out_len == strlen(text) && memcmp(out, text, out_len) == 0);
  subtok_free_string(out);

  CHECK(subtok_encode(tok, "a", 1, "{\"mode\":\"bogus\"}", &json, &err) == SUBTOK_ERR_USAGE);
  subtok_free_string(err);
  subtok_free(tok);
}

static void test_train_save_load_evaluate(const char* dir) {
  char corpus[512], dataset[512], prefix[512], config[2048];
  snprintf(corpus, sizeof corpus, "%s/corpus.txt", dir);
  snprintf(dataset, sizeof dataset, "%s/data.txt", dir);
  snprintf(prefix, sizeof prefix, "%s/wp", dir);
  write_file(corpus, "abc abd abc\nab ab abe\nbcd abc\n");
  write_file(dataset, "beg abc ab * end\n");

  char* err = NULL;
  subtok_tokenizer* tok = NULL;
  snprintf(config, sizeof config, "{\"algorithm\":\"wordpiece\",\"vocab_size\":12,\"corpus_path\":\"%s\"}", corpus);
  CHECK(subtok_train(config, &tok, &err) == SUBTOK_OK);
  if (err) fprintf(stderr, "%s\n", err);

  char* paths = NULL;
  CHECK(subtok_save(tok, prefix, &paths, &err) == SUBTOK_OK);
  CHECK(paths != NULL && strstr(paths, "wp.wordpiece") != NULL);
  subtok_free_string(paths);

  char path[600];
  snprintf(path, sizeof path, "%s.wordpiece", prefix);
  subtok_tokenizer* back = NULL;
  CHECK(subtok_load(path, &back, &err) == SUBTOK_OK);
  char *a = NULL, *b = NULL;
  CHECK(subtok_encode(tok, "abc abd", 7, NULL, &a, &err) == SUBTOK_OK);
  CHECK(subtok_encode(back, "abc abd", 7, NULL, &b, &err) == SUBTOK_OK);
  CHECK(a && b && strcmp(a, b) == 0);
  subtok_free_string(a);
  subtok_free_string(b);
  subtok_free(back);
  subtok_free(tok);

  char* report = NULL;
  snprintf(config, sizeof config,
           "{\"models\":[\"%s\"],\"baselines\":[\"bytes\"],\"dataset_path\":\"%s\",\"runs\":0}", path, dataset);
  CHECK(subtok_evaluate(config, &report, &err) == SUBTOK_OK);
  CHECK(report != NULL && strstr(report, "\"metrics/v1\"") != NULL);
  CHECK(report != NULL && strstr(report, "\"nsl_matrix\"") != NULL);
  subtok_free_string(report);

  CHECK(subtok_evaluate("{\"dataset_path\":\"/nonexistent\"}", &report, &err) == SUBTOK_ERR_DATA);
  subtok_free_string(err);
}

int main(void) {
  char dir[] = "/tmp/subtok_c_api_XXXXXX";
  if (!mkdtemp(dir)) {
    perror("mkdtemp");
    return 2;
  }
  CHECK(subtok_version() != NULL && strlen(subtok_version()) > 0);
  test_errors();
  test_bytes();
  test_train_save_load_evaluate(dir);

  char cmd[600];
  snprintf(cmd, sizeof cmd, "rm -rf '%s'", dir);
  if (system(cmd) != 0) fprintf(stderr, "could not remove %s\n", dir);
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  puts("c api: all checks passed");
  return 0;
}
