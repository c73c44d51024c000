#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace subtok {

namespace utf8 {

/// Byte offset of the first ill-formed sequence, or nullopt if `text` is valid.
/// Overlong forms, surrogates and scalars above U+10FFFF are rejected.
std::optional<std::size_t> find_invalid(std::string_view text);

/// Throws Utf8Error (with `context` in the message) when `text` is not valid.
void validate(std::string_view text, std::string_view context = "input");

std::size_t count_scalars(std::string_view text);

// Decodes the scalar starting at `pos` and advances `pos`. Input must be valid.
char32_t decode(std::string_view text, std::size_t& pos);

void append(std::string& out, char32_t cp);
std::string encode(char32_t cp);

// Byte length of the sequence introduced by lead byte `lead` (1..4).
std::size_t sequence_length(unsigned char lead);

/// Splits valid UTF-8 into one view per scalar.
std::vector<std::string_view> split_scalars(std::string_view text);

}  // namespace utf8

bool is_whitespace(char32_t cp);

inline constexpr char32_t kTsheg = U'་';

/// GPT-2 style reversible byte -> printable scalar mapping used by byte-level BPE.
const std::array<std::string, 256>& byte_to_unicode();
/// Inverse of byte_to_unicode for a single mapped scalar.
std::optional<unsigned char> unicode_to_byte(std::string_view mapped_char);
/// Maps every byte of `bytes` through byte_to_unicode.
std::string bytes_to_unicode_string(std::string_view bytes);
/// Inverse of bytes_to_unicode_string; nullopt if any scalar is not a mapped byte.
std::optional<std::string> unicode_string_to_bytes(std::string_view mapped);

std::string normalize_nfc(std::string_view text);
std::string to_lower(std::string_view text);

/// Regex-driven splitter over UTF-8 text (ICU syntax, so \p{L} and lookahead
/// work). Text not covered by any match is emitted as its own piece, so the
/// concatenation of the output always equals the input.
class RegexSplitter {
 public:
  explicit RegexSplitter(const std::string& pattern);
  ~RegexSplitter();
  RegexSplitter(const RegexSplitter&);
  RegexSplitter& operator=(const RegexSplitter&);
  RegexSplitter(RegexSplitter&&) noexcept;
  RegexSplitter& operator=(RegexSplitter&&) noexcept;

  std::vector<std::string> split(std::string_view text) const;
  const std::string& pattern() const { return pattern_; }

 private:
  struct Impl;
  std::string pattern_;
  std::shared_ptr<const Impl> impl_;
};

// GPT-2 style pre-tokenization pattern.
inline constexpr const char* kGpt2Pattern =
    R"('s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+)";

// o200k style pre-tokenization pattern.
inline constexpr const char* kO200kPattern =
    R"([^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]*[\p{Ll}\p{Lm}\p{Lo}\p{M}]+(?i:'s|'t|'re|'ve|'m|'ll|'d)?)"
    R"(|[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]+[\p{Ll}\p{Lm}\p{Lo}\p{M}]*(?i:'s|'t|'re|'ve|'m|'ll|'d)?)"
    R"(|\p{N}{1,3}| ?[^\s\p{L}\p{N}]+[\r\n/]*|\s*[\r\n]+|\s+(?!\S)|\s+)";

}  // namespace subtok
