#include "subtok/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/regex.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utext.h>

#include "subtok/error.hpp"

namespace subtok {

namespace utf8 {

std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  return 4;
}

std::optional<std::size_t> find_invalid(std::string_view text) {
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (c >= 0xC2 && c <= 0xDF) {
      len = 2;
      cp = c & 0x1F;
      min = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
      min = 0x800;
    } else if (c >= 0xF0 && c <= 0xF4) {
      len = 4;
      cp = c & 0x07;
      min = 0x10000;
    } else {
      return i;
    }
    if (i + len > n) return i;
    for (std::size_t k = 1; k < len; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return i;
    i += len;
  }
  return std::nullopt;
}

void validate(std::string_view text, std::string_view context) {
  if (auto off = find_invalid(text)) throw Utf8Error(*off, std::string(context));
}

std::size_t count_scalars(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) n += (c & 0xC0) != 0x80;
  return n;
}

char32_t decode(std::string_view text, std::size_t& pos) {
  const auto c = static_cast<unsigned char>(text[pos]);
  const std::size_t len = sequence_length(c);
  char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
  for (std::size_t k = 1; k < len; ++k) {
    cp = (cp << 6) | (static_cast<unsigned char>(text[pos + k]) & 0x3F);
  }
  pos += len;
  return cp;
}

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(char32_t cp) {
  std::string s;
  append(s, cp);
  return s;
}

std::vector<std::string_view> split_scalars(std::string_view text) {
  std::vector<std::string_view> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace utf8

namespace {
struct ByteMap {
  std::array<std::string, 256> forward;
  std::array<int, 324> backward{};  // indexed by scalar value, -1 if unmapped

  ByteMap() {
    backward.fill(-1);
    int extra = 0;
    for (int b = 0; b < 256; ++b) {
      const bool printable = (b >= 0x21 && b <= 0x7E) || (b >= 0xA1 && b <= 0xAC) || b >= 0xAE;
      const int cp = printable ? b : 256 + extra++;
      forward[static_cast<std::size_t>(b)] = utf8::encode(static_cast<char32_t>(cp));
      backward[static_cast<std::size_t>(cp)] = b;
    }
  }
};

const ByteMap& byte_map() {
  static const ByteMap map;
  return map;
}
}  // namespace

const std::array<std::string, 256>& byte_to_unicode() { return byte_map().forward; }

std::optional<unsigned char> unicode_to_byte(std::string_view mapped_char) {
  if (mapped_char.empty()) return std::nullopt;
  std::size_t pos = 0;
  const char32_t cp = utf8::decode(mapped_char, pos);
  if (pos != mapped_char.size() || cp >= byte_map().backward.size()) return std::nullopt;
  const int b = byte_map().backward[cp];
  if (b < 0) return std::nullopt;
  return static_cast<unsigned char>(b);
}

std::string bytes_to_unicode_string(std::string_view bytes) {
  const auto& fwd = byte_to_unicode();
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) out += fwd[b];
  return out;
}

std::optional<std::string> unicode_string_to_bytes(std::string_view mapped) {
  std::string out;
  std::size_t pos = 0;
  while (pos < mapped.size()) {
    const std::size_t start = pos;
    const std::size_t len = utf8::sequence_length(static_cast<unsigned char>(mapped[pos]));
    if (start + len > mapped.size()) return std::nullopt;
    pos += len;
    auto b = unicode_to_byte(mapped.substr(start, len));
    if (!b) return std::nullopt;
    out.push_back(static_cast<char>(*b));
  }
  return out;
}

bool is_whitespace(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)); }

std::string normalize_nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw InternalError("ICU NFC normalizer unavailable");
  const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), text.size()));
  if (nfc->isNormalized(src, status) && U_SUCCESS(status)) return std::string(text);
  status = U_ZERO_ERROR;
  icu::UnicodeString dst = nfc->normalize(src, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

std::string to_lower(std::string_view text) {
  auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), text.size()));
  s.toLower();
  std::string out;
  s.toUTF8String(out);
  return out;
}

struct RegexSplitter::Impl {
  std::unique_ptr<icu::RegexPattern> pattern;
};

RegexSplitter::RegexSplitter(const std::string& pattern) : pattern_(pattern) {
  UErrorCode status = U_ZERO_ERROR;
  UParseError perr{};
  auto impl = std::make_shared<Impl>();
  impl->pattern.reset(icu::RegexPattern::compile(
      icu::UnicodeString::fromUTF8(icu::StringPiece(pattern.data(), pattern.size())), perr,
      status));
  if (U_FAILURE(status)) {
    throw UsageError("invalid pre-tokenization pattern at offset " +
                     std::to_string(perr.offset) + ": " + pattern);
  }
  impl_ = std::move(impl);
}

RegexSplitter::~RegexSplitter() = default;
RegexSplitter::RegexSplitter(const RegexSplitter&) = default;
RegexSplitter& RegexSplitter::operator=(const RegexSplitter&) = default;
RegexSplitter::RegexSplitter(RegexSplitter&&) noexcept = default;
RegexSplitter& RegexSplitter::operator=(RegexSplitter&&) noexcept = default;

std::vector<std::string> RegexSplitter::split(std::string_view text) const {
  std::vector<std::string> out;
  if (text.empty()) return out;
  UErrorCode status = U_ZERO_ERROR;
  UText* ut = utext_openUTF8(nullptr, text.data(), static_cast<int64_t>(text.size()), &status);
  if (U_FAILURE(status)) throw DataError("cannot open text for regex splitting");
  std::unique_ptr<icu::RegexMatcher> m(impl_->pattern->matcher(status));
  m->reset(ut);
  std::size_t last = 0;
  while (m->find(status) && U_SUCCESS(status)) {
    const auto start = static_cast<std::size_t>(m->start64(status));
    const auto end = static_cast<std::size_t>(m->end64(status));
    if (start > last) out.emplace_back(text.substr(last, start - last));
    if (end > start) out.emplace_back(text.substr(start, end - start));
    last = end;
  }
  if (last < text.size()) out.emplace_back(text.substr(last));
  m.reset();
  utext_close(ut);
  if (U_FAILURE(status)) throw DataError("regex splitting failed");
  return out;
}

}  // namespace subtok
