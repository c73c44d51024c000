#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace subtok {

using TokenId = std::int32_t;

/// Dense id <-> piece bijection. Ids are assigned in insertion order.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> pieces);

  /// Appends `piece` and returns its id; returns the existing id if present.
  TokenId add(std::string_view piece);

  std::optional<TokenId> find(std::string_view piece) const;
  bool contains(std::string_view piece) const { return find(piece).has_value(); }
  const std::string& piece(TokenId id) const;
  bool valid(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < pieces_.size(); }

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.pieces_ == b.pieces_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> index_;
};

/// "<0xNN>" byte tokens used for byte fallback.
std::string byte_token(unsigned char b);
std::optional<unsigned char> parse_byte_token(std::string_view piece);

}  // namespace subtok
