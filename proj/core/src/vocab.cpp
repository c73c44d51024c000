#include "subtok/vocab.hpp"

#include <fmt/format.h>

#include "subtok/error.hpp"

namespace subtok {

Vocab::Vocab(std::vector<std::string> pieces) {
  for (auto& p : pieces) {
    if (contains(p)) throw DataError("duplicate vocabulary piece '" + p + "'");
    add(p);
  }
}

TokenId Vocab::add(std::string_view piece) {
  if (auto id = find(piece)) return *id;
  const auto id = static_cast<TokenId>(pieces_.size());
  pieces_.emplace_back(piece);
  index_.emplace(pieces_.back(), id);
  return id;
}

std::optional<TokenId> Vocab::find(std::string_view piece) const {
  auto it = index_.find(piece);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::piece(TokenId id) const {
  if (!valid(id)) throw DataError("token id " + std::to_string(id) + " out of range");
  return pieces_[static_cast<std::size_t>(id)];
}

std::string byte_token(unsigned char b) { return fmt::format("<0x{:02X}>", b); }

std::optional<unsigned char> parse_byte_token(std::string_view piece) {
  if (piece.size() != 6 || piece.substr(0, 3) != "<0x" || piece[5] != '>') return std::nullopt;
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  const int hi = hex(piece[3]);
  const int lo = hex(piece[4]);
  if (hi < 0 || lo < 0) return std::nullopt;
  return static_cast<unsigned char>(hi * 16 + lo);
}

}  // namespace subtok
