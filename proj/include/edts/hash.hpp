#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace edts {

/// 256-bit digest. Ordering is lexicographic over the stored bytes, which is
/// the "ascending txid" order used everywhere in block construction.
struct Hash256 {
    std::array<std::uint8_t, 32> bytes{};

    friend auto operator<=>(const Hash256&, const Hash256&) = default;

    std::string hex() const;
    static Hash256 from_hex(std::string_view hex);

    /// First eight bytes read little-endian.
    std::uint64_t prefix64() const noexcept;
    bool is_null() const noexcept;
};

struct Hash256Hasher {
    std::size_t operator()(const Hash256& h) const noexcept { return h.prefix64(); }
};

Hash256 sha256(std::span<const std::uint8_t> data);

/// SHA-256 applied twice, as for transaction ids and Merkle nodes.
Hash256 sha256d(std::span<const std::uint8_t> data);

/// sha256d(left || right)
Hash256 hash_pair(const Hash256& left, const Hash256& right);

} // namespace edts
