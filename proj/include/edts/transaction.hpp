#pragma once

#include "edts/bytes.hpp"
#include "edts/hash.hpp"

#include <cstdint>
#include <vector>

namespace edts {

inline constexpr std::uint32_t kTxVersion = 1;
inline constexpr std::uint32_t kDefaultTxSize = 500;
inline constexpr std::uint32_t kTxFieldBytes = 40;  // smallest legal size_bytes

// Wire body (little-endian), zero-padded to size_bytes:
//   u32 version | u32 size_bytes | u64 serial | f64 amount | f64 fee | i64 arrival_ms
struct Transaction {
    Hash256 txid;
    std::uint32_t size_bytes = kDefaultTxSize;
    std::uint64_t serial = 0;
    double amount = 0.0;
    double fee = 0.0;
    std::int64_t arrival_ms = 0;

    /// Builds the transaction and computes its txid from the wire body.
    static Transaction make(std::uint64_t serial, double amount, double fee, std::int64_t arrival_ms,
                            std::uint32_t size_bytes = kDefaultTxSize);

    void serialize_into(ByteWriter& out) const;
    std::vector<std::uint8_t> serialize() const;
    Hash256 compute_txid() const;

    /// Throws MalformedBytes on a bad version, short size or nonzero padding.
    static Transaction deserialize(ByteReader& in);
};

/// A transaction before its fee is fixed: the fee depends on the A3 attribute.
struct TxRecord {
    std::uint64_t serial = 0;
    double amount = 0.0;
    std::int64_t arrival_ms = 0;
    std::uint32_t size_bytes = kDefaultTxSize;

    Transaction materialize(double fee_fraction) const;
};

} // namespace edts
