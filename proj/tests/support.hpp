#pragma once

#include "edts/codec.hpp"
#include "edts/cuckoo.hpp"
#include "edts/dts.hpp"
#include "edts/rng.hpp"
#include "edts/transaction.hpp"

#include <optional>
#include <vector>

namespace testing {

inline edts::Hash256 random_id(edts::Rng& rng)
{
    edts::Hash256 h;
    for (int w = 0; w < 4; ++w) {
        auto v = rng.next();
        for (int k = 0; k < 8; ++k) h.bytes[static_cast<std::size_t>(w * 8 + k)] = static_cast<std::uint8_t>(v >> (8 * k));
    }
    return h;
}

/// Transactions with lognormal fees around e^mu and distinct serials.
inline std::vector<edts::Transaction> random_txs(edts::Rng& rng, std::size_t n, std::uint64_t first_serial = 0,
                                                 double mu = 9.5, double sigma = 1.5)
{
    std::vector<edts::Transaction> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double fee = std::exp(mu + sigma * rng.normal());
        auto arrival = static_cast<std::int64_t>(rng.uniform_index(10'000'000));
        out.push_back(edts::Transaction::make(first_serial + i, fee * 10.0, fee, arrival));
    }
    return out;
}

inline edts::Mempool pool_of(const std::vector<edts::Transaction>& txs, std::size_t capacity = 0)
{
    edts::Mempool pool(capacity ? capacity : txs.size() + 16);
    for (const auto& tx : txs) pool.add(tx);
    return pool;
}

/// Brute-forces a small transaction that tests positive in `filter` without being one of
/// `members`. Fee and arrival put it last in either priority order.
inline std::optional<edts::Transaction> find_false_positive(const edts::cuckoo::CuckooFilter& filter,
                                                            const std::vector<edts::Hash256>& members, double fee,
                                                            std::uint64_t first_serial, std::uint64_t max_tries)
{
    for (std::uint64_t s = first_serial; s < first_serial + max_tries; ++s) {
        auto tx = edts::Transaction::make(s, fee * 10.0, fee, INT64_MAX / 2, edts::kTxFieldBytes);
        if (!filter.contains(tx.txid)) continue;
        bool member = false;
        for (const auto& m : members) member = member || m == tx.txid;
        if (!member) return tx;
    }
    return std::nullopt;
}

} // namespace testing
