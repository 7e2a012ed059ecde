#pragma once

#include "edts/bytes.hpp"
#include "edts/cuckoo.hpp"
#include "edts/dts.hpp"
#include "edts/hash.hpp"
#include "edts/transaction.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace edts::codec {

inline constexpr std::size_t kHeaderBytes = 80;
inline constexpr std::uint64_t kDefaultBlockSize = 1050000;
inline constexpr std::uint32_t kCoinbaseSize = kTxFieldBytes;
inline constexpr std::uint64_t kDefaultSearchCap = 1000000;
inline constexpr std::uint64_t kCoinbaseSerialBase = std::uint64_t{1} << 63;

/// Bitcoin-style Merkle root: sha256d over concatenated children, odd nodes paired
/// with themselves, a single leaf is its own root. Throws std::invalid_argument when empty.
Hash256 merkle_root(std::span<const Hash256> leaves);

// 80 bytes on the wire:
//   parent (32) | merkle_root (32) | u64 timestamp_ms | u32 nonce | u32 tx_count
struct BlockHeader {
    Hash256 parent;
    Hash256 merkle_root;
    std::uint64_t timestamp_ms = 0;
    std::uint32_t nonce = 0;
    std::uint32_t tx_count = 0;  // incorporated transactions, coinbase excluded

    void serialize_into(ByteWriter& out) const;
    static BlockHeader deserialize(ByteReader& in);
    Hash256 hash() const;
};

struct EfficientBlock {
    BlockHeader header;
    cuckoo::CuckooFilter filter;
    Transaction coinbase;
    std::vector<Transaction> inspectors;  // txid order
    std::vector<Transaction> full_txs;    // sender side only, txid order; never serialized

    Hash256 hash() const { return header.hash(); }

    std::size_t wire_size() const;
    std::vector<std::uint8_t> serialize() const;

    /// Decodes the wire form; full_txs is left empty. Throws MalformedBytes.
    static EfficientBlock deserialize(std::span<const std::uint8_t> bytes);
};

struct BuildParams {
    cuckoo::FilterParams filter;
    std::uint64_t block_size_cap = kDefaultBlockSize;
    std::uint64_t sequence = 0;  // distinguishes coinbase transactions
    std::uint64_t timestamp_ms = 0;
    std::uint32_t nonce = 0;
    std::uint32_t coinbase_size = kCoinbaseSize;
};

struct BuildReport {
    double leaf_budget = 0.0;
    double leaf_used = 0.0;              // over the incorporated transactions
    std::size_t selected = 0;            // chosen by the leaf budget
    std::size_t dropped = 0;             // selected but left out for the size cap or a failed insert
    bool closed_early = false;           // a filter insertion failed
    cuckoo::InsertResult last_insert = cuckoo::InsertResult::inserted;
    bool budget_exhausted = false;
    std::optional<double> next_leaf;
};

struct BuiltBlock {
    EfficientBlock block;
    BuildReport report;
};

/// (cap - 80) / space_cost_bytes(eps, alpha)
double leaf_budget(std::uint64_t block_size_cap, const cuckoo::FilterParams& filter);

BuiltBlock build_block(const Mempool& pool, const DtsAttributes& attrs, const Hash256& parent,
                       const BuildParams& params);

class ReconstructError : public std::runtime_error {
public:
    enum class Kind { no_candidate_matches, search_budget_exceeded };
    ReconstructError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct FilteredEntry {
    const Transaction* tx;
    cuckoo::Placement placement;
};

struct ReconstructStats {
    std::size_t candidates = 0;  // filter positives before inspector removal
    std::size_t singletons = 0;  // k
    std::size_t collided = 0;    // m
    std::uint64_t iterations = 0;
};

/// Filter positives of `pool`, txid order.
std::vector<FilteredEntry> filtered_txid_list(const EfficientBlock& block, const Mempool& pool);

/// Recovers the block's transactions (txid order) from a mempool. Throws ReconstructError.
std::vector<Transaction> reconstruct_block(const EfficientBlock& block, const Mempool& pool,
                                           std::uint64_t search_cap = kDefaultSearchCap,
                                           ReconstructStats* stats = nullptr);

/// C(n, k), saturating at `limit + 1`.
std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t limit);

} // namespace edts::codec
