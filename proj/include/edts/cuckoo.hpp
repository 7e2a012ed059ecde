#pragma once

#include "edts/bytes.hpp"
#include "edts/hash.hpp"
#include "edts/rng.hpp"

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace edts::cuckoo {

inline constexpr unsigned kDefaultBucketSlots = 4;
inline constexpr int kMaxKicks = 500;
inline constexpr std::uint8_t kFormatMagic = 0xCF;
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kSerializedHeaderBytes = 32;

struct FilterParams {
    double epsilon = 1e-6;   ///< target false-positive rate
    double alpha = 0.955;    ///< load factor at capacity
    unsigned bucket_slots = kDefaultBucketSlots;
    std::uint64_t seed = 0;

    /// Throws std::domain_error when a field is out of range.
    void validate() const;

    /// ceil(log2(1/epsilon) + 3)
    unsigned fingerprint_bits() const;
};

/// Upper bound on bits stored per item, (log2(1/eps) + 3) / alpha. Not rounded.
double space_cost_bits(double epsilon, double alpha);
double space_cost_bytes(double epsilon, double alpha);

/// Unordered pair of candidate buckets, stored as (low, high).
struct BucketPair {
    std::uint32_t low = 0;
    std::uint32_t high = 0;
    friend auto operator<=>(const BucketPair&, const BucketPair&) = default;
};

/// Where an item lives: its two candidate buckets and its fingerprint.
/// Two ids with equal placements are indistinguishable to the filter.
struct Placement {
    std::uint32_t primary = 0;
    std::uint32_t alternate = 0;
    std::uint64_t fingerprint = 0;

    BucketPair buckets() const;
    friend bool operator==(const Placement& a, const Placement& b)
    {
        return a.buckets() == b.buckets() && a.fingerprint == b.fingerprint;
    }
};

enum class InsertResult {
    inserted,
    capacity_exceeded,
    eviction_exhausted,
};

const char* to_string(InsertResult r);

class CuckooFilter {
public:
    /// Filter with the smallest bucket count that holds `expected_items` at load <= alpha.
    CuckooFilter(const FilterParams& params, std::size_t expected_items);

    static CuckooFilter with_bucket_count(const FilterParams& params, std::uint32_t bucket_count);
    static std::uint32_t buckets_for(const FilterParams& params, std::size_t items);

    InsertResult insert(const Hash256& id);
    bool contains(const Hash256& id) const;
    /// Removes one copy of the id's fingerprint. Returns false when absent.
    bool erase(const Hash256& id);

    Placement placement(const Hash256& id) const;
    std::uint32_t alternate_index(std::uint32_t index, std::uint64_t fingerprint) const;

    const FilterParams& params() const { return params_; }
    unsigned fingerprint_bits() const { return fp_bits_; }
    std::uint32_t bucket_count() const { return bucket_count_; }
    std::size_t size() const { return occupied_; }
    std::size_t capacity() const { return capacity_; }
    double load_factor() const;

    std::vector<std::uint8_t> serialize() const;
    void serialize_into(ByteWriter& out) const;
    std::size_t serialized_size() const;
    static std::size_t serialized_size(const FilterParams& params, std::uint32_t bucket_count);

    /// Throws MalformedBytes. The reader form consumes exactly one filter.
    static CuckooFilter deserialize(std::span<const std::uint8_t> bytes);
    static CuckooFilter deserialize(ByteReader& in);

private:
    CuckooFilter(const FilterParams& params, std::uint32_t bucket_count, bool);

    std::uint64_t& slot(std::uint32_t bucket, unsigned i) { return slots_[std::size_t(bucket) * params_.bucket_slots + i]; }
    std::uint64_t slot(std::uint32_t bucket, unsigned i) const { return slots_[std::size_t(bucket) * params_.bucket_slots + i]; }
    bool bucket_has(std::uint32_t bucket, std::uint64_t fp) const;
    bool try_place(std::uint32_t bucket, std::uint64_t fp);

    FilterParams params_;
    unsigned fp_bits_ = 0;
    std::uint32_t bucket_count_ = 0;
    std::size_t capacity_ = 0;
    std::size_t occupied_ = 0;
    std::vector<std::uint64_t> slots_;  // 0 marks an empty slot
    Rng kick_rng_;
};

} // namespace edts::cuckoo
