#include "edts/cuckoo.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace edts::cuckoo {

namespace {

constexpr std::uint64_t fmix64(std::uint64_t k) noexcept
{
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

std::uint64_t load_le64(const std::uint8_t* p) noexcept
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

// Seeded 64-bit hash over the 32-byte id.
std::uint64_t id_hash(const Hash256& id, std::uint64_t seed) noexcept
{
    std::uint64_t h = fmix64(seed ^ 0x6a09e667f3bcc908ULL);
    for (int i = 0; i < 4; ++i) {
        std::uint64_t w = load_le64(id.bytes.data() + 8 * i);
        h = fmix64(h ^ (w + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1)));
    }
    return h;
}

// Maps the high 32 bits of a hash onto [0, n) by multiply-shift.
std::uint32_t reduce(std::uint64_t h, std::uint32_t n) noexcept
{
    return static_cast<std::uint32_t>(((h >> 32) * n) >> 32);
}

std::uint32_t alpha_fixed(double alpha)
{
    return static_cast<std::uint32_t>(std::llround(alpha * 1e6));
}

std::size_t capacity_for(const FilterParams& p, std::uint32_t buckets)
{
    double alpha_q = alpha_fixed(p.alpha) / 1e6;
    return static_cast<std::size_t>(std::floor(alpha_q * double(buckets) * p.bucket_slots));
}

} // namespace

void FilterParams::validate() const
{
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("cuckoo filter epsilon must lie in (0, 1), got " + std::to_string(epsilon));
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::domain_error("cuckoo filter alpha must lie in (0, 1], got " + std::to_string(alpha));
    if (bucket_slots < 1 || bucket_slots > 255)
        throw std::domain_error("cuckoo filter bucket_slots must lie in [1, 255]");
    if (std::ceil(std::log2(1.0 / epsilon) + 3.0) > 64.0)
        throw std::domain_error("cuckoo filter epsilon too small for 64-bit fingerprints");
}

unsigned FilterParams::fingerprint_bits() const
{
    validate();
    return static_cast<unsigned>(std::ceil(std::log2(1.0 / epsilon) + 3.0));
}

double space_cost_bits(double epsilon, double alpha)
{
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("space_cost_bits: epsilon must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("space_cost_bits: alpha must lie in (0, 1]");
    return (std::log2(1.0 / epsilon) + 3.0) / alpha;
}

double space_cost_bytes(double epsilon, double alpha)
{
    return space_cost_bits(epsilon, alpha) / 8.0;
}

BucketPair Placement::buckets() const
{
    return primary <= alternate ? BucketPair{primary, alternate} : BucketPair{alternate, primary};
}

const char* to_string(InsertResult r)
{
    switch (r) {
    case InsertResult::inserted: return "inserted";
    case InsertResult::capacity_exceeded: return "capacity exceeded";
    case InsertResult::eviction_exhausted: return "eviction loop exhausted";
    }
    return "?";
}

std::uint32_t CuckooFilter::buckets_for(const FilterParams& params, std::size_t items)
{
    params.validate();
    double need = std::ceil(double(items) / (params.alpha * params.bucket_slots));
    if (need > 4.0e9) throw std::length_error("cuckoo filter too large");
    auto buckets = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(need));
    while (capacity_for(params, buckets) < items) ++buckets;
    return buckets;
}

CuckooFilter::CuckooFilter(const FilterParams& params, std::size_t expected_items)
    : CuckooFilter(params, buckets_for(params, expected_items), true)
{
}

CuckooFilter CuckooFilter::with_bucket_count(const FilterParams& params, std::uint32_t bucket_count)
{
    if (bucket_count == 0) throw std::domain_error("cuckoo filter needs at least one bucket");
    return CuckooFilter(params, bucket_count, true);
}

CuckooFilter::CuckooFilter(const FilterParams& params, std::uint32_t bucket_count, bool)
    : params_(params),
      fp_bits_(params.fingerprint_bits()),
      bucket_count_(bucket_count),
      capacity_(capacity_for(params, bucket_count)),
      slots_(std::size_t(bucket_count) * params.bucket_slots, 0),
      kick_rng_(derive_seed(params.seed, 0x6b69636bULL))
{
}

double CuckooFilter::load_factor() const
{
    return double(occupied_) / double(slots_.size());
}

Placement CuckooFilter::placement(const Hash256& id) const
{
    std::uint64_t h = id_hash(id, params_.seed);
    std::uint64_t fp = fmix64(h ^ 0x510e527fade682d1ULL);
    if (fp_bits_ < 64) fp &= (std::uint64_t{1} << fp_bits_) - 1;
    if (fp == 0) fp = 1;  // zero marks an empty slot
    Placement p;
    p.primary = reduce(h, bucket_count_);
    p.alternate = alternate_index(p.primary, fp);
    p.fingerprint = fp;
    return p;
}

std::uint32_t CuckooFilter::alternate_index(std::uint32_t index, std::uint64_t fingerprint) const
{
    // (h(fp) - index) mod B is its own inverse for any bucket count
    std::uint32_t offset = reduce(fmix64(fingerprint ^ params_.seed ^ 0x9b05688c2b3e6c1fULL), bucket_count_);
    return offset >= index ? offset - index : offset + bucket_count_ - index;
}

bool CuckooFilter::bucket_has(std::uint32_t bucket, std::uint64_t fp) const
{
    for (unsigned i = 0; i < params_.bucket_slots; ++i)
        if (slot(bucket, i) == fp) return true;
    return false;
}

bool CuckooFilter::try_place(std::uint32_t bucket, std::uint64_t fp)
{
    for (unsigned i = 0; i < params_.bucket_slots; ++i) {
        if (slot(bucket, i) == 0) {
            slot(bucket, i) = fp;
            return true;
        }
    }
    return false;
}

InsertResult CuckooFilter::insert(const Hash256& id)
{
    if (occupied_ >= capacity_) return InsertResult::capacity_exceeded;

    const Placement p = placement(id);
    if (try_place(p.primary, p.fingerprint) || try_place(p.alternate, p.fingerprint)) {
        ++occupied_;
        return InsertResult::inserted;
    }

    struct Kick {
        std::uint32_t bucket;
        unsigned slot;
        std::uint64_t previous;
    };
    std::vector<Kick> path;
    path.reserve(kMaxKicks);

    std::uint64_t fp = p.fingerprint;
    std::uint32_t bucket = kick_rng_.coin() ? p.primary : p.alternate;
    for (int n = 0; n < kMaxKicks; ++n) {
        auto i = static_cast<unsigned>(kick_rng_.uniform_index(params_.bucket_slots));
        path.push_back({bucket, i, slot(bucket, i)});
        std::swap(fp, slot(bucket, i));
        bucket = alternate_index(bucket, fp);
        if (try_place(bucket, fp)) {
            ++occupied_;
            return InsertResult::inserted;
        }
    }

    // undo the chain so no stored fingerprint is lost
    for (auto it = path.rbegin(); it != path.rend(); ++it) slot(it->bucket, it->slot) = it->previous;
    return InsertResult::eviction_exhausted;
}

bool CuckooFilter::contains(const Hash256& id) const
{
    const Placement p = placement(id);
    return bucket_has(p.primary, p.fingerprint) || bucket_has(p.alternate, p.fingerprint);
}

bool CuckooFilter::erase(const Hash256& id)
{
    const Placement p = placement(id);
    for (auto bucket : {p.primary, p.alternate}) {
        for (unsigned i = 0; i < params_.bucket_slots; ++i) {
            if (slot(bucket, i) == p.fingerprint) {
                slot(bucket, i) = 0;
                --occupied_;
                return true;
            }
        }
    }
    return false;
}

std::size_t CuckooFilter::serialized_size(const FilterParams& params, std::uint32_t bucket_count)
{
    std::size_t bits = std::size_t(bucket_count) * params.bucket_slots * params.fingerprint_bits();
    return kSerializedHeaderBytes + (bits + 7) / 8;
}

std::size_t CuckooFilter::serialized_size() const
{
    return serialized_size(params_, bucket_count_);
}

std::vector<std::uint8_t> CuckooFilter::serialize() const
{
    std::vector<std::uint8_t> out;
    out.reserve(serialized_size());
    ByteWriter w(out);
    serialize_into(w);
    return out;
}

// Layout (little-endian):
//   u8 magic | u8 version | u8 fingerprint bits | u8 bucket slots | f64 epsilon |
//   u32 alpha (millionths) | u64 seed | u32 bucket count | u32 item count |
//   bit-packed fingerprints, slot-major, LSB first, zero-padded to a byte
void CuckooFilter::serialize_into(ByteWriter& out) const
{
    out.put_u8(kFormatMagic);
    out.put_u8(kFormatVersion);
    out.put_u8(static_cast<std::uint8_t>(fp_bits_));
    out.put_u8(static_cast<std::uint8_t>(params_.bucket_slots));
    out.put_f64(params_.epsilon);
    out.put_u32(alpha_fixed(params_.alpha));
    out.put_u64(params_.seed);
    out.put_u32(bucket_count_);
    out.put_u32(static_cast<std::uint32_t>(occupied_));

    std::uint64_t acc = 0;  // pending bits, LSB first
    unsigned acc_bits = 0;
    for (std::uint64_t fp : slots_) {
        unsigned remaining = fp_bits_;
        while (remaining > 0) {
            unsigned take = std::min(remaining, 64 - acc_bits);
            std::uint64_t chunk = take == 64 ? fp : (fp & ((std::uint64_t{1} << take) - 1));
            acc |= acc_bits == 64 ? 0 : (chunk << acc_bits);
            acc_bits += take;
            fp = take == 64 ? 0 : (fp >> take);
            remaining -= take;
            while (acc_bits >= 8) {
                out.put_u8(static_cast<std::uint8_t>(acc));
                acc >>= 8;
                acc_bits -= 8;
            }
        }
    }
    if (acc_bits > 0) out.put_u8(static_cast<std::uint8_t>(acc));
}

CuckooFilter CuckooFilter::deserialize(std::span<const std::uint8_t> bytes)
{
    ByteReader in(bytes);
    CuckooFilter f = deserialize(in);
    if (!in.at_end()) throw MalformedBytes("trailing bytes after cuckoo filter");
    return f;
}

CuckooFilter CuckooFilter::deserialize(ByteReader& in)
{
    if (in.get_u8() != kFormatMagic) throw MalformedBytes("cuckoo filter: bad magic byte");
    if (in.get_u8() != kFormatVersion) throw MalformedBytes("cuckoo filter: unsupported version");
    unsigned fp_bits = in.get_u8();
    unsigned slots = in.get_u8();

    FilterParams params;
    params.bucket_slots = slots;
    params.epsilon = in.get_f64();
    params.alpha = in.get_u32() / 1e6;
    params.seed = in.get_u64();
    std::uint32_t buckets = in.get_u32();
    std::uint32_t count = in.get_u32();

    try {
        params.validate();
    } catch (const std::domain_error& e) {
        throw MalformedBytes(std::string("cuckoo filter: ") + e.what());
    }
    if (params.fingerprint_bits() != fp_bits) throw MalformedBytes("cuckoo filter: fingerprint width mismatch");
    if (buckets == 0) throw MalformedBytes("cuckoo filter: zero buckets");

    const std::size_t total_slots = std::size_t(buckets) * slots;
    const std::size_t payload = (total_slots * fp_bits + 7) / 8;
    if (in.remaining() < payload) throw MalformedBytes("cuckoo filter: truncated fingerprint array");
    auto data = in.get_span(payload);

    CuckooFilter f(params, buckets, true);
    std::size_t bitpos = 0;
    std::size_t nonzero = 0;
    for (std::size_t s = 0; s < total_slots; ++s) {
        std::uint64_t fp = 0;
        for (unsigned b = 0; b < fp_bits; ++b, ++bitpos) {
            if ((data[bitpos >> 3] >> (bitpos & 7)) & 1U) fp |= std::uint64_t{1} << b;
        }
        f.slots_[s] = fp;
        if (fp != 0) ++nonzero;
    }
    if (bitpos & 7) {
        if (data[bitpos >> 3] >> (bitpos & 7)) throw MalformedBytes("cuckoo filter: nonzero padding bits");
    }
    if (nonzero != count) throw MalformedBytes("cuckoo filter: item count does not match stored fingerprints");
    if (count > f.capacity_) throw MalformedBytes("cuckoo filter: item count exceeds capacity");
    f.occupied_ = count;
    return f;
}

} // namespace edts::cuckoo
