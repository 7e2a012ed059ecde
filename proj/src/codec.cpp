#include "edts/codec.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

namespace edts::codec {

Hash256 merkle_root(std::span<const Hash256> leaves)
{
    if (leaves.empty()) throw std::invalid_argument("merkle_root: empty leaf list");
    std::vector<Hash256> level(leaves.begin(), leaves.end());
    while (level.size() > 1) {
        if (level.size() % 2 == 1) level.push_back(level.back());
        std::vector<Hash256> next(level.size() / 2);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] = hash_pair(level[2 * i], level[2 * i + 1]);
        level = std::move(next);
    }
    return level.front();
}

void BlockHeader::serialize_into(ByteWriter& out) const
{
    out.put_hash(parent);
    out.put_hash(merkle_root);
    out.put_u64(timestamp_ms);
    out.put_u32(nonce);
    out.put_u32(tx_count);
}

BlockHeader BlockHeader::deserialize(ByteReader& in)
{
    BlockHeader h;
    h.parent = in.get_hash();
    h.merkle_root = in.get_hash();
    h.timestamp_ms = in.get_u64();
    h.nonce = in.get_u32();
    h.tx_count = in.get_u32();
    return h;
}

Hash256 BlockHeader::hash() const
{
    std::vector<std::uint8_t> buf;
    buf.reserve(kHeaderBytes);
    ByteWriter w(buf);
    serialize_into(w);
    return sha256d(buf);
}

std::size_t EfficientBlock::wire_size() const
{
    std::size_t n = kHeaderBytes + filter.serialized_size() + coinbase.size_bytes + 4;
    for (const auto& tx : inspectors) n += tx.size_bytes;
    return n;
}

std::vector<std::uint8_t> EfficientBlock::serialize() const
{
    std::vector<std::uint8_t> out;
    out.reserve(wire_size());
    ByteWriter w(out);
    header.serialize_into(w);
    filter.serialize_into(w);
    coinbase.serialize_into(w);
    w.put_u32(static_cast<std::uint32_t>(inspectors.size()));
    for (const auto& tx : inspectors) tx.serialize_into(w);
    return out;
}

EfficientBlock EfficientBlock::deserialize(std::span<const std::uint8_t> bytes)
{
    ByteReader in(bytes);
    BlockHeader header = BlockHeader::deserialize(in);
    auto filter = cuckoo::CuckooFilter::deserialize(in);
    Transaction coinbase = Transaction::deserialize(in);
    std::uint32_t count = in.get_u32();
    if (count > in.remaining() / kTxFieldBytes) throw MalformedBytes("block: inspector count exceeds payload");
    std::vector<Transaction> inspectors;
    inspectors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) inspectors.push_back(Transaction::deserialize(in));
    if (!in.at_end()) throw MalformedBytes("block: trailing bytes");
    return EfficientBlock{header, std::move(filter), std::move(coinbase), std::move(inspectors), {}};
}

double leaf_budget(std::uint64_t block_size_cap, const cuckoo::FilterParams& filter)
{
    if (block_size_cap <= kHeaderBytes) throw std::invalid_argument("block size cap must exceed the 80-byte header");
    return static_cast<double>(block_size_cap - kHeaderBytes) / cuckoo::space_cost_bytes(filter.epsilon, filter.alpha);
}

namespace {

std::size_t fixed_overhead(const BuildParams& p, std::size_t n)
{
    auto buckets = cuckoo::CuckooFilter::buckets_for(p.filter, n);
    return kHeaderBytes + cuckoo::CuckooFilter::serialized_size(p.filter, buckets) + p.coinbase_size + 4;
}

// Largest n <= upper whose header, filter and coinbase fit under the cap.
std::size_t fit_filter(const BuildParams& p, std::size_t upper)
{
    if (fixed_overhead(p, 0) > p.block_size_cap)
        throw std::invalid_argument("block size cap too small for an empty block");
    std::size_t lo = 0, hi = upper;
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo + 1) / 2;
        if (fixed_overhead(p, mid) <= p.block_size_cap)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

} // namespace

BuiltBlock build_block(const Mempool& pool, const DtsAttributes& attrs, const Hash256& parent,
                       const BuildParams& params)
{
    params.filter.validate();
    BuildReport report;
    report.leaf_budget = leaf_budget(params.block_size_cap, params.filter);

    Selection sel;
    if (!pool.empty()) sel = plan_selection(pool, attrs, report.leaf_budget);
    report.selected = sel.admitted.size();
    report.budget_exhausted = sel.exhausted;
    report.next_leaf = sel.next_leaf;

    std::size_t n = fit_filter(params, sel.admitted.size());

    for (;;) {
        cuckoo::CuckooFilter filter(params.filter, n);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = filter.insert(sel.admitted[i].txid);
            if (r != cuckoo::InsertResult::inserted) {
                report.closed_early = true;
                report.last_insert = r;
                n = i;
                break;
            }
        }

        std::vector<Transaction> included(sel.admitted.begin(), sel.admitted.begin() + static_cast<std::ptrdiff_t>(n));
        std::sort(included.begin(), included.end(), [](const auto& a, const auto& b) { return a.txid < b.txid; });

        double reward = 0.0;
        for (const auto& tx : included) reward += tx.fee;
        Transaction coinbase = Transaction::make(kCoinbaseSerialBase + params.sequence, reward, 0.0,
                                                 static_cast<std::int64_t>(params.timestamp_ms), params.coinbase_size);

        std::vector<Hash256> ids;
        ids.reserve(included.size());
        for (const auto& tx : included) ids.push_back(tx.txid);

        std::vector<Transaction> inspectors;
        auto in_block = [&](const Hash256& id) { return std::binary_search(ids.begin(), ids.end(), id); };
        for (const auto& [id, tx] : pool)
            if (filter.contains(id) && !in_block(id)) inspectors.push_back(tx);

        std::vector<Hash256> leaves;
        leaves.reserve(included.size() + 1);
        leaves.push_back(coinbase.txid);
        leaves.insert(leaves.end(), ids.begin(), ids.end());

        BlockHeader header;
        header.parent = parent;
        header.merkle_root = merkle_root(leaves);
        header.timestamp_ms = params.timestamp_ms;
        header.nonce = params.nonce;
        header.tx_count = static_cast<std::uint32_t>(included.size());

        EfficientBlock block{header, std::move(filter), std::move(coinbase), std::move(inspectors), std::move(included)};
        if (block.wire_size() <= params.block_size_cap || n == 0) {
            if (block.wire_size() > params.block_size_cap)
                throw std::runtime_error("block size cap cannot hold the inspector list");
            report.dropped = report.selected - n;
            report.leaf_used = std::accumulate(sel.leaves.begin(), sel.leaves.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
            return BuiltBlock{std::move(block), report};
        }
        --n;
    }
}

std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t limit)
{
    if (k > n) return 0;
    k = std::min(k, n - k);
    // exact running product C(n-k+i, i); each step stays integral
    __extension__ using u128 = unsigned __int128;
    u128 c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > limit) return limit + 1;
    }
    return static_cast<std::uint64_t>(c);
}

std::vector<FilteredEntry> filtered_txid_list(const EfficientBlock& block, const Mempool& pool)
{
    std::vector<FilteredEntry> out;
    for (const auto& [id, tx] : pool)
        if (block.filter.contains(id)) out.push_back({&tx, block.filter.placement(id)});
    return out;
}

std::vector<Transaction> reconstruct_block(const EfficientBlock& block, const Mempool& pool,
                                           std::uint64_t search_cap, ReconstructStats* stats)
{
    ReconstructStats local;
    ReconstructStats& st = stats ? *stats : local;
    st = {};

    auto entries = filtered_txid_list(block, pool);
    st.candidates = entries.size();

    std::vector<Hash256> inspector_ids;
    for (const auto& tx : block.inspectors) inspector_ids.push_back(tx.txid);
    std::sort(inspector_ids.begin(), inspector_ids.end());
    std::erase_if(entries, [&](const FilteredEntry& e) {
        return std::binary_search(inspector_ids.begin(), inspector_ids.end(), e.tx->txid);
    });

    using Key = std::tuple<cuckoo::BucketPair, std::uint64_t>;
    std::map<Key, std::vector<const Transaction*>> groups;
    for (const auto& e : entries) groups[{e.placement.buckets(), e.placement.fingerprint}].push_back(e.tx);

    std::vector<const Transaction*> singles, collided;
    for (const auto& [key, txs] : groups) {
        if (txs.size() == 1)
            singles.push_back(txs.front());
        else
            collided.insert(collided.end(), txs.begin(), txs.end());
    }
    auto by_id = [](const Transaction* a, const Transaction* b) { return a->txid < b->txid; };
    std::sort(singles.begin(), singles.end(), by_id);
    std::sort(collided.begin(), collided.end(), by_id);
    st.singletons = singles.size();
    st.collided = collided.size();

    const std::size_t n = block.header.tx_count;
    if (singles.size() > n || n - singles.size() > collided.size())
        throw ReconstructError(ReconstructError::Kind::no_candidate_matches,
                               "reconstruct: " + std::to_string(n) + " transactions committed but " +
                                   std::to_string(singles.size()) + " singletons and " +
                                   std::to_string(collided.size()) + " collided candidates available");
    const std::size_t need = n - singles.size();
    const std::uint64_t combos = binomial_capped(collided.size(), need, search_cap);
    if (combos > search_cap)
        throw ReconstructError(ReconstructError::Kind::search_budget_exceeded,
                               "reconstruct: candidate subsets exceed the search cap of " + std::to_string(search_cap));

    std::vector<std::size_t> pick(need);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    std::vector<const Transaction*> chosen;
    std::vector<Hash256> leaves;
    for (;;) {
        ++st.iterations;
        chosen.assign(singles.begin(), singles.end());
        for (auto i : pick) chosen.push_back(collided[i]);
        std::sort(chosen.begin(), chosen.end(), by_id);

        leaves.clear();
        leaves.push_back(block.coinbase.txid);
        for (const auto* tx : chosen) leaves.push_back(tx->txid);
        if (merkle_root(leaves) == block.header.merkle_root) {
            std::vector<Transaction> out;
            out.reserve(chosen.size());
            for (const auto* tx : chosen) out.push_back(*tx);
            return out;
        }

        // next combination in lexicographic order
        std::size_t i = need;
        while (i > 0 && pick[i - 1] == collided.size() - need + (i - 1)) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < need; ++j) pick[j] = pick[j - 1] + 1;
    }
    throw ReconstructError(ReconstructError::Kind::no_candidate_matches,
                           "reconstruct: no candidate subset matches the Merkle root");
}

} // namespace edts::codec
