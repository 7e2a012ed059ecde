#include "edts/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace edts::netsim {

namespace {

constexpr std::uint64_t kTopologyStream = 1;
constexpr std::uint64_t kMiningStream = 2;
constexpr std::uint64_t kTxStream = 3;
constexpr std::uint64_t kFilterStream = 4;

struct Block {
    Hash256 hash;
    int parent = -1;
    std::uint64_t height = 0;
    std::uint32_t miner = 0;
    std::int64_t mined_ms = 0;
    std::uint64_t wire_bytes = 0;
    std::uint64_t relay_bytes = 0;
    std::uint32_t tx_count = 0;
    double reward = 0.0;
    double mean_fee = 0.0;
    double leaf_budget = 0.0;
    double leaf_used = 0.0;
    bool exhausted = false;
    bool reconstructed = true;
    std::vector<Transaction> body;
    bool body_retained = true;
    std::vector<std::uint64_t> id_prefixes;
    double pt_ms = 0.0;
};

struct Event {
    std::int64_t time;
    std::uint64_t seq;
    bool mine;
    std::uint32_t node;
    std::uint32_t from;
    std::uint32_t block;
    double hop_ms;

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Node {
    std::uint32_t region = 0;
    std::vector<std::uint32_t> neighbors;
    int tip = 0;
    std::int64_t tip_time = 0;
    std::vector<char> known;
    std::vector<char> linked;
    std::vector<std::uint32_t> pending;  // known blocks whose parent is not yet linked
};

std::vector<std::uint32_t> assign_regions(const Topology& topo, std::size_t nodes, Rng& rng)
{
    const std::size_t r = topo.regions.size();
    double total = std::accumulate(topo.node_share.begin(), topo.node_share.end(), 0.0);
    std::vector<std::size_t> count(r);
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < r; ++i) {
        double exact = topo.node_share[i] / total * static_cast<double>(nodes);
        count[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += count[i];
        rema.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < nodes; ++k, ++assigned) ++count[rema[k % r].second];

    std::vector<std::uint32_t> regions;
    for (std::size_t i = 0; i < r; ++i) regions.insert(regions.end(), count[i], static_cast<std::uint32_t>(i));
    for (std::size_t i = regions.size(); i > 1; --i) std::swap(regions[i - 1], regions[rng.uniform_index(i)]);
    return regions;
}

} // namespace

std::vector<std::vector<std::uint32_t>> random_graph(std::size_t nodes, std::size_t min_degree,
                                                     std::size_t max_degree, Rng& rng)
{
    std::vector<std::vector<std::uint32_t>> adj(nodes);
    if (nodes < 2) return adj;
    const std::size_t hi = std::min(max_degree, nodes - 1);
    const std::size_t lo = std::min(min_degree, hi);

    auto linked = [&](std::size_t a, std::size_t b) {
        return std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end();
    };
    auto connect = [&](std::size_t a, std::size_t b) {
        adj[a].push_back(static_cast<std::uint32_t>(b));
        adj[b].push_back(static_cast<std::uint32_t>(a));
    };

    std::vector<std::size_t> target(nodes);
    for (auto& t : target) t = lo + rng.uniform_index(hi - lo + 1);
    std::vector<std::size_t> order(nodes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = nodes; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

    for (std::size_t a : order) {
        for (std::size_t tries = 0; adj[a].size() < target[a] && tries < 64 * nodes; ++tries) {
            std::size_t b = rng.uniform_index(nodes);
            if (b == a || adj[b].size() >= hi || linked(a, b)) continue;
            connect(a, b);
        }
    }

    // join components so every node can be reached
    std::vector<int> comp(nodes, -1);
    std::vector<std::size_t> reps;
    for (std::size_t s = 0; s < nodes; ++s) {
        if (comp[s] >= 0) continue;
        int c = static_cast<int>(reps.size());
        reps.push_back(s);
        std::vector<std::size_t> stack{s};
        comp[s] = c;
        while (!stack.empty()) {
            auto u = stack.back();
            stack.pop_back();
            for (auto v : adj[u])
                if (comp[v] < 0) {
                    comp[v] = c;
                    stack.push_back(v);
                }
        }
    }
    for (std::size_t c = 1; c < reps.size(); ++c) {
        std::size_t b = rng.uniform_index(nodes);
        while (comp[b] == static_cast<int>(c)) b = (b + 1) % nodes;
        connect(reps[c], b);
        for (std::size_t u = 0; u < nodes; ++u)
            if (comp[u] == static_cast<int>(c)) comp[u] = comp[b];
    }
    for (auto& l : adj) std::sort(l.begin(), l.end());
    return adj;
}

namespace {

class Simulator {
public:
    Simulator(const DtsAttributes& attrs, const Scenario& scenario, std::uint64_t seed)
        : attrs_(attrs), sc_(scenario), seed_(seed), pool_(attrs.a1_mempool_size), mining_rng_(derive_seed(seed, kMiningStream))
    {
        topo_ = Topology::load(sc_.regions_file.empty() ? default_regions_file() : sc_.regions_file);
        Rng topo_rng(derive_seed(seed, kTopologyStream));
        auto regions = assign_regions(topo_, sc_.nodes, topo_rng);
        auto graph = random_graph(sc_.nodes, sc_.min_degree, sc_.max_degree, topo_rng);
        nodes_.resize(sc_.nodes);
        for (std::size_t i = 0; i < sc_.nodes; ++i) {
            nodes_[i].region = regions[i];
            nodes_[i].neighbors = std::move(graph[i]);
        }
        if (sc_.dataset)
            source_ = std::make_unique<RecordSource>(sc_.dataset);
        else
            source_ = std::make_unique<SyntheticSource>(sc_, derive_seed(seed, kTxStream));

        Block genesis;
        std::vector<std::uint8_t> tag{'e', 'd', 't', 's'};
        genesis.hash = sha256d(tag);
        blocks_.push_back(std::move(genesis));
        for (auto& n : nodes_) {
            n.known.push_back(1);
            n.linked.push_back(1);
        }
    }

    SimulationOutcome run()
    {
        schedule_mine(0);
        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.time;
            if (ev.mine)
                mine();
            else
                deliver(ev);
        }
        return outcome();
    }

private:
    void schedule_mine(std::int64_t from)
    {
        auto gap = static_cast<std::int64_t>(std::llround(mining_rng_.exponential(sc_.block_interval_ms)));
        queue_.push({from + gap, seq_++, true, 0, 0, 0, 0.0});
    }

    std::uint32_t pick_miner()
    {
        if (sc_.hash_power.empty()) return static_cast<std::uint32_t>(mining_rng_.uniform_index(nodes_.size()));
        double total = std::accumulate(sc_.hash_power.begin(), sc_.hash_power.end(), 0.0);
        double u = mining_rng_.uniform01() * total;
        for (std::size_t i = 0; i < sc_.hash_power.size(); ++i) {
            u -= sc_.hash_power[i];
            if (u < 0.0 && sc_.hash_power[i] > 0.0) return static_cast<std::uint32_t>(i);
        }
        for (std::size_t i = sc_.hash_power.size(); i > 0; --i)
            if (sc_.hash_power[i - 1] > 0.0) return static_cast<std::uint32_t>(i - 1);
        return 0;
    }

    void return_tx(const Transaction& tx)
    {
        if (!pool_.add(tx) && !pool_.contains(tx.txid)) backlog_.push_front(tx);
    }

    void remove_tx(const Hash256& id)
    {
        if (pool_.erase(id)) return;
        auto it = std::find_if(backlog_.begin(), backlog_.end(), [&](const Transaction& t) { return t.txid == id; });
        if (it != backlog_.end()) backlog_.erase(it);
    }

    // Moves the shared mempool from the reference tip to `target`.
    void reorg_to(int target)
    {
        int a = reference_, b = target;
        std::vector<int> connect;
        while (a != b) {
            if (blocks_[a].height >= blocks_[b].height) {
                auto& blk = blocks_[a];
                if (!blk.body_retained)
                    throw std::runtime_error("reorganization deeper than the retained block bodies");
                for (const auto& tx : blk.body) return_tx(tx);
                a = blk.parent;
            } else {
                connect.push_back(b);
                b = blocks_[b].parent;
            }
        }
        for (auto it = connect.rbegin(); it != connect.rend(); ++it) {
            const auto& blk = blocks_[*it];
            if (!blk.body_retained) throw std::runtime_error("reorganization deeper than the retained block bodies");
            for (const auto& tx : blk.body) remove_tx(tx.txid);
        }
        reference_ = target;
    }

    void refill()
    {
        while (!pool_.full() && !backlog_.empty()) {
            pool_.add(backlog_.front());
            backlog_.pop_front();
        }
        while (!pool_.full()) {
            if (!head_) {
                if (stream_done_) break;
                head_ = source_->next();
                if (!head_) {
                    stream_done_ = true;
                    break;
                }
            }
            if (sc_.supply == Supply::arrivals && head_->arrival_ms > now_) break;
            pool_.add(head_->materialize(attrs_.a3_fee_percentage));
            head_.reset();
        }
    }

    void mine()
    {
        const std::uint32_t miner = pick_miner();
        const int base = nodes_[miner].tip;
        reorg_to(base);
        refill();

        const std::uint64_t seq = blocks_.size() - 1;
        codec::BuildParams params;
        params.filter.epsilon = sc_.epsilon;
        params.filter.alpha = sc_.alpha;
        params.filter.seed = derive_seed(seed_, kFilterStream, seq);
        params.block_size_cap = sc_.block_size;
        params.sequence = seq;
        params.timestamp_ms = static_cast<std::uint64_t>(now_);
        params.nonce = static_cast<std::uint32_t>(seq);
        auto built = codec::build_block(pool_, attrs_, blocks_[base].hash, params);
        auto& eb = built.block;

        Block blk;
        blk.hash = eb.hash();
        blk.parent = base;
        blk.height = blocks_[base].height + 1;
        blk.miner = miner;
        blk.mined_ms = now_;
        blk.wire_bytes = eb.wire_size();
        blk.relay_bytes = blk.wire_bytes;
        blk.tx_count = eb.header.tx_count;
        blk.reward = eb.coinbase.amount;
        blk.leaf_budget = built.report.leaf_budget;
        blk.leaf_used = built.report.leaf_used;
        blk.exhausted = built.report.budget_exhausted;
        if (blk.tx_count > 0) {
            double fees = 0.0;
            for (const auto& tx : eb.full_txs) fees += tx.fee;
            blk.mean_fee = fees / blk.tx_count;
        }

        // every receiver shares this mempool, so one reconstruction stands for all of them
        try {
            auto rebuilt = codec::reconstruct_block(eb, pool_, sc_.search_cap);
            blk.reconstructed = rebuilt.size() == eb.full_txs.size() &&
                                std::equal(rebuilt.begin(), rebuilt.end(), eb.full_txs.begin(),
                                           [](const auto& x, const auto& y) { return x.txid == y.txid; });
        } catch (const codec::ReconstructError&) {
            blk.reconstructed = false;
        }
        if (!blk.reconstructed) {
            ++reconstruct_failures_;
            for (const auto& tx : eb.full_txs) blk.relay_bytes += tx.size_bytes;
        }

        for (const auto& tx : eb.full_txs) {
            pool_.erase(tx.txid);
            blk.id_prefixes.push_back(tx.txid.prefix64());
        }
        blk.body = std::move(eb.full_txs);

        const auto index = static_cast<std::uint32_t>(blocks_.size());
        blocks_.push_back(std::move(blk));
        reference_ = static_cast<int>(index);
        ++mined_;
        last_mined_ms_ = now_;
        release_bodies();

        auto& node = nodes_[miner];
        mark_known(node, index);
        link(node, index);
        relay(miner, index, UINT32_MAX);

        if (mined_ < sc_.blocks) schedule_mine(now_);
    }

    void release_bodies()
    {
        const auto top = blocks_[reference_].height;
        for (auto& b : blocks_) {
            if (b.body_retained && b.height + sc_.retain_depth < top && b.parent >= 0) {
                b.body_retained = false;
                b.body.clear();
                b.body.shrink_to_fit();
            }
        }
    }

    void mark_known(Node& n, std::uint32_t index)
    {
        if (n.known.size() < blocks_.size()) {
            n.known.resize(blocks_.size(), 0);
            n.linked.resize(blocks_.size(), 0);
        }
        n.known[index] = 1;
    }

    void relay(std::uint32_t from_node, std::uint32_t index, std::uint32_t skip)
    {
        const auto& n = nodes_[from_node];
        for (auto nb : n.neighbors) {
            if (nb == skip) continue;
            double hop = hop_time_ms(blocks_[index].relay_bytes, n.region, nodes_[nb].region, topo_);
            auto at = now_ + static_cast<std::int64_t>(std::ceil(hop));
            queue_.push({at, seq_++, false, nb, from_node, index, hop});
        }
    }

    void deliver(const Event& ev)
    {
        auto& n = nodes_[ev.node];
        if (n.known.size() > ev.block && n.known[ev.block]) return;
        mark_known(n, ev.block);
        blocks_[ev.block].pt_ms += ev.hop_ms;  // first-delivery tree edge
        relay(ev.node, ev.block, ev.from);

        const int parent = blocks_[ev.block].parent;
        if (n.linked[static_cast<std::size_t>(parent)])
            link(n, ev.block);
        else
            n.pending.push_back(ev.block);
    }

    void link(Node& n, std::uint32_t index)
    {
        std::vector<std::uint32_t> work{index};
        while (!work.empty()) {
            auto b = work.back();
            work.pop_back();
            n.linked[b] = 1;
            consider(n, b);
            for (auto it = n.pending.begin(); it != n.pending.end();) {
                if (blocks_[*it].parent == static_cast<int>(b)) {
                    work.push_back(*it);
                    it = n.pending.erase(it);
                } else {
                    ++it;
                }
            }
        }
    }

    void consider(Node& n, std::uint32_t b)
    {
        const auto& cand = blocks_[b];
        const auto& tip = blocks_[static_cast<std::size_t>(n.tip)];
        bool adopt = cand.height > tip.height ||
                     (cand.height == tip.height && n.tip_time == now_ && cand.hash < tip.hash);
        if (adopt) {
            n.tip = static_cast<int>(b);
            n.tip_time = now_;
        }
    }

    SimulationOutcome outcome()
    {
        SimulationOutcome out;
        out.mined_blocks = mined_;
        out.reconstruct_failures = reconstruct_failures_;
        out.elapsed_ms = last_mined_ms_;

        std::size_t best = 0;
        for (std::size_t i = 1; i < blocks_.size(); ++i) {
            const auto& c = blocks_[i];
            const auto& b = blocks_[best];
            if (c.height > b.height || (c.height == b.height && c.hash < b.hash)) best = i;
        }
        std::vector<std::size_t> chain;
        for (int i = static_cast<int>(best); i > 0; i = blocks_[i].parent) chain.push_back(static_cast<std::size_t>(i));
        std::reverse(chain.begin(), chain.end());
        out.stale_blocks = mined_ - chain.size();

        std::unordered_set<std::uint64_t> seen;
        for (auto i : chain) {
            const auto& b = blocks_[i];
            for (auto p : b.id_prefixes)
                if (!seen.insert(p).second) throw std::logic_error("transaction included twice on the main chain");
            out.main_chain_txs += b.tx_count;
            BlockRecord r;
            r.height = b.height;
            r.reward = b.reward;
            r.tx_count = b.tx_count;
            r.wire_bytes = b.wire_bytes;
            r.pt_ms = b.pt_ms;
            r.mined_ms = b.mined_ms;
            r.miner = b.miner;
            r.mean_fee = b.mean_fee;
            r.leaf_budget = b.leaf_budget;
            r.leaf_used = b.leaf_used;
            r.budget_exhausted = b.exhausted;
            r.reconstructed = b.reconstructed;
            r.hash = b.hash.hex();
            out.blocks.push_back(std::move(r));
        }
        if (out.elapsed_ms > 0)
            out.tps = static_cast<double>(out.main_chain_txs) / (static_cast<double>(out.elapsed_ms) / 1000.0);
        else if (out.main_chain_txs > 0)
            throw std::runtime_error("transactions confirmed in zero elapsed time");
        return out;
    }

    DtsAttributes attrs_;
    Scenario sc_;
    std::uint64_t seed_;
    Topology topo_;
    std::vector<Node> nodes_;
    std::vector<Block> blocks_;
    Mempool pool_;
    std::deque<Transaction> backlog_;
    std::unique_ptr<TxSource> source_;
    std::optional<TxRecord> head_;
    bool stream_done_ = false;
    Rng mining_rng_;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::uint64_t seq_ = 0;
    std::int64_t now_ = 0;
    int reference_ = 0;
    std::size_t mined_ = 0;
    std::size_t reconstruct_failures_ = 0;
    std::int64_t last_mined_ms_ = 0;
};

} // namespace

SimulationOutcome run_simulation(const DtsAttributes& attrs, const Scenario& scenario, std::uint64_t seed)
{
    scenario.validate();
    try {
        attrs.validate();
    } catch (const std::domain_error& e) {
        throw ScenarioError(e.what());
    }
    Simulator sim(attrs, scenario, seed);
    return sim.run();
}

void write_block_csv(std::ostream& out, const std::vector<BlockRecord>& blocks)
{
    out << "height,reward,tx_count,wire_bytes,pt_ms\n";
    for (const auto& b : blocks)
        out << b.height << ',' << format_double(b.reward) << ',' << b.tx_count << ',' << b.wire_bytes << ','
            << format_double(b.pt_ms) << '\n';
}

std::vector<BlockRecord> read_block_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("block CSV: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "height,reward,tx_count,wire_bytes,pt_ms")
        throw std::runtime_error("block CSV: unexpected header '" + line + "'");
    std::vector<BlockRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = parse_number_list("block CSV row " + std::to_string(row), line);
        if (cells.size() != 5) throw std::runtime_error("block CSV row " + std::to_string(row) + ": expected 5 columns");
        BlockRecord r;
        r.height = static_cast<std::uint64_t>(cells[0]);
        r.reward = cells[1];
        r.tx_count = static_cast<std::uint32_t>(cells[2]);
        r.wire_bytes = static_cast<std::uint64_t>(cells[3]);
        r.pt_ms = cells[4];
        out.push_back(r);
    }
    return out;
}

} // namespace edts::netsim
