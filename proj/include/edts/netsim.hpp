#pragma once

#include "edts/codec.hpp"
#include "edts/config.hpp"
#include "edts/dts.hpp"
#include "edts/rng.hpp"
#include "edts/transaction.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace edts::netsim {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Topology {
    std::vector<std::string> regions;
    std::vector<double> node_share;               // fraction of nodes per region
    std::vector<std::vector<double>> bandwidth;   // bits per second
    std::vector<std::vector<double>> delay;       // milliseconds

    /// Throws ScenarioError on shape, sign or symmetry violations.
    void validate() const;
    std::size_t region_index(const std::string& name) const;

    /// regions / share / bandwidth.<region> / delay.<region> keys; see docs/formats.md.
    static Topology from_config(const Config& cfg);
    static Topology load(const std::filesystem::path& path);
};

std::filesystem::path default_regions_file();

/// bytes * 8 / bandwidth seconds plus delay, in milliseconds.
double hop_time_ms(std::uint64_t bytes, double bandwidth_bps, double delay_ms);
/// Throws std::out_of_range for an unknown region index or name.
double hop_time_ms(std::uint64_t bytes, std::size_t from, std::size_t to, const Topology& topo);
double hop_time_ms(std::uint64_t bytes, const std::string& from, const std::string& to, const Topology& topo);

enum class Supply {
    arrivals,  // transactions enter the mempool when their arrival time passes
    preload,   // the mempool is refilled to A1 before every block
};

struct Scenario {
    std::size_t nodes = 100;
    std::filesystem::path regions_file;  // empty: bundled default
    std::vector<double> hash_power;      // empty: uniform
    std::size_t min_degree = 8;
    std::size_t max_degree = 10;
    double block_interval_ms = 600000.0;
    std::uint64_t block_size = codec::kDefaultBlockSize;
    std::size_t blocks = 144;
    std::size_t blocks_per_period = 144;
    double epsilon = 1e-6;
    double alpha = 0.955;
    std::uint64_t search_cap = codec::kDefaultSearchCap;
    std::size_t retain_depth = 16;

    Supply supply = Supply::arrivals;
    double tx_rate = 3.5;  // per second
    std::uint32_t tx_size = kDefaultTxSize;
    double amount_log_mu = 11.0;
    double amount_log_sigma = 1.0;
    double fee_regime_sigma = 0.0;
    std::uint64_t fee_regime_txs = 0;  // transactions per fee regime; 0 disables regimes

    /// Replaces the synthetic stream when set.
    std::shared_ptr<const std::vector<TxRecord>> dataset;

    void validate() const;
    static Scenario from_config(const Config& cfg);
    void store(Config& cfg) const;
};

const char* to_string(Supply s);

// Ordered source of transaction records.
class TxSource {
public:
    virtual ~TxSource() = default;
    virtual std::optional<TxRecord> next() = 0;
};

/// Poisson arrivals with lognormal amounts; regime offsets shift the log-mean per block of
/// `fee_regime_txs` transactions.
class SyntheticSource : public TxSource {
public:
    SyntheticSource(const Scenario& s, std::uint64_t seed);
    std::optional<TxRecord> next() override;

private:
    double regime_offset(std::uint64_t regime);

    Scenario scenario_;
    std::uint64_t seed_;
    Rng rng_;
    double clock_ms_ = 0.0;
    std::uint64_t serial_ = 0;
    std::uint64_t regime_ = UINT64_MAX;
    double offset_ = 0.0;
};

class RecordSource : public TxSource {
public:
    explicit RecordSource(std::shared_ptr<const std::vector<TxRecord>> records) : records_(std::move(records)) {}
    std::optional<TxRecord> next() override;

private:
    std::shared_ptr<const std::vector<TxRecord>> records_;
    std::size_t pos_ = 0;
};

struct BlockRecord {
    std::uint64_t height = 0;
    double reward = 0.0;
    std::uint32_t tx_count = 0;
    std::uint64_t wire_bytes = 0;
    double pt_ms = 0.0;
    std::int64_t mined_ms = 0;
    std::uint32_t miner = 0;
    double mean_fee = 0.0;
    double leaf_budget = 0.0;
    double leaf_used = 0.0;
    bool budget_exhausted = false;
    bool reconstructed = true;
    std::string hash;
};

struct SimulationOutcome {
    std::vector<BlockRecord> blocks;  // main chain, ascending height
    std::size_t mined_blocks = 0;
    std::size_t stale_blocks = 0;
    std::size_t reconstruct_failures = 0;
    std::int64_t elapsed_ms = 0;
    std::uint64_t main_chain_txs = 0;
    double tps = 0.0;
};

/// Single-threaded, deterministic in (attrs, scenario, seed). Throws ScenarioError on invalid input.
SimulationOutcome run_simulation(const DtsAttributes& attrs, const Scenario& scenario, std::uint64_t seed);

/// Undirected neighbor lists with degree in [min_degree, max_degree] where the node count allows.
std::vector<std::vector<std::uint32_t>> random_graph(std::size_t nodes, std::size_t min_degree,
                                                     std::size_t max_degree, Rng& rng);

/// height,reward,tx_count,wire_bytes,pt_ms
void write_block_csv(std::ostream& out, const std::vector<BlockRecord>& blocks);
std::vector<BlockRecord> read_block_csv(std::istream& in);

} // namespace edts::netsim
