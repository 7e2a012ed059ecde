#pragma once

#include "edts/config.hpp"
#include "edts/dts.hpp"
#include "edts/metrics.hpp"
#include "edts/moo.hpp"
#include "edts/netsim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace edts::experiment {

struct KeyInfo {
    std::string name;
    std::string default_value;
    std::string help;
};

/// Every recognized config key with its default. CLI flags mirror these names.
const std::vector<KeyInfo>& key_registry();
bool is_known_key(std::string_view key);

/// Registry defaults overlaid with `overrides`; throws ConfigError on unknown keys.
Config effective_config(const Config& overrides);

/// Reads the scenario and, when tx_data is set, loads the dataset it names.
netsim::Scenario scenario_from(const Config& cfg);
DtsAttributes attributes_from(const Config& cfg);
std::uint64_t seed_from(const Config& cfg);

// Gene layout: one real gene per attribute a1..a9; a2 and a4 threshold at 0.5.
inline constexpr std::size_t kGenes = 9;
DtsAttributes decode(const moo::Vec& x);
moo::Vec encode(const DtsAttributes& a);
moo::Bounds bounds_from(const Config& cfg);

struct ExperimentSpec {
    int id = 1;
    Priority a2 = Priority::time_based;
    bool a4 = false;
};

/// 1 = (time, false), 2 = (time, true), 3 = (fee, false), 4 = (fee, true).
ExperimentSpec experiment_spec(int id);

/// Objectives (volatility, -TPS) of one simulation run; throws when volatility is undefined.
moo::Vec evaluate_point(const DtsAttributes& attrs, const netsim::Scenario& scenario, std::size_t blocks_per_period,
                        std::uint64_t seed);

struct FrontRow {
    DtsAttributes attrs;
    double volatility = 0.0;
    double tps = 0.0;
    bool feasible = false;
};

struct ExperimentSummary {
    int id = 0;
    std::size_t front_size = 0;
    double tps_min = 0.0, tps_max = 0.0;
    double volatility_min = 0.0, volatility_max = 0.0;
    std::size_t feasible = 0;
    double feasible_tps_min = 0.0, feasible_tps_max = 0.0;
};

ExperimentSummary summarize_front(int id, const std::vector<FrontRow>& front);

/// Runs the optimizer for one experiment and writes front.csv, summary.csv,
/// experiment.txt and checkpoints/ under `dir`. A FAILED marker is left on error.
ExperimentSummary run_experiment(const ExperimentSpec& spec, const Config& cfg, const std::filesystem::path& dir,
                                 std::size_t jobs);

void write_front_csv(std::ostream& out, int id, const std::vector<FrontRow>& front);
std::vector<FrontRow> read_front_csv(std::istream& in);
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const ExperimentSummary& s);

struct LoadResult {
    std::vector<TxRecord> records;
    std::size_t skipped = 0;
};

/// CSV with a header row. Rows whose amount is missing, malformed or non-positive, or whose
/// timestamp (seconds) is malformed, are skipped and counted. Arrival times are offsets from
/// the earliest timestamp. Throws std::runtime_error when unreadable or no rows are usable.
LoadResult load_transactions(const std::filesystem::path& path, const std::string& amount_column = "amount",
                             const std::string& timestamp_column = "timestamp",
                             std::uint32_t size_bytes = kDefaultTxSize);

/// scatter.csv (volatility,tps,min_hist_vol,max_hist_vol) from a front and
/// propagation.csv (block,tx_count,pt_ms) from block records.
void write_scatter_csv(std::ostream& out, const std::vector<FrontRow>& front);
void write_propagation_csv(std::ostream& out, const std::vector<netsim::BlockRecord>& blocks);

} // namespace edts::experiment
