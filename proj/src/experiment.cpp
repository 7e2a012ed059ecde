#include "edts/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace edts::experiment {

const std::vector<KeyInfo>& key_registry()
{
    static const std::vector<KeyInfo> keys = {
        {"a1", "75032", "mempool size"},
        {"a2", "fee", "incorporation priority: time or fee"},
        {"a3", "0.1031", "fee as a fraction of the amount"},
        {"a4", "false", "reserve space for small-fee transactions"},
        {"a5", "1000", "small-fee threshold"},
        {"a6", "100", "small-fee transaction count limit"},
        {"a7", "36", "maximum leaf space per transaction"},
        {"a8", "9.5", "lognormal scale mu"},
        {"a9", "0.99", "lognormal shape sigma"},
        {"alpha", "0.955", "filter load factor"},
        {"amount_column", "amount", "amount column of the transaction CSV"},
        {"amount_log_mu", "11", "log-mean of synthetic amounts"},
        {"amount_log_sigma", "1", "log-sd of synthetic amounts"},
        {"block_interval_ms", "600000", "mean block interval"},
        {"block_size", "1050000", "block size cap in bytes"},
        {"blocks", "144", "blocks mined per run"},
        {"blocks_per_period", "144", "blocks per volatility period"},
        {"bounds.a1", "1000,1000000", "optimizer bounds"},
        {"bounds.a2", "0,1", "optimizer bounds"},
        {"bounds.a3", "0.001,0.25", "optimizer bounds"},
        {"bounds.a4", "0,1", "optimizer bounds"},
        {"bounds.a5", "1,20000", "optimizer bounds"},
        {"bounds.a6", "0,10000", "optimizer bounds"},
        {"bounds.a7", "1,128", "optimizer bounds"},
        {"bounds.a8", "0,15", "optimizer bounds"},
        {"bounds.a9", "0.01,3", "optimizer bounds"},
        {"epsilon", "1e-06", "filter false-positive rate"},
        {"experiment", "1", "experiment id for optimize"},
        {"failure_volatility", "1000", "volatility assigned to failed evaluations"},
        {"fee_regime_sigma", "0", "sd of per-regime log-amount offsets"},
        {"fee_regime_txs", "0", "transactions per fee regime, 0 disables"},
        {"generations", "100", "optimizer generations"},
        {"hash_power", "", "comma-separated miner weights, empty for uniform"},
        {"max_degree", "10", "maximum neighbors per node"},
        {"min_degree", "8", "minimum neighbors per node"},
        {"mutation_eta", "20", "polynomial mutation index"},
        {"mutation_prob", "-1", "per-gene mutation probability, negative for 1/9"},
        {"nodes", "100", "network nodes"},
        {"population", "100", "optimizer population"},
        {"regions_file", "", "topology file, empty for the bundled one"},
        {"resume", "false", "continue from the latest checkpoint"},
        {"retain_depth", "16", "block bodies kept below the tip for reorganizations"},
        {"sbx_eta", "30", "crossover distribution index"},
        {"sbx_prob", "0.9", "crossover probability"},
        {"search_cap", "1000000", "reconstruction subset limit"},
        {"seed", "42", "root seed"},
        {"supply", "arrivals", "arrivals or preload"},
        {"timestamp_column", "timestamp", "timestamp column of the transaction CSV"},
        {"tx_data", "", "transaction CSV replacing the synthetic stream"},
        {"tx_rate", "3.5", "synthetic transactions per second"},
        {"tx_size", "500", "transaction size in bytes"},
    };
    return keys;
}

bool is_known_key(std::string_view key)
{
    const auto& keys = key_registry();
    return std::any_of(keys.begin(), keys.end(), [&](const KeyInfo& k) { return k.name == key; });
}

Config effective_config(const Config& overrides)
{
    Config cfg;
    for (const auto& k : key_registry()) cfg.set(k.name, k.default_value);
    for (const auto& [k, v] : overrides.entries()) {
        if (!is_known_key(k)) throw ConfigError("unknown config key '" + k + "'");
        cfg.set(k, v);
    }
    return cfg;
}

netsim::Scenario scenario_from(const Config& cfg)
{
    auto s = netsim::Scenario::from_config(cfg);
    if (auto path = cfg.get_string("tx_data", ""); !path.empty()) {
        auto loaded = load_transactions(path, cfg.get_string("amount_column", "amount"),
                                        cfg.get_string("timestamp_column", "timestamp"), s.tx_size);
        s.dataset = std::make_shared<const std::vector<TxRecord>>(std::move(loaded.records));
    }
    return s;
}

DtsAttributes attributes_from(const Config& cfg)
{
    DtsAttributes a;
    a.load(cfg);
    return a;
}

std::uint64_t seed_from(const Config& cfg)
{
    return static_cast<std::uint64_t>(cfg.get_int("seed", 42));
}

DtsAttributes decode(const moo::Vec& x)
{
    DtsAttributes a;
    a.a1_mempool_size = static_cast<std::uint64_t>(std::max(1.0, std::round(x[0])));
    a.a2_priority = x[1] >= 0.5 ? Priority::fee_based : Priority::time_based;
    a.a3_fee_percentage = x[2];
    a.a4_designated_small_space = x[3] >= 0.5;
    a.a5_small_fee_threshold = x[4];
    a.a6_small_fee_count_threshold = static_cast<std::uint64_t>(std::max(0.0, std::round(x[5])));
    a.a7_max_leaf_space = x[6];
    a.a8_scale_mu = x[7];
    a.a9_shape_sigma = x[8];
    return a;
}

moo::Vec encode(const DtsAttributes& a)
{
    return {static_cast<double>(a.a1_mempool_size),
            a.a2_priority == Priority::fee_based ? 1.0 : 0.0,
            a.a3_fee_percentage,
            a.a4_designated_small_space ? 1.0 : 0.0,
            a.a5_small_fee_threshold,
            static_cast<double>(a.a6_small_fee_count_threshold),
            a.a7_max_leaf_space,
            a.a8_scale_mu,
            a.a9_shape_sigma};
}

moo::Bounds bounds_from(const Config& cfg)
{
    moo::Bounds b;
    for (int i = 1; i <= 9; ++i) {
        std::string key = "bounds.a" + std::to_string(i);
        auto v = parse_number_list(key, cfg.get_string(key));
        if (v.size() != 2 || !(v[0] <= v[1])) throw ConfigError("config key '" + key + "' must be 'low, high'");
        b.lower.push_back(v[0]);
        b.upper.push_back(v[1]);
    }
    return b;
}

ExperimentSpec experiment_spec(int id)
{
    switch (id) {
    case 1: return {1, Priority::time_based, false};
    case 2: return {2, Priority::time_based, true};
    case 3: return {3, Priority::fee_based, false};
    case 4: return {4, Priority::fee_based, true};
    }
    throw ConfigError("experiment must be 1, 2, 3 or 4, got " + std::to_string(id));
}

moo::Vec evaluate_point(const DtsAttributes& attrs, const netsim::Scenario& scenario, std::size_t blocks_per_period,
                        std::uint64_t seed)
{
    auto outcome = netsim::run_simulation(attrs, scenario, seed);
    auto s = metrics::summarize(outcome, blocks_per_period);
    if (!std::isfinite(s.volatility)) throw metrics::MetricsError("volatility undefined for this run");
    return {s.volatility, -s.tps};
}

ExperimentSummary summarize_front(int id, const std::vector<FrontRow>& front)
{
    ExperimentSummary s;
    s.id = id;
    s.front_size = front.size();
    const double inf = std::numeric_limits<double>::infinity();
    double tmin = inf, tmax = -inf, vmin = inf, vmax = -inf, ftmin = inf, ftmax = -inf;
    for (const auto& r : front) {
        tmin = std::min(tmin, r.tps);
        tmax = std::max(tmax, r.tps);
        vmin = std::min(vmin, r.volatility);
        vmax = std::max(vmax, r.volatility);
        if (r.feasible) {
            ++s.feasible;
            ftmin = std::min(ftmin, r.tps);
            ftmax = std::max(ftmax, r.tps);
        }
    }
    if (!front.empty()) {
        s.tps_min = tmin;
        s.tps_max = tmax;
        s.volatility_min = vmin;
        s.volatility_max = vmax;
    }
    if (s.feasible) {
        s.feasible_tps_min = ftmin;
        s.feasible_tps_max = ftmax;
    }
    return s;
}

void write_summary_header(std::ostream& out)
{
    out << "experiment,front_size,tps_min,tps_max,volatility_min,volatility_max,feasible_points,feasible_tps_min,"
           "feasible_tps_max\n";
}

void write_summary_row(std::ostream& out, const ExperimentSummary& s)
{
    out << s.id << ',' << s.front_size << ',' << format_double(s.tps_min) << ',' << format_double(s.tps_max) << ','
        << format_double(s.volatility_min) << ',' << format_double(s.volatility_max) << ',' << s.feasible << ','
        << format_double(s.feasible_tps_min) << ',' << format_double(s.feasible_tps_max) << '\n';
}

namespace {

const char* front_header = "experiment,a1,a2,a3,a4,a5,a6,a7,a8,a9,volatility,tps,feasible";

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

} // namespace

void write_front_csv(std::ostream& out, int id, const std::vector<FrontRow>& front)
{
    out << front_header << '\n';
    for (const auto& r : front) {
        const auto& a = r.attrs;
        out << id << ',' << a.a1_mempool_size << ',' << to_string(a.a2_priority) << ','
            << format_double(a.a3_fee_percentage) << ',' << (a.a4_designated_small_space ? "true" : "false") << ','
            << format_double(a.a5_small_fee_threshold) << ',' << a.a6_small_fee_count_threshold << ','
            << format_double(a.a7_max_leaf_space) << ',' << format_double(a.a8_scale_mu) << ','
            << format_double(a.a9_shape_sigma) << ',' << format_double(r.volatility) << ',' << format_double(r.tps)
            << ',' << (r.feasible ? 1 : 0) << '\n';
    }
}

std::vector<FrontRow> read_front_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("front CSV: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != front_header) throw std::runtime_error("front CSV: unexpected header");
    std::vector<FrontRow> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto c = split_csv(line);
        if (c.size() != 13) throw std::runtime_error("front CSV: expected 13 columns");
        Config row;
        const char* names[] = {"a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"};
        for (int i = 0; i < 9; ++i) row.set(names[i], c[static_cast<std::size_t>(i) + 1]);
        row.set("volatility", c[10]);
        row.set("tps", c[11]);
        row.set("feasible", c[12]);
        FrontRow r;
        r.attrs.load(row);
        r.volatility = row.get_double("volatility");
        r.tps = row.get_double("tps");
        r.feasible = row.get_bool("feasible");
        out.push_back(r);
    }
    return out;
}

ExperimentSummary run_experiment(const ExperimentSpec& spec, const Config& cfg, const std::filesystem::path& dir,
                                 std::size_t jobs)
{
    std::filesystem::create_directories(dir);
    std::filesystem::remove(dir / "FAILED");
    try {
        const auto scenario = scenario_from(cfg);
        scenario.validate();
        const std::size_t bpp = scenario.blocks_per_period;

        moo::OptimizerConfig oc;
        oc.population = static_cast<std::size_t>(cfg.get_int("population"));
        oc.generations = static_cast<std::size_t>(cfg.get_int("generations"));
        oc.bounds = bounds_from(cfg);
        const double a2 = spec.a2 == Priority::fee_based ? 1.0 : 0.0;
        const double a4 = spec.a4 ? 1.0 : 0.0;
        oc.bounds.lower[1] = oc.bounds.upper[1] = a2;
        oc.bounds.lower[3] = oc.bounds.upper[3] = a4;
        oc.variation.crossover_eta = cfg.get_double("sbx_eta");
        oc.variation.crossover_prob = cfg.get_double("sbx_prob");
        oc.variation.mutation_eta = cfg.get_double("mutation_eta");
        oc.variation.mutation_prob = cfg.get_double("mutation_prob");
        oc.seed = derive_seed(seed_from(cfg), static_cast<std::uint64_t>(spec.id));
        oc.jobs = jobs;
        oc.failure_objectives = {cfg.get_double("failure_volatility"), 0.0};
        oc.variable_names = {"a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"};
        oc.objective_names = {"volatility", "neg_tps"};
        oc.checkpoint_dir = dir / "checkpoints";
        oc.resume = cfg.get_bool("resume");

        auto eval = [&](const moo::Vec& x, std::uint64_t seed) { return evaluate_point(decode(x), scenario, bpp, seed); };
        auto result = moo::optimize(oc, eval);

        std::vector<FrontRow> front;
        for (const auto& p : result.front) {
            if (p.failed) continue;
            FrontRow r;
            r.attrs = decode(p.position);
            r.volatility = p.objectives[0];
            r.tps = -p.objectives[1];
            r.feasible = metrics::within_historical_band(r.volatility);
            front.push_back(r);
        }
        std::sort(front.begin(), front.end(), [](const FrontRow& a, const FrontRow& b) {
            return a.volatility != b.volatility ? a.volatility < b.volatility : a.tps > b.tps;
        });

        std::ostringstream fcsv;
        write_front_csv(fcsv, spec.id, front);
        write_text(dir / "front.csv", fcsv.str());

        auto summary = summarize_front(spec.id, front);
        std::ostringstream scsv;
        write_summary_header(scsv);
        write_summary_row(scsv, summary);
        write_text(dir / "summary.csv", scsv.str());

        std::ostringstream meta;
        meta << "experiment = " << spec.id << "\na2 = " << to_string(spec.a2) << "\na4 = " << (spec.a4 ? "true" : "false")
             << "\npopulation = " << oc.population << "\ngenerations = " << oc.generations
             << "\nevaluations = " << result.evaluations << "\nfailed_evaluations = " << result.failures
             << "\ndirections_converged = " << (result.directions_converged ? "true" : "false")
             << "\nfront_size = " << front.size() << "\n";
        write_text(dir / "experiment.txt", meta.str());
        return summary;
    } catch (const std::exception& e) {
        write_text(dir / "FAILED", std::string(e.what()) + "\n");
        throw;
    }
}

LoadResult load_transactions(const std::filesystem::path& path, const std::string& amount_column,
                             const std::string& timestamp_column, std::uint32_t size_bytes)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read transaction file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("transaction file " + path.string() + " has no header row");
    auto header = split_csv(line);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("transaction file " + path.string() + " has no '" + name + "' column");
    };
    const std::size_t ac = column(amount_column), tc = column(timestamp_column);

    struct Row {
        double ts;
        double amount;
    };
    std::vector<Row> rows;
    LoadResult result;
    auto number = [](const std::string& s, double& v) {
        if (s.empty()) return false;
        try {
            std::size_t used = 0;
            v = std::stod(s, &used);
            return used == s.size() && std::isfinite(v);
        } catch (const std::logic_error&) {
            return false;
        }
    };
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv(line);
        double ts = 0, amount = 0;
        if (cells.size() <= std::max(ac, tc) || !number(cells[tc], ts) || !number(cells[ac], amount) || !(amount > 0.0)) {
            ++result.skipped;
            continue;
        }
        rows.push_back({ts, amount});
    }
    if (rows.empty()) throw std::runtime_error("transaction file " + path.string() + " has no usable rows");

    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a].ts < rows[b].ts; });
    const double t0 = rows[order.front()].ts;
    result.records.reserve(rows.size());
    for (auto i : order) {
        TxRecord r;
        r.serial = i;
        r.amount = rows[i].amount;
        r.arrival_ms = static_cast<std::int64_t>(std::llround((rows[i].ts - t0) * 1000.0));
        r.size_bytes = size_bytes;
        result.records.push_back(r);
    }
    return result;
}

void write_scatter_csv(std::ostream& out, const std::vector<FrontRow>& front)
{
    out << "volatility,tps,min_hist_vol,max_hist_vol\n";
    for (const auto& r : front)
        out << format_double(r.volatility) << ',' << format_double(r.tps) << ',' << format_double(metrics::MIN_HIST_VOL)
            << ',' << format_double(metrics::MAX_HIST_VOL) << '\n';
}

void write_propagation_csv(std::ostream& out, const std::vector<netsim::BlockRecord>& blocks)
{
    out << "block,tx_count,pt_ms\n";
    for (const auto& b : blocks) out << b.height << ',' << b.tx_count << ',' << format_double(b.pt_ms) << '\n';
}

} // namespace edts::experiment
