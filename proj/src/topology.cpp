#include "edts/netsim.hpp"

#include <cmath>
#include <sstream>

namespace edts::netsim {

namespace {

std::vector<std::string> split_names(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto b = item.find_first_not_of(" \t");
        auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ScenarioError("empty region name");
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

} // namespace

void Topology::validate() const
{
    const std::size_t n = regions.size();
    if (n == 0) throw ScenarioError("topology has no regions");
    if (node_share.size() != n) throw ScenarioError("topology: share list does not match the region count");
    if (bandwidth.size() != n || delay.size() != n) throw ScenarioError("topology: matrices must be square over regions");
    double total = 0.0;
    for (double s : node_share) {
        if (!(s >= 0.0)) throw ScenarioError("topology: negative node share");
        total += s;
    }
    if (!(total > 0.0)) throw ScenarioError("topology: node shares sum to zero");
    for (std::size_t i = 0; i < n; ++i) {
        if (bandwidth[i].size() != n || delay[i].size() != n)
            throw ScenarioError("topology: matrices must be square over regions");
        for (std::size_t j = 0; j < n; ++j) {
            if (!(bandwidth[i][j] > 0.0) || !std::isfinite(bandwidth[i][j]))
                throw ScenarioError("topology: bandwidth entries must be positive");
            if (!(delay[i][j] > 0.0) || !std::isfinite(delay[i][j]))
                throw ScenarioError("topology: delay entries must be positive");
            if (bandwidth[i][j] != bandwidth[j][i]) throw ScenarioError("topology: bandwidth matrix is not symmetric");
        }
    }
}

std::size_t Topology::region_index(const std::string& name) const
{
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (regions[i] == name) return i;
    throw std::out_of_range("unknown region '" + name + "'");
}

Topology Topology::from_config(const Config& cfg)
{
    Topology t;
    t.regions = split_names(cfg.get_string("regions"));
    t.node_share = parse_number_list("share", cfg.get_string("share"));
    for (const auto& r : t.regions) {
        t.bandwidth.push_back(parse_number_list("bandwidth." + r, cfg.get_string("bandwidth." + r)));
        t.delay.push_back(parse_number_list("delay." + r, cfg.get_string("delay." + r)));
    }
    t.validate();
    return t;
}

Topology Topology::load(const std::filesystem::path& path)
{
    try {
        return from_config(Config::load(path));
    } catch (const ConfigError& e) {
        throw ScenarioError(e.what());
    }
}

std::filesystem::path default_regions_file()
{
    return std::filesystem::path(EDTS_DATA_DIR) / "regions.cfg";
}

double hop_time_ms(std::uint64_t bytes, double bandwidth_bps, double delay_ms)
{
    return static_cast<double>(bytes) * 8.0 / bandwidth_bps * 1000.0 + delay_ms;
}

double hop_time_ms(std::uint64_t bytes, std::size_t from, std::size_t to, const Topology& topo)
{
    if (from >= topo.regions.size() || to >= topo.regions.size()) throw std::out_of_range("unknown region index");
    return hop_time_ms(bytes, topo.bandwidth[from][to], topo.delay[from][to]);
}

double hop_time_ms(std::uint64_t bytes, const std::string& from, const std::string& to, const Topology& topo)
{
    return hop_time_ms(bytes, topo.region_index(from), topo.region_index(to), topo);
}

const char* to_string(Supply s)
{
    return s == Supply::arrivals ? "arrivals" : "preload";
}

void Scenario::validate() const
{
    auto fail = [](const std::string& m) { throw ScenarioError("scenario: " + m); };
    if (nodes < 1) fail("nodes must be at least 1");
    if (!hash_power.empty()) {
        if (hash_power.size() != nodes) fail("hash_power needs one weight per node");
        double total = 0.0;
        for (double w : hash_power) {
            if (!(w >= 0.0) || !std::isfinite(w)) fail("hash_power weights must be nonnegative");
            total += w;
        }
        if (!(total > 0.0)) fail("hash_power weights sum to zero");
    }
    if (min_degree > max_degree) fail("min_degree exceeds max_degree");
    if (!(block_interval_ms > 0.0) || !std::isfinite(block_interval_ms)) fail("block_interval_ms must be positive");
    if (block_size <= codec::kHeaderBytes) fail("block_size must exceed 80 bytes");
    if (blocks < 1) fail("blocks must be at least 1");
    if (blocks_per_period < 1) fail("blocks_per_period must be at least 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) fail("epsilon must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must lie in (0, 1]");
    if (retain_depth < 1) fail("retain_depth must be at least 1");
    if (!(tx_rate >= 0.0) || !std::isfinite(tx_rate)) fail("tx_rate must be nonnegative");
    if (tx_size < kTxFieldBytes) fail("tx_size must be at least 40 bytes");
    if (!std::isfinite(amount_log_mu)) fail("amount_log_mu must be finite");
    if (!(amount_log_sigma >= 0.0)) fail("amount_log_sigma must be nonnegative");
    if (!(fee_regime_sigma >= 0.0)) fail("fee_regime_sigma must be nonnegative");
}

Scenario Scenario::from_config(const Config& cfg)
{
    Scenario s;
    auto count = [&](const char* key, std::size_t fallback) {
        auto v = cfg.get_int(key, static_cast<std::int64_t>(fallback));
        if (v < 0) throw ConfigError(std::string("config key '") + key + "' must be nonnegative");
        return static_cast<std::size_t>(v);
    };
    s.nodes = count("nodes", s.nodes);
    if (auto v = cfg.find("regions_file"); v && !v->empty()) s.regions_file = *v;
    if (auto v = cfg.find("hash_power")) s.hash_power = parse_number_list("hash_power", *v);
    s.min_degree = count("min_degree", s.min_degree);
    s.max_degree = count("max_degree", s.max_degree);
    s.block_interval_ms = cfg.get_double("block_interval_ms", s.block_interval_ms);
    s.block_size = count("block_size", s.block_size);
    s.blocks = count("blocks", s.blocks);
    s.blocks_per_period = count("blocks_per_period", s.blocks_per_period);
    s.epsilon = cfg.get_double("epsilon", s.epsilon);
    s.alpha = cfg.get_double("alpha", s.alpha);
    s.search_cap = count("search_cap", s.search_cap);
    s.retain_depth = count("retain_depth", s.retain_depth);
    if (auto v = cfg.find("supply")) {
        if (*v == "arrivals")
            s.supply = Supply::arrivals;
        else if (*v == "preload")
            s.supply = Supply::preload;
        else
            throw ConfigError("supply must be 'arrivals' or 'preload', got '" + *v + "'");
    }
    s.tx_rate = cfg.get_double("tx_rate", s.tx_rate);
    s.tx_size = static_cast<std::uint32_t>(count("tx_size", s.tx_size));
    s.amount_log_mu = cfg.get_double("amount_log_mu", s.amount_log_mu);
    s.amount_log_sigma = cfg.get_double("amount_log_sigma", s.amount_log_sigma);
    s.fee_regime_sigma = cfg.get_double("fee_regime_sigma", s.fee_regime_sigma);
    s.fee_regime_txs = count("fee_regime_txs", s.fee_regime_txs);
    return s;
}

void Scenario::store(Config& cfg) const
{
    cfg.set("nodes", std::to_string(nodes));
    cfg.set("regions_file", regions_file.string());
    std::string hp;
    for (std::size_t i = 0; i < hash_power.size(); ++i) hp += (i ? "," : "") + format_double(hash_power[i]);
    cfg.set("hash_power", hp);
    cfg.set("min_degree", std::to_string(min_degree));
    cfg.set("max_degree", std::to_string(max_degree));
    cfg.set("block_interval_ms", format_double(block_interval_ms));
    cfg.set("block_size", std::to_string(block_size));
    cfg.set("blocks", std::to_string(blocks));
    cfg.set("blocks_per_period", std::to_string(blocks_per_period));
    cfg.set("epsilon", format_double(epsilon));
    cfg.set("alpha", format_double(alpha));
    cfg.set("search_cap", std::to_string(search_cap));
    cfg.set("retain_depth", std::to_string(retain_depth));
    cfg.set("supply", to_string(supply));
    cfg.set("tx_rate", format_double(tx_rate));
    cfg.set("tx_size", std::to_string(tx_size));
    cfg.set("amount_log_mu", format_double(amount_log_mu));
    cfg.set("amount_log_sigma", format_double(amount_log_sigma));
    cfg.set("fee_regime_sigma", format_double(fee_regime_sigma));
    cfg.set("fee_regime_txs", std::to_string(fee_regime_txs));
}

SyntheticSource::SyntheticSource(const Scenario& s, std::uint64_t seed)
    : scenario_(s), seed_(seed), rng_(derive_seed(seed, 0x73747265616dULL))
{
}

double SyntheticSource::regime_offset(std::uint64_t regime)
{
    if (regime != regime_) {
        Rng r(derive_seed(seed_, 0x7265676dULL, regime));
        offset_ = scenario_.fee_regime_sigma * r.normal();
        regime_ = regime;
    }
    return offset_;
}

std::optional<TxRecord> SyntheticSource::next()
{
    if (scenario_.tx_rate <= 0.0) return std::nullopt;
    TxRecord rec;
    rec.serial = serial_++;
    clock_ms_ += rng_.exponential(1000.0 / scenario_.tx_rate);
    rec.arrival_ms = static_cast<std::int64_t>(std::floor(clock_ms_));
    double mu = scenario_.amount_log_mu;
    if (scenario_.fee_regime_txs > 0 && scenario_.fee_regime_sigma > 0.0)
        mu += regime_offset(rec.serial / scenario_.fee_regime_txs);
    rec.amount = std::exp(mu + scenario_.amount_log_sigma * rng_.normal());
    rec.size_bytes = scenario_.tx_size;
    return rec;
}

std::optional<TxRecord> RecordSource::next()
{
    if (!records_ || pos_ >= records_->size()) return std::nullopt;
    return (*records_)[pos_++];
}

} // namespace edts::netsim
