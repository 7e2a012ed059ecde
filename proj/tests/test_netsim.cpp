#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "edts/netsim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

using namespace edts;
using namespace edts::netsim;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text)
{
    auto dir = fs::temp_directory_path() / "edts_netsim_test";
    fs::create_directories(dir);
    auto p = dir / name;
    std::ofstream(p) << text;
    return p;
}

const char* kOneRegion = R"(regions = ONLY
share = 1
bandwidth.ONLY = 8000000
delay.ONLY = 100
)";

std::string csv(const SimulationOutcome& o)
{
    std::ostringstream s;
    write_block_csv(s, o.blocks);
    return s.str();
}

Scenario small_scenario()
{
    Scenario s;
    s.nodes = 12;
    s.blocks = 12;
    s.blocks_per_period = 4;
    s.tx_rate = 2.0;
    s.block_interval_ms = 60000;
    return s;
}

} // namespace

TEST_CASE("hop time arithmetic")
{
    CHECK(hop_time_ms(0, 8e6, 100.0) == 100.0);
    CHECK(hop_time_ms(1048576, 8e6, 100.0) == doctest::Approx(1148.576).epsilon(1e-12));

    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        std::uint64_t size = rng.uniform_index(4'200'000);
        double bw = rng.uniform(1e5, 1e8);
        double delay = rng.uniform(0.0, 500.0);
        double oracle = static_cast<double>(size) * 8.0 / bw * 1000.0 + delay;
        CHECK(std::abs(hop_time_ms(size, bw, delay) - oracle) <= 1e-9 * oracle);
    }

    auto topo = Topology::load(default_regions_file());
    auto na = topo.region_index("NORTH_AMERICA");
    auto eu = topo.region_index("EUROPE");
    CHECK(hop_time_ms(1000, na, eu, topo) == doctest::Approx(1000 * 8.0 / topo.bandwidth[na][eu] * 1000 + topo.delay[na][eu]));
    CHECK(hop_time_ms(1000, "NORTH_AMERICA", "EUROPE", topo) == hop_time_ms(1000, na, eu, topo));
    CHECK_THROWS_AS(hop_time_ms(1000, "ATLANTIS", "EUROPE", topo), std::out_of_range);
    CHECK_THROWS_AS(hop_time_ms(1000, 6, 0, topo), std::out_of_range);
}

TEST_CASE("bundled topology")
{
    auto topo = Topology::load(default_regions_file());
    CHECK(topo.regions.size() == 6);
    CHECK_NOTHROW(topo.validate());
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(topo.bandwidth[i][j] == topo.bandwidth[j][i]);
            CHECK(topo.bandwidth[i][j] > 0);
            CHECK(topo.delay[i][j] > 0);
        }
}

TEST_CASE("topology validation")
{
    auto parse = [](const std::string& text) { return Topology::from_config(Config::parse(text)); };
    CHECK_NOTHROW(parse(kOneRegion));
    CHECK_THROWS_AS(parse("regions = A, B\nshare = 1, 1\nbandwidth.A = 1, 2\nbandwidth.B = 1, 1\n"
                          "delay.A = 1, 1\ndelay.B = 1, 1\n"),
                    ScenarioError);
    CHECK_THROWS_AS(parse("regions = A\nshare = 1\nbandwidth.A = 0\ndelay.A = 1\n"), ScenarioError);
    CHECK_THROWS_AS(parse("regions = A\nshare = 1\nbandwidth.A = 1\ndelay.A = -1\n"), ScenarioError);
    CHECK_THROWS_AS(parse("regions = A\nshare = 1\nbandwidth.A = 1, 2\ndelay.A = 1\n"), ScenarioError);
    CHECK_THROWS_AS(parse("regions = A\nshare = 1\ndelay.A = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("share = 1\n"), ConfigError);
    CHECK_THROWS_AS(Topology::load(write_temp("partial.cfg", "share = 1\n")), ScenarioError);
}

TEST_CASE("random graph")
{
    for (std::size_t nodes : {1u, 2u, 5u, 11u, 100u, 500u}) {
        Rng rng(nodes);
        auto g = random_graph(nodes, 8, 10, rng);
        REQUIRE(g.size() == nodes);
        for (std::size_t v = 0; v < nodes; ++v) {
            std::set<std::uint32_t> uniq(g[v].begin(), g[v].end());
            CHECK(uniq.size() == g[v].size());
            CHECK(uniq.count(static_cast<std::uint32_t>(v)) == 0);
            for (auto u : g[v]) {
                const auto& back = g[u];
                CHECK(std::find(back.begin(), back.end(), v) != back.end());
            }
            if (nodes > 10) {
                CHECK(g[v].size() >= 8);
                CHECK(g[v].size() <= 11);  // joining components may add one edge
            } else {
                CHECK(g[v].size() == nodes - 1);
            }
        }
        std::vector<bool> seen(nodes, false);
        std::queue<std::uint32_t> q;
        q.push(0);
        seen[0] = true;
        std::size_t reached = 1;
        while (!q.empty()) {
            auto v = q.front();
            q.pop();
            for (auto u : g[v])
                if (!seen[u]) {
                    seen[u] = true;
                    ++reached;
                    q.push(u);
                }
        }
        CHECK(reached == nodes);
    }
}

TEST_CASE("single node without transactions")
{
    Scenario s;
    s.nodes = 1;
    s.blocks = 10;
    s.tx_rate = 0.0;
    auto out = run_simulation(DtsAttributes{}, s, 1);
    REQUIRE(out.blocks.size() == 10);
    for (std::size_t i = 0; i < out.blocks.size(); ++i) {
        CHECK(out.blocks[i].height == i + 1);
        CHECK(out.blocks[i].tx_count == 0);
        CHECK(out.blocks[i].pt_ms == 0.0);
        CHECK(out.blocks[i].reward == 0.0);
    }
    CHECK(out.tps == 0.0);
    CHECK(out.main_chain_txs == 0);
    CHECK(out.stale_blocks == 0);
}

TEST_CASE("two nodes on one link: propagation equals one hop")
{
    Scenario s;
    s.nodes = 2;
    s.blocks = 1;
    s.tx_rate = 1.0;
    s.regions_file = write_temp("one_region.cfg", kOneRegion);
    auto out = run_simulation(DtsAttributes{}, s, 3);
    REQUIRE(out.blocks.size() == 1);
    const auto& b = out.blocks[0];
    CHECK(b.tx_count > 0);
    CHECK(b.pt_ms == hop_time_ms(b.wire_bytes, 8e6, 100.0));
}

TEST_CASE("identical seeds give identical runs")
{
    auto s = small_scenario();
    auto a = run_simulation(DtsAttributes{}, s, 42);
    auto b = run_simulation(DtsAttributes{}, s, 42);
    CHECK(csv(a) == csv(b));
    CHECK(a.elapsed_ms == b.elapsed_ms);
    CHECK(a.tps == b.tps);
    CHECK(a.main_chain_txs == b.main_chain_txs);
    for (std::size_t i = 0; i < a.blocks.size(); ++i) CHECK(a.blocks[i].hash == b.blocks[i].hash);
    auto c = run_simulation(DtsAttributes{}, s, 43);
    CHECK(csv(a) != csv(c));
}

TEST_CASE("run totals and main chain shape")
{
    auto s = small_scenario();
    s.supply = Supply::preload;
    DtsAttributes attrs;
    attrs.a1_mempool_size = 3000;
    auto out = run_simulation(attrs, s, 5);
    REQUIRE(out.blocks.size() == s.blocks);
    std::uint64_t txs = 0;
    for (std::size_t i = 0; i < out.blocks.size(); ++i) {
        CHECK(out.blocks[i].height == i + 1);
        CHECK(out.blocks[i].reconstructed);
        CHECK(out.blocks[i].wire_bytes <= s.block_size);
        txs += out.blocks[i].tx_count;
    }
    CHECK(out.main_chain_txs == txs);
    CHECK(out.reconstruct_failures == 0);
    CHECK(out.tps == doctest::Approx(static_cast<double>(txs) / (static_cast<double>(out.elapsed_ms) / 1000.0)));
}

TEST_CASE("short intervals produce forks that resolve")
{
    auto s = small_scenario();
    s.nodes = 30;
    s.blocks = 60;
    s.block_interval_ms = 400;
    s.tx_rate = 50;
    auto out = run_simulation(DtsAttributes{}, s, 9);
    CHECK(out.stale_blocks > 0);
    CHECK(out.mined_blocks == out.blocks.size() + out.stale_blocks);
    for (std::size_t i = 0; i < out.blocks.size(); ++i) CHECK(out.blocks[i].height == i + 1);
    CHECK(out.reconstruct_failures == 0);
}

TEST_CASE("hash power weights pick the miner")
{
    auto s = small_scenario();
    s.hash_power.assign(s.nodes, 0.0);
    s.hash_power[3] = 1.0;
    auto out = run_simulation(DtsAttributes{}, s, 2);
    for (const auto& b : out.blocks) CHECK(b.miner == 3);
}

TEST_CASE("invalid scenarios are rejected")
{
    auto bad = [](auto mutate) {
        auto s = small_scenario();
        mutate(s);
        CHECK_THROWS_AS(run_simulation(DtsAttributes{}, s, 1), ScenarioError);
    };
    bad([](Scenario& s) { s.nodes = 0; });
    bad([](Scenario& s) { s.tx_rate = -1; });
    bad([](Scenario& s) { s.block_interval_ms = 0; });
    bad([](Scenario& s) { s.block_size = 10; });
    bad([](Scenario& s) { s.blocks = 0; });
    bad([](Scenario& s) { s.hash_power = {1.0}; });
    bad([](Scenario& s) { s.epsilon = 1.0; });
    bad([](Scenario& s) { s.regions_file = "/nonexistent/regions.cfg"; });
    bad([](Scenario& s) { s.regions_file = write_temp("empty.cfg", "# nothing\n"); });
}

TEST_CASE("scenario config roundtrip")
{
    Scenario s;
    s.nodes = 37;
    s.supply = Supply::preload;
    s.hash_power.assign(37, 2.0);
    s.fee_regime_txs = 500;
    s.amount_log_sigma = 0.25;
    Config cfg;
    s.store(cfg);
    auto t = Scenario::from_config(cfg);
    CHECK(t.nodes == 37);
    CHECK(t.supply == Supply::preload);
    CHECK(t.hash_power == s.hash_power);
    CHECK(t.fee_regime_txs == 500);
    CHECK(t.amount_log_sigma == 0.25);
    cfg.set("supply", "trickle");
    CHECK_THROWS_AS(Scenario::from_config(cfg), ConfigError);
}

TEST_CASE("synthetic source")
{
    Scenario s;
    s.tx_rate = 0.0;
    SyntheticSource none(s, 1);
    CHECK_FALSE(none.next());

    s.tx_rate = 3.5;
    SyntheticSource src(s, 1);
    std::int64_t prev = 0;
    double log_sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        auto r = src.next();
        REQUIRE(r);
        CHECK(r->serial == static_cast<std::uint64_t>(i));
        CHECK(r->arrival_ms >= prev);
        prev = r->arrival_ms;
        log_sum += std::log(r->amount);
    }
    CHECK(log_sum / n == doctest::Approx(s.amount_log_mu).epsilon(0.01));
    CHECK(static_cast<double>(prev) / n == doctest::Approx(1000.0 / 3.5).epsilon(0.05));

    s.fee_regime_sigma = 1.0;
    s.fee_regime_txs = 1000;
    s.amount_log_sigma = 0.0;
    SyntheticSource regimes(s, 2);
    std::set<double> levels;
    for (int i = 0; i < 5000; ++i) levels.insert(regimes.next()->amount);
    CHECK(levels.size() == 5);
}

TEST_CASE("record source replays in order")
{
    auto recs = std::make_shared<std::vector<TxRecord>>();
    for (std::uint64_t i = 0; i < 5; ++i) recs->push_back(TxRecord{i, 100.0 + static_cast<double>(i), static_cast<std::int64_t>(i * 10), 500});
    RecordSource src(recs);
    for (std::uint64_t i = 0; i < 5; ++i) CHECK(src.next()->serial == i);
    CHECK_FALSE(src.next());
}

TEST_CASE("dataset-driven run")
{
    auto recs = std::make_shared<std::vector<TxRecord>>();
    Rng rng(4);
    for (std::uint64_t i = 0; i < 3000; ++i)
        recs->push_back(TxRecord{i, std::exp(11.0 + rng.normal()), static_cast<std::int64_t>(i * 200), 500});
    auto s = small_scenario();
    s.dataset = recs;
    auto out = run_simulation(DtsAttributes{}, s, 1);
    CHECK(out.main_chain_txs > 0);
    CHECK(out.main_chain_txs <= 3000);
}

TEST_CASE("block CSV roundtrip")
{
    auto out = run_simulation(DtsAttributes{}, small_scenario(), 8);
    auto text = csv(out);
    CHECK(text.rfind("height,reward,tx_count,wire_bytes,pt_ms\n", 0) == 0);
    std::istringstream in(text);
    auto back = read_block_csv(in);
    REQUIRE(back.size() == out.blocks.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].height == out.blocks[i].height);
        CHECK(back[i].reward == out.blocks[i].reward);
        CHECK(back[i].tx_count == out.blocks[i].tx_count);
        CHECK(back[i].wire_bytes == out.blocks[i].wire_bytes);
        CHECK(back[i].pt_ms == out.blocks[i].pt_ms);
    }
    std::istringstream bad("height,reward\n1,2\n");
    CHECK_THROWS(read_block_csv(bad));
}
