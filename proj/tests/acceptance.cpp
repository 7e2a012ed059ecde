// Acceptance checks, one line per criterion.
//   acceptance                 run all
//   acceptance --criterion N   run one

#include "support.hpp"

#include "edts/codec.hpp"
#include "edts/cuckoo.hpp"
#include "edts/experiment.hpp"
#include "edts/metrics.hpp"
#include "edts/moo.hpp"
#include "edts/netsim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <sys/wait.h>

using namespace edts;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

void require(Outcome& o, bool cond, const std::string& what)
{
    if (cond) return;
    if (o.pass) o.detail = what;
    o.pass = false;
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / "edts_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

Config scenario_config(const std::string& file)
{
    return experiment::effective_config(Config::load(fs::path(EDTS_SOURCE_DIR) / "scenarios" / file));
}

Outcome space_bound()
{
    Outcome o;
    double bits = cuckoo::space_cost_bits(1e-6, 0.955);
    double bytes = cuckoo::space_cost_bytes(1e-6, 0.955);
    require(o, std::abs(bytes - 3.0015) <= 1e-3, "bytes per item " + fmt("%.6f", bytes));
    require(o, std::abs(bits - 24.012) <= 8e-3, "bits per item " + fmt("%.6f", bits));
    o.detail = o.pass ? fmt("%.6f bytes per item", bytes) : o.detail;
    return o;
}

Outcome filter_fpr()
{
    Outcome o;
    cuckoo::FilterParams p;
    p.epsilon = 1e-3;
    p.alpha = 0.955;
    p.seed = 11;
    const std::size_t items = 100000, probes = 1000000;
    cuckoo::CuckooFilter f(p, items);
    Rng rng(2);
    std::vector<Hash256> ids;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < items; ++i) {
        ids.push_back(testing::random_id(rng));
        failed += f.insert(ids.back()) != cuckoo::InsertResult::inserted;
    }
    std::size_t negatives = 0;
    for (const auto& id : ids) negatives += !f.contains(id);
    std::sort(ids.begin(), ids.end());
    std::size_t positives = 0;
    for (std::size_t i = 0; i < probes; ++i) {
        auto id = testing::random_id(rng);
        if (std::binary_search(ids.begin(), ids.end(), id)) continue;
        positives += f.contains(id);
    }
    double fpr = static_cast<double>(positives) / probes;
    require(o, failed == 0, std::to_string(failed) + " inserts failed");
    require(o, negatives == 0, std::to_string(negatives) + " false negatives");
    require(o, fpr <= 2e-3, "observed fpr " + fmt("%.6f", fpr));
    if (o.pass) o.detail = "observed fpr " + fmt("%.6f", fpr) + ", no false negatives";
    return o;
}

std::vector<Hash256> ids_of(const std::vector<Transaction>& txs)
{
    std::vector<Hash256> out;
    for (const auto& tx : txs) out.push_back(tx.txid);
    return out;
}

bool root_matches(const codec::EfficientBlock& b, const std::vector<Transaction>& txs)
{
    std::vector<Hash256> leaves{b.coinbase.txid};
    for (const auto& tx : txs) leaves.push_back(tx.txid);
    return codec::merkle_root(leaves) == b.header.merkle_root;
}

Outcome codec_roundtrip()
{
    Outcome o;
    Rng rng(77);
    std::size_t ok = 0, trials = 0, inspectors = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        bool engineered = trial % 100 == 0;
        std::size_t size = 10 + rng.uniform_index(4991);
        auto txs = testing::random_txs(rng, size, static_cast<std::uint64_t>(trial) << 24, 9.5, 0.5 + 1.5 * rng.uniform01());
        DtsAttributes attrs;
        attrs.a2_priority = rng.coin() ? Priority::fee_based : Priority::time_based;
        codec::BuildParams params;
        params.filter.epsilon = engineered || rng.coin() ? 1e-6 : 1e-3;
        params.filter.seed = rng.next();
        params.sequence = static_cast<std::uint64_t>(trial);
        if (engineered) {
            // about half the pool fits, so a low-fee, late collider stays out of the block
            double total = 0.0;
            for (const auto& tx : txs) total += leaf_space(tx, attrs);
            params.block_size_cap = codec::kHeaderBytes +
                static_cast<std::uint64_t>(std::ceil(0.5 * total * cuckoo::space_cost_bytes(1e-6, params.filter.alpha)));
        } else if (rng.coin()) {
            params.block_size_cap = 4000 + rng.uniform_index(40000);
        }
        auto pool = testing::pool_of(txs);
        auto built = codec::build_block(pool, attrs, Hash256{}, params);

        if (engineered) {
            double min_fee = 1e300;
            for (const auto& tx : txs) min_fee = std::min(min_fee, tx.fee);
            auto members = ids_of(built.block.full_txs);
            auto fp = testing::find_false_positive(built.block.filter, members, min_fee / 2,
                                                   (std::uint64_t{1} << 50) + static_cast<std::uint64_t>(trial) * 100'000'000,
                                                   100'000'000);
            require(o, fp.has_value(), "no collision found in trial " + std::to_string(trial));
            if (!fp) continue;
            pool.add(*fp);
            built = codec::build_block(pool, attrs, Hash256{}, params);
            bool shipped = std::any_of(built.block.inspectors.begin(), built.block.inspectors.end(),
                                       [&](const Transaction& t) { return t.txid == fp->txid; });
            require(o, shipped, "collider not shipped as an inspector in trial " + std::to_string(trial));
            require(o, ids_of(built.block.full_txs) == members, "collider changed the selection in trial " + std::to_string(trial));
        }
        inspectors += built.block.inspectors.size();

        ++trials;
        auto wire = codec::EfficientBlock::deserialize(built.block.serialize());
        try {
            auto got = codec::reconstruct_block(wire, pool);
            bool same = ids_of(got) == ids_of(built.block.full_txs) && root_matches(wire, got);
            ok += same;
            require(o, same, "reconstruction differs in trial " + std::to_string(trial));
        } catch (const std::exception& e) {
            require(o, false, "trial " + std::to_string(trial) + ": " + e.what());
        }
    }
    if (o.pass)
        o.detail = std::to_string(ok) + "/" + std::to_string(trials) + " verified, " + std::to_string(inspectors) +
                   " inspectors shipped";
    return o;
}

double oracle_volatility(const std::vector<double>& a)
{
    std::vector<long double> r;
    for (std::size_t i = 1; i < a.size(); ++i)
        r.push_back(std::log(static_cast<long double>(a[i])) - std::log(static_cast<long double>(a[i - 1])));
    long double mean = std::accumulate(r.begin(), r.end(), 0.0L) / static_cast<long double>(r.size());
    long double ss = 0;
    for (auto x : r) ss += (x - mean) * (x - mean);
    return static_cast<double>(std::sqrt(ss / static_cast<long double>(r.size() - 1)));
}

std::vector<metrics::RewardSample> series_of(const std::vector<double>& averages, Rng& rng)
{
    std::vector<metrics::RewardSample> out;
    for (std::size_t i = 0; i < averages.size(); ++i) {
        std::uint64_t blocks = 1 + rng.uniform_index(144);
        out.push_back({i, averages[i] * static_cast<double>(blocks), blocks});
    }
    return out;
}

Outcome volatility_oracle()
{
    Outcome o;
    Rng rng(365);
    std::vector<double> a;
    for (int i = 0; i < 365; ++i) a.push_back(std::exp(rng.uniform(-2.0, 6.0)));
    auto series = series_of(a, rng);
    std::vector<double> averages;
    for (const auto& s : series) averages.push_back(s.reward / static_cast<double>(s.blocks));
    double got = metrics::volatility(series);
    double want = oracle_volatility(averages);
    double rel = std::abs(got - want) / want;
    require(o, rel <= 1e-12, "relative error " + fmt("%.3e", rel));

    double flat = metrics::volatility(series_of(std::vector<double>(365, 7.25), rng));
    require(o, flat == 0.0, "constant series gives " + fmt("%.17g", flat));

    const double e = std::exp(1.0);
    double alt = metrics::volatility(series_of({1, e, 1, e, 1}, rng));
    require(o, std::abs(alt - std::sqrt(4.0 / 3.0)) <= 1e-12, "alternating series gives " + fmt("%.17g", alt));
    if (o.pass) o.detail = "relative error " + fmt("%.2e", rel) + ", constant 0, alternating " + fmt("%.15f", alt);
    return o;
}

Outcome propagation()
{
    Outcome o;
    Rng rng(10);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        std::uint64_t size = rng.uniform_index(4'200'000);
        double bw = rng.uniform(1e5, 1e8);
        double delay = rng.uniform(0.0, 500.0);
        double want = static_cast<double>(size) * 8.0 * 1000.0 / bw + delay;
        worst = std::max(worst, std::abs(netsim::hop_time_ms(size, bw, delay) - want) / want);
    }
    require(o, worst <= 1e-9, "hop time relative error " + fmt("%.3e", worst));

    auto regions = scratch("one_region.cfg");
    std::ofstream(regions) << "regions = ONLY\nshare = 1\nbandwidth.ONLY = 8000000\ndelay.ONLY = 100\n";
    netsim::Scenario s;
    s.nodes = 2;
    s.blocks = 1;
    s.tx_rate = 1.0;
    s.regions_file = regions;
    auto out = netsim::run_simulation(DtsAttributes{}, s, 42);
    require(o, out.blocks.size() == 1, "expected one block");
    if (out.blocks.size() == 1) {
        const auto& b = out.blocks[0];
        double hop = static_cast<double>(b.wire_bytes) * 8.0 * 1000.0 / 8e6 + 100.0;
        require(o, b.pt_ms == hop, "two-node pt " + fmt("%.17g", b.pt_ms) + " vs hop " + fmt("%.17g", hop));
        if (o.pass) o.detail = "max error " + fmt("%.2e", worst) + ", two-node pt " + fmt("%.6f", b.pt_ms) + " ms";
    }
    return o;
}

Outcome throughput()
{
    Outcome o;
    auto cfg = scenario_config("throughput.cfg");
    auto attrs = experiment::attributes_from(cfg);
    auto s = experiment::scenario_from(cfg);
    require(o, attrs.a1_mempool_size == 75032 && attrs.a3_fee_percentage == 0.1031 && attrs.a7_max_leaf_space == 36 &&
                   attrs.a8_scale_mu == 9.5 && attrs.a9_shape_sigma == 0.99,
            "attributes differ from the optimum");
    require(o, s.nodes == 100 && s.blocks == 144, "scenario is not 100 nodes, 144 blocks");
    auto out = netsim::run_simulation(attrs, s, experiment::seed_from(cfg));

    const double eps = s.epsilon, alpha = s.alpha;
    const double bits = (std::log2(1.0 / eps) + 3.0) / alpha;
    const double budget = static_cast<double>(s.block_size - 80) * 8.0 / bits;
    std::uint64_t max_wire = 0;
    long worst = 0;
    for (const auto& b : out.blocks) {
        max_wire = std::max(max_wire, b.wire_bytes);
        require(o, b.wire_bytes < 1'000'000, "block " + std::to_string(b.height) + " wire " + std::to_string(b.wire_bytes));
        require(o, std::abs(b.leaf_budget - budget) <= 1e-9 * budget, "leaf budget " + fmt("%.6f", b.leaf_budget));
        require(o, b.tx_count > 0, "empty block at height " + std::to_string(b.height));
        if (b.tx_count == 0) continue;
        double mean_leaf = b.leaf_used / b.tx_count;
        auto predicted = static_cast<long>(std::floor(budget / mean_leaf));
        long diff = std::labs(predicted - static_cast<long>(b.tx_count));
        worst = std::max(worst, diff);
    }
    require(o, worst <= 1, "capacity off by " + std::to_string(worst) + " transactions");
    require(o, out.tps >= 35.0, "tps " + fmt("%.2f", out.tps));
    if (o.pass)
        o.detail = "tps " + fmt("%.2f", out.tps) + ", max wire " + std::to_string(max_wire) + " bytes, capacity within " +
                   std::to_string(worst);
    return o;
}

std::vector<int> brute_ranks(const std::vector<moo::Vec>& f)
{
    std::vector<int> rank(f.size(), 0);
    std::size_t assigned = 0;
    for (int r = 1; assigned < f.size(); ++r) {
        std::vector<std::size_t> now;
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (rank[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < f.size() && !dominated; ++j) {
                if (j == i || (rank[j] && rank[j] < r)) continue;
                bool no_worse = true, better = false;
                for (std::size_t k = 0; k < f[i].size(); ++k) {
                    no_worse = no_worse && f[j][k] <= f[i][k];
                    better = better || f[j][k] < f[i][k];
                }
                dominated = no_worse && better;
            }
            if (!dominated) now.push_back(i);
        }
        for (auto i : now) rank[i] = r;
        assigned += now.size();
    }
    return rank;
}

double slab_hypervolume(std::vector<moo::Vec> pts, double rx, double ry)
{
    std::sort(pts.begin(), pts.end());
    double area = 0, ceiling = ry;
    for (const auto& p : pts) {
        if (p[0] >= rx || p[1] >= ceiling) continue;
        area += (rx - p[0]) * (ceiling - p[1]);
        ceiling = p[1];
    }
    return area;
}

Outcome optimizer()
{
    Outcome o;
    Rng rng(7);
    for (int set = 0; set < 100; ++set) {
        std::vector<moo::Vec> pts;
        for (int i = 0; i < 50; ++i) {
            // coarse grid so ties and duplicates occur
            pts.push_back({std::floor(rng.uniform(0, 10)), std::floor(rng.uniform(0, 10))});
        }
        require(o, moo::nondominated_sort(pts) == brute_ranks(pts), "rank mismatch in set " + std::to_string(set));
    }

    moo::OptimizerConfig cfg;
    cfg.population = 100;
    cfg.generations = 100;
    cfg.bounds.lower.assign(9, 0.0);
    cfg.bounds.upper.assign(9, 1.0);
    cfg.seed = 42;
    auto res = moo::optimize(cfg, [](const moo::Vec& x, std::uint64_t) -> moo::Vec {
        double g = 0.0;
        for (std::size_t i = 1; i < x.size(); ++i) g += x[i];
        g = 1.0 + 9.0 * g / static_cast<double>(x.size() - 1);
        return {x[0], g * (1.0 - std::sqrt(x[0] / g))};
    });
    std::vector<moo::Vec> front;
    for (const auto& p : res.front) front.push_back(p.objectives);
    double hv = slab_hypervolume(front, 1.1, 1.1);
    // reference box minus the area under f2 = 1 - sqrt(f1)
    const double analytic = 1.1 * 1.1 - (1.0 - 2.0 / 3.0);
    double rel = std::abs(hv - analytic) / analytic;
    require(o, rel <= 0.01, "hypervolume " + fmt("%.6f", hv) + " vs " + fmt("%.6f", analytic));
    if (o.pass) o.detail = "100 sets match, hypervolume " + fmt("%.6f", hv) + " vs " + fmt("%.6f", analytic);
    return o;
}

Outcome directions()
{
    Outcome o;
    auto d = moo::s_energy_directions(2, 5);
    require(o, d.directions.size() == 5, "expected 5 directions");
    std::vector<double> first;
    for (const auto& v : d.directions) {
        first.push_back(v[0]);
        require(o, std::abs(v[0] + v[1] - 1.0) <= 1e-9 && v[0] >= -1e-9 && v[1] >= -1e-9, "point off the simplex");
    }
    std::sort(first.begin(), first.end());
    const double grid[] = {0, 0.25, 0.5, 0.75, 1};
    double worst = 0;
    for (std::size_t i = 0; i < first.size() && i < 5; ++i) worst = std::max(worst, std::abs(first[i] - grid[i]));
    require(o, worst <= 0.02, "largest offset from the grid " + fmt("%.4f", worst));
    if (o.pass) o.detail = "largest offset from the grid " + fmt("%.4f", worst);
    return o;
}

std::vector<double> average_ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) r[idx[k]] = (static_cast<double>(i + j) + 1.0) / 2.0;
        i = j;
    }
    return r;
}

double rank_correlation(const std::vector<double>& x, const std::vector<double>& y)
{
    auto rx = average_ranks(x), ry = average_ranks(y);
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Outcome prioritization()
{
    Outcome o;
    auto cfg = scenario_config("prioritization.cfg");
    auto s = experiment::scenario_from(cfg);
    require(o, s.blocks == 144, "scenario is not 144 blocks");
    auto out = netsim::run_simulation(experiment::attributes_from(cfg), s, experiment::seed_from(cfg));
    std::vector<double> wire, pt;
    for (const auto& b : out.blocks) {
        wire.push_back(static_cast<double>(b.wire_bytes));
        pt.push_back(b.pt_ms);
    }
    double rho = rank_correlation(wire, pt);
    require(o, rho > 0, "rank correlation " + fmt("%.4f", rho));

    auto blocks = out.blocks;
    std::stable_sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) { return a.mean_fee < b.mean_fee; });
    std::size_t decile = blocks.size() / 10;
    double low = 0, high = 0;
    for (std::size_t i = 0; i < decile; ++i) {
        low += blocks[i].pt_ms / decile;
        high += blocks[blocks.size() - 1 - i].pt_ms / decile;
    }
    require(o, decile > 0 && high < low, "top-decile pt " + fmt("%.1f", high) + " vs bottom " + fmt("%.1f", low));
    if (o.pass)
        o.detail = "rank correlation " + fmt("%.3f", rho) + ", top-decile pt " + fmt("%.0f", high) + " ms vs bottom " +
                   fmt("%.0f", low) + " ms";
    return o;
}

std::map<std::string, std::string> tree(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        auto rel = fs::relative(e.path(), root).generic_string();
        if (e.is_directory()) {
            out[rel + "/"] = "";
            continue;
        }
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        out[rel] = s.str();
    }
    return out;
}

Outcome determinism()
{
    Outcome o;
    auto cfg = fs::path(EDTS_SOURCE_DIR) / "scenarios" / "toy.cfg";
    std::vector<fs::path> dirs{scratch("run_a"), scratch("run_b")};
    for (const auto& d : dirs) {
        std::string cmd = std::string(EDTS_CLI) + " experiments --seed 42 --config " + cfg.string() + " --out-dir " +
                          d.string() + " >/dev/null 2>&1";
        int status = std::system(cmd.c_str());
        require(o, WIFEXITED(status) && WEXITSTATUS(status) == 0, "experiments run failed");
    }
    if (!o.pass) return o;
    auto a = tree(dirs[0]), b = tree(dirs[1]);
    require(o, a.size() > 4, "output tree is nearly empty");
    require(o, a == b, "output trees differ");
    std::size_t bytes = 0;
    for (const auto& [k, v] : a) bytes += v.size();
    if (o.pass) o.detail = std::to_string(a.size()) + " entries, " + std::to_string(bytes) + " bytes identical";
    return o;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"filter space bound", space_bound},
    {"filter false-positive rate", filter_fpr},
    {"block codec roundtrip", codec_roundtrip},
    {"volatility oracle", volatility_oracle},
    {"propagation arithmetic", propagation},
    {"throughput at desk scale", throughput},
    {"optimizer correctness", optimizer},
    {"reference directions", directions},
    {"prioritization property", prioritization},
    {"end-to-end determinism", determinism},
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "run one criterion")->check(CLI::Range(1, static_cast<int>(kCriteria.size())));
    CLI11_PARSE(app, argc, argv);

    int failed = 0;
    for (std::size_t i = 0; i < kCriteria.size(); ++i) {
        if (only && static_cast<std::size_t>(only) != i + 1) continue;
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = kCriteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %2zu %s: %s (%s) [%.2f s]\n", i + 1, o.pass ? "PASS" : "FAIL", kCriteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
