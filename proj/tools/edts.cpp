#include "edts/codec.hpp"
#include "edts/cuckoo.hpp"
#include "edts/experiment.hpp"
#include "edts/metrics.hpp"
#include "edts/netsim.hpp"
#include "edts/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using namespace edts;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
    std::string config_file;
    std::string out_dir = "out";
    std::size_t jobs = 1;
    std::map<std::string, std::string> flags;  // config key -> value given on the command line
};

// Keys that have a dashed flag of their own.
const std::map<std::string, std::string> kDashed = {
    {"seed", "--seed"}, {"experiment", "--experiment"}, {"tx_data", "--tx-data"}, {"block_size", "--block-size"}};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--out-dir", c.out_dir, "output directory");
    app->add_option("--jobs", c.jobs, "parallel evaluations")->check(CLI::PositiveNumber);
    for (const auto& [key, flag] : kDashed) {
        auto* opt = app->add_option_function<std::string>(
            flag, [&c, key = key](const std::string& v) { c.flags[key] = v; }, "sets " + key);
        if (key == "block_size") opt->check(CLI::IsMember({"1050000", "2100000", "4200000"}));
        if (key == "experiment") opt->check(CLI::IsMember({"1", "2", "3", "4"}));
    }
    for (const auto& k : experiment::key_registry()) {
        if (kDashed.count(k.name)) continue;
        app->add_option_function<std::string>(
            "--" + k.name, [&c, key = k.name](const std::string& v) { c.flags[key] = v; }, k.help);
    }
}

Config resolve(const Common& c)
{
    Config overrides;
    if (!c.config_file.empty()) overrides.merge(Config::load(c.config_file));
    for (const auto& [k, v] : c.flags) overrides.set(k, v);
    return experiment::effective_config(overrides);
}

void write_file(const fs::path& p, const std::string& text)
{
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

void write_manifest(const fs::path& dir, const std::string& command, const Config& cfg)
{
    std::string text = "# edts " EDTS_VERSION "\n# command: " + command + "\n" + cfg.dump();
    write_file(dir / "manifest.cfg", text);
}

int run_simulate(const Common& c)
{
    Config cfg = resolve(c);
    auto scenario = experiment::scenario_from(cfg);
    auto attrs = experiment::attributes_from(cfg);
    auto outcome = netsim::run_simulation(attrs, scenario, experiment::seed_from(cfg));
    auto summary = metrics::summarize(outcome, scenario.blocks_per_period);

    fs::path dir = c.out_dir;
    std::ostringstream blocks, sum;
    netsim::write_block_csv(blocks, outcome.blocks);
    metrics::write_summary_csv(sum, summary);
    write_file(dir / "blocks.csv", blocks.str());
    write_file(dir / "summary.csv", sum.str());
    write_manifest(dir, "simulate", cfg);
    std::cout << sum.str();
    if (outcome.reconstruct_failures > 0)
        std::cerr << "warning: " << outcome.reconstruct_failures << " blocks failed reconstruction\n";
    return 0;
}

int run_optimize(const Common& c)
{
    Config cfg = resolve(c);
    auto spec = experiment::experiment_spec(static_cast<int>(cfg.get_int("experiment")));
    fs::path dir = fs::path(c.out_dir) / ("exp" + std::to_string(spec.id));
    auto s = experiment::run_experiment(spec, cfg, dir, c.jobs);
    write_manifest(c.out_dir, "optimize", cfg);
    experiment::write_summary_header(std::cout);
    experiment::write_summary_row(std::cout, s);
    return 0;
}

int run_experiments(const Common& c)
{
    Config cfg = resolve(c);
    cfg.erase("experiment");
    std::ostringstream table;
    experiment::write_summary_header(table);
    for (int id = 1; id <= 4; ++id) {
        auto spec = experiment::experiment_spec(id);
        auto s = experiment::run_experiment(spec, cfg, fs::path(c.out_dir) / ("exp" + std::to_string(id)), c.jobs);
        experiment::write_summary_row(table, s);
    }
    write_file(fs::path(c.out_dir) / "experiments.csv", table.str());
    write_manifest(c.out_dir, "experiments", cfg);
    std::cout << table.str();
    return 0;
}

struct BenchOptions {
    std::string epsilons = "0.01,0.001,1e-06";
    std::size_t items = 100000;
    std::size_t probes = 1000000;
};

int run_filter_bench(const Common& c, const BenchOptions& b)
{
    Config cfg = resolve(c);
    const double alpha = cfg.get_double("alpha");
    const auto seed = experiment::seed_from(cfg);
    std::ostringstream out;
    out << "epsilon,alpha,fingerprint_bits,items,inserted,probes,false_positives,fpr,false_negatives,"
           "space_cost_bits,serialized_bytes,bound_bytes\n";
    for (double eps : parse_number_list("epsilons", b.epsilons)) {
        cuckoo::FilterParams p;
        p.epsilon = eps;
        p.alpha = alpha;
        p.seed = seed;
        cuckoo::CuckooFilter f(p, b.items);
        Rng rng(derive_seed(seed, 0xbe7cULL));
        auto random_id = [&] {
            Hash256 h;
            for (int w = 0; w < 4; ++w) {
                auto v = rng.next();
                for (int k = 0; k < 8; ++k) h.bytes[static_cast<std::size_t>(w * 8 + k)] = static_cast<std::uint8_t>(v >> (8 * k));
            }
            return h;
        };
        std::vector<Hash256> members;
        for (std::size_t i = 0; i < b.items; ++i) {
            auto id = random_id();
            if (f.insert(id) != cuckoo::InsertResult::inserted) break;
            members.push_back(id);
        }
        std::size_t fn = 0, fp = 0;
        for (const auto& id : members) fn += !f.contains(id);
        for (std::size_t i = 0; i < b.probes; ++i) fp += f.contains(random_id());
        const double cost = cuckoo::space_cost_bits(eps, alpha);
        const double bound = std::ceil(std::ceil(cost) * static_cast<double>(f.capacity()) / 8.0) + 64.0;
        out << format_double(eps) << ',' << format_double(alpha) << ',' << f.fingerprint_bits() << ',' << b.items << ','
            << members.size() << ',' << b.probes << ',' << fp << ','
            << format_double(b.probes ? static_cast<double>(fp) / static_cast<double>(b.probes) : 0.0) << ',' << fn
            << ',' << format_double(cost) << ',' << f.serialized_size() << ',' << format_double(bound) << '\n';
    }
    write_file(fs::path(c.out_dir) / "filter_bench.csv", out.str());
    write_manifest(c.out_dir, "filter-bench", cfg);
    std::cout << out.str();
    return 0;
}

int run_volatility(const Common& c, const std::string& input, double elapsed_s)
{
    Config cfg = resolve(c);
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + input);
    auto blocks = netsim::read_block_csv(in);
    const auto bpp = static_cast<std::size_t>(cfg.get_int("blocks_per_period"));
    if (elapsed_s <= 0.0) elapsed_s = static_cast<double>(blocks.size()) * cfg.get_double("block_interval_ms") / 1000.0;
    auto s = metrics::summarize(blocks, elapsed_s, bpp);
    metrics::write_summary_csv(std::cout, s);
    return 0;
}

int run_plot_data(const Common& c, const std::string& input)
{
    fs::path in = input;
    if (!fs::exists(in)) throw std::runtime_error("plot-data input " + input + " does not exist");
    bool any = false;
    auto emit = [&](const fs::path& dir, const fs::path& out_dir) {
        if (fs::exists(dir / "front.csv")) {
            std::ifstream f(dir / "front.csv", std::ios::binary);
            std::ostringstream s;
            experiment::write_scatter_csv(s, experiment::read_front_csv(f));
            write_file(out_dir / "scatter.csv", s.str());
            any = true;
        }
        if (fs::exists(dir / "blocks.csv")) {
            std::ifstream f(dir / "blocks.csv", std::ios::binary);
            std::ostringstream s;
            experiment::write_propagation_csv(s, netsim::read_block_csv(f));
            write_file(out_dir / "propagation.csv", s.str());
            any = true;
        }
    };
    emit(in, c.out_dir);
    for (int id = 1; id <= 4; ++id) {
        auto sub = "exp" + std::to_string(id);
        if (fs::is_directory(in / sub)) emit(in / sub, fs::path(c.out_dir) / sub);
    }
    if (!any) throw std::runtime_error("no front.csv or blocks.csv under " + input);
    return 0;
}

std::string describe_block(const codec::EfficientBlock& b)
{
    std::ostringstream o;
    const auto& f = b.filter;
    o << "hash = " << b.hash().hex() << "\nparent = " << b.header.parent.hex()
      << "\nmerkle_root = " << b.header.merkle_root.hex() << "\ntimestamp_ms = " << b.header.timestamp_ms
      << "\nnonce = " << b.header.nonce << "\ntx_count = " << b.header.tx_count
      << "\nfilter_epsilon = " << format_double(f.params().epsilon) << "\nfilter_alpha = " << format_double(f.params().alpha)
      << "\nfilter_seed = " << f.params().seed << "\nfilter_fingerprint_bits = " << f.fingerprint_bits()
      << "\nfilter_buckets = " << f.bucket_count() << "\nfilter_items = " << f.size()
      << "\nfilter_bytes = " << f.serialized_size() << "\ncoinbase_txid = " << b.coinbase.txid.hex()
      << "\ncoinbase_reward = " << format_double(b.coinbase.amount) << "\ninspectors = " << b.inspectors.size()
      << "\nwire_bytes = " << b.wire_size() << '\n';
    return o.str();
}

int run_block(const Common& c, std::size_t mempool_size)
{
    Config cfg = resolve(c);
    auto scenario = experiment::scenario_from(cfg);
    auto attrs = experiment::attributes_from(cfg);
    const auto seed = experiment::seed_from(cfg);

    std::unique_ptr<netsim::TxSource> src;
    if (scenario.dataset)
        src = std::make_unique<netsim::RecordSource>(scenario.dataset);
    else
        src = std::make_unique<netsim::SyntheticSource>(scenario, derive_seed(seed, 0x7478ULL));
    Mempool pool(mempool_size);
    while (pool.size() < mempool_size) {
        auto rec = src->next();
        if (!rec) break;
        pool.add(rec->materialize(attrs.a3_fee_percentage));
    }

    codec::BuildParams params;
    params.filter.epsilon = scenario.epsilon;
    params.filter.alpha = scenario.alpha;
    params.filter.seed = seed;
    params.block_size_cap = scenario.block_size;
    auto built = codec::build_block(pool, attrs, Hash256{}, params);

    fs::path dir = c.out_dir;
    auto bytes = built.block.serialize();
    write_file(dir / "block.bin", std::string(bytes.begin(), bytes.end()));
    std::string ids;
    for (const auto& tx : built.block.full_txs) ids += tx.txid.hex() + '\n';
    write_file(dir / "txids.txt", ids);
    auto text = describe_block(built.block);
    write_file(dir / "block.txt", text);
    write_manifest(dir, "block", cfg);
    std::cout << text;
    return 0;
}

int run_inspect_block(const std::string& input)
{
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + input);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::cout << describe_block(codec::EfficientBlock::deserialize(bytes));
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Efficient dynamic transaction storage simulator"};
    app.set_version_flag("--version", EDTS_VERSION);
    app.require_subcommand(1);

    Common c_sim, c_opt, c_exp, c_bench, c_vol, c_plot;
    auto* sim = app.add_subcommand("simulate", "run one network simulation");
    add_common(sim, c_sim);
    auto* opt = app.add_subcommand("optimize", "optimize one experiment");
    add_common(opt, c_opt);
    auto* exps = app.add_subcommand("experiments", "optimize all four experiments");
    add_common(exps, c_exp);

    BenchOptions bench_opts;
    auto* bench = app.add_subcommand("filter-bench", "measure filter false-positive rate and size");
    add_common(bench, c_bench);
    bench->add_option("--epsilons", bench_opts.epsilons, "comma-separated target rates");
    bench->add_option("--items", bench_opts.items, "items inserted");
    bench->add_option("--probes", bench_opts.probes, "negative queries");

    std::string vol_input;
    double vol_elapsed = 0.0;
    auto* vol = app.add_subcommand("volatility", "metrics over a block CSV");
    add_common(vol, c_vol);
    vol->add_option("--input", vol_input, "block CSV")->required();
    vol->add_option("--elapsed-s", vol_elapsed, "simulated seconds; default blocks x interval");

    std::string plot_input;
    auto* plot = app.add_subcommand("plot-data", "plot-ready CSVs from result directories");
    add_common(plot, c_plot);
    plot->add_option("--input", plot_input, "result directory")->required();

    std::size_t block_mempool = 2100;
    Common c_block;
    auto* blk = app.add_subcommand("block", "build one block from a synthetic mempool and dump it");
    add_common(blk, c_block);
    blk->add_option("--mempool-size", block_mempool, "transactions in the mempool")->check(CLI::PositiveNumber);

    std::string inspect_input;
    auto* inspect = app.add_subcommand("inspect-block", "decode a dumped block");
    inspect->add_option("--input", inspect_input, "block.bin")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*sim) return run_simulate(c_sim);
        if (*opt) return run_optimize(c_opt);
        if (*exps) return run_experiments(c_exp);
        if (*bench) return run_filter_bench(c_bench, bench_opts);
        if (*vol) return run_volatility(c_vol, vol_input, vol_elapsed);
        if (*plot) return run_plot_data(c_plot, plot_input);
        if (*blk) return run_block(c_block, block_mempool);
        if (*inspect) return run_inspect_block(inspect_input);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const netsim::ScenarioError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const MalformedBytes& e) {
        std::cerr << "error: malformed block: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
