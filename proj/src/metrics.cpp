#include "edts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace edts::metrics {

std::vector<double> average_rewards(std::span<const RewardSample> series)
{
    std::vector<double> out;
    out.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].blocks == 0) throw MetricsError("average_rewards: zero block count");
        if (i > 0 && series[i].period <= series[i - 1].period)
            throw MetricsError("average_rewards: periods must be strictly increasing");
        out.push_back(series[i].reward / static_cast<double>(series[i].blocks));
    }
    return out;
}

double volatility_of_averages(std::span<const double> a)
{
    if (a.size() < 3) throw MetricsError("volatility: need at least two log-returns");
    for (double v : a)
        if (!(v > 0.0)) throw MetricsError("volatility: average reward must be positive");
    std::vector<double> r(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i) r[i - 1] = std::log(a[i] / a[i - 1]);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(r.size() - 1));
}

double volatility(std::span<const RewardSample> series)
{
    auto a = average_rewards(series);
    return volatility_of_averages(a);
}

std::vector<RewardSample> reward_series(std::span<const netsim::BlockRecord> blocks, std::size_t blocks_per_period)
{
    if (blocks_per_period == 0) throw MetricsError("reward_series: blocks_per_period must be positive");
    std::vector<RewardSample> out;
    for (const auto& b : blocks) {
        if (b.height == 0) continue;
        std::uint64_t period = (b.height - 1) / blocks_per_period;
        if (out.empty() || out.back().period != period) out.push_back({period, 0.0, 0});
        out.back().reward += b.reward;
        ++out.back().blocks;
    }
    return out;
}

double throughput(std::uint64_t transactions, double elapsed_s)
{
    if (!(elapsed_s > 0.0)) throw MetricsError("throughput: elapsed time must be positive");
    return static_cast<double>(transactions) / elapsed_s;
}

double throughput(const netsim::SimulationOutcome& outcome)
{
    return throughput(outcome.main_chain_txs, static_cast<double>(outcome.elapsed_ms) / 1000.0);
}

namespace {

std::vector<double> ranks(std::span<const double> v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw MetricsError("spearman: length mismatch");
    if (x.size() < 2) throw MetricsError("spearman: need at least two points");
    auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

Summary summarize(std::span<const netsim::BlockRecord> blocks, double elapsed_s, std::size_t blocks_per_period)
{
    Summary s;
    std::uint64_t txs = 0;
    for (const auto& b : blocks) {
        txs += b.tx_count;
        s.mean_block_bytes += static_cast<double>(b.wire_bytes);
        s.mean_pt_ms += b.pt_ms;
    }
    if (!blocks.empty()) {
        s.mean_block_bytes /= static_cast<double>(blocks.size());
        s.mean_pt_ms /= static_cast<double>(blocks.size());
    }
    s.tps = elapsed_s > 0.0 ? throughput(txs, elapsed_s) : 0.0;
    try {
        auto series = reward_series(blocks, blocks_per_period);
        s.volatility = volatility(series);
    } catch (const MetricsError&) {
        s.volatility = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

Summary summarize(const netsim::SimulationOutcome& outcome, std::size_t blocks_per_period)
{
    return summarize(outcome.blocks, static_cast<double>(outcome.elapsed_ms) / 1000.0, blocks_per_period);
}

void write_summary_csv(std::ostream& out, const Summary& s)
{
    out << "tps,volatility,mean_block_bytes,mean_pt_ms\n"
        << format_double(s.tps) << ',' << format_double(s.volatility) << ',' << format_double(s.mean_block_bytes) << ','
        << format_double(s.mean_pt_ms) << '\n';
}

bool within_historical_band(double vol)
{
    return vol >= MIN_HIST_VOL && vol <= MAX_HIST_VOL;
}

} // namespace edts::metrics
