#pragma once

#include "edts/netsim.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace edts::metrics {

/// Historical band of yearly block-reward volatility, 2012 to 2021.
inline constexpr double MIN_HIST_VOL = 0.037647;
inline constexpr double MAX_HIST_VOL = 0.238111;

class MetricsError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct RewardSample {
    std::uint64_t period = 0;
    double reward = 0.0;      // R_n
    std::uint64_t blocks = 0; // B_n
};

/// A_n = R_n / B_n. Throws MetricsError on a zero block count or non-increasing periods.
std::vector<double> average_rewards(std::span<const RewardSample> series);

/// Sample standard deviation of ln(A_n / A_{n-1}).
double volatility(std::span<const RewardSample> series);
double volatility_of_averages(std::span<const double> averages);

/// Groups main-chain blocks by height into periods of `blocks_per_period`.
std::vector<RewardSample> reward_series(std::span<const netsim::BlockRecord> blocks, std::size_t blocks_per_period);

/// Transactions per second. Throws MetricsError when elapsed_s <= 0.
double throughput(std::uint64_t transactions, double elapsed_s);
double throughput(const netsim::SimulationOutcome& outcome);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct Summary {
    double tps = 0.0;
    double volatility = 0.0;  // NaN when undefined for the run
    double mean_block_bytes = 0.0;
    double mean_pt_ms = 0.0;
};

/// Volatility is NaN when the series is too short or a period earned nothing.
Summary summarize(const netsim::SimulationOutcome& outcome, std::size_t blocks_per_period);
Summary summarize(std::span<const netsim::BlockRecord> blocks, double elapsed_s, std::size_t blocks_per_period);

/// tps,volatility,mean_block_bytes,mean_pt_ms
void write_summary_csv(std::ostream& out, const Summary& s);

bool within_historical_band(double vol);

} // namespace edts::metrics
