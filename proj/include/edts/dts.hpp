#pragma once

#include "edts/config.hpp"
#include "edts/transaction.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace edts {

enum class Priority { time_based, fee_based };

const char* to_string(Priority p);
Priority parse_priority(const std::string& s);

/// The nine strategy attributes. Defaults are the Experiment 1 optimum.
struct DtsAttributes {
    std::uint64_t a1_mempool_size = 75032;
    Priority a2_priority = Priority::fee_based;
    double a3_fee_percentage = 0.1031;
    bool a4_designated_small_space = false;
    double a5_small_fee_threshold = 1000.0;
    std::uint64_t a6_small_fee_count_threshold = 100;
    double a7_max_leaf_space = 36.0;
    double a8_scale_mu = 9.5;
    double a9_shape_sigma = 0.99;

    /// Throws std::domain_error naming the offending attribute.
    void validate() const;

    /// Reads keys a1..a9; missing keys keep their current value.
    void load(const Config& cfg);
    void store(Config& cfg) const;
};

/// 1/2 + 1/2 erf((ln x - mu) / (sigma sqrt 2)). Throws std::domain_error for x <= 0 or sigma <= 0.
double lognormal_cdf(double x, double mu, double sigma);

/// CDF(fee) * A7, in leaf units.
double leaf_space(double fee, const DtsAttributes& attrs);
double leaf_space(const Transaction& tx, const DtsAttributes& attrs);

// Pending transactions keyed by txid, bounded by A1.
class Mempool {
public:
    explicit Mempool(std::size_t capacity) : capacity_(capacity) {}

    /// False when the pool is full or the txid is already present.
    bool add(const Transaction& tx);
    bool erase(const Hash256& txid);
    bool contains(const Hash256& txid) const { return txs_.count(txid) != 0; }
    const Transaction* find(const Hash256& txid) const;

    std::size_t size() const { return txs_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool full() const { return txs_.size() >= capacity_; }
    bool empty() const { return txs_.empty(); }
    void clear() { txs_.clear(); }

    const std::map<Hash256, Transaction>& transactions() const { return txs_; }
    auto begin() const { return txs_.begin(); }
    auto end() const { return txs_.end(); }

private:
    std::size_t capacity_;
    std::map<Hash256, Transaction> txs_;
};

/// Greedy selection result. `admitted` keeps admission order.
struct Selection {
    std::vector<Transaction> admitted;
    std::vector<double> leaves;  // leaf space of admitted[i]
    double leaf_budget = 0.0;
    double reserve_budget = 0.0;  // A4 sub-budget; 0 when A4 is off
    double leaf_used = 0.0;
    double reserve_used = 0.0;
    std::size_t small_count = 0;
    bool exhausted = false;              // stopped on the budget rather than running out of candidates
    std::optional<double> next_leaf;     // leaf space of the candidate that did not fit

    /// Admitted transactions in ascending txid order.
    std::vector<Transaction> sorted_by_txid() const;
};

/// True when `a` precedes `b` in the A2 order (ties by ascending txid).
bool precedes(const Transaction& a, const Transaction& b, Priority p);

Selection plan_selection(const Mempool& pool, const DtsAttributes& attrs, double leaf_budget);

/// The selected transactions sorted by txid. Throws std::invalid_argument if leaf_budget <= 0.
std::vector<Transaction> select_transactions(const Mempool& pool, const DtsAttributes& attrs, double leaf_budget);

} // namespace edts
