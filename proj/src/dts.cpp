#include "edts/dts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace edts {

const char* to_string(Priority p)
{
    return p == Priority::time_based ? "time" : "fee";
}

Priority parse_priority(const std::string& s)
{
    if (s == "time" || s == "0" || s == "time_based" || s == "TimeBased") return Priority::time_based;
    if (s == "fee" || s == "1" || s == "fee_based" || s == "FeeBased") return Priority::fee_based;
    throw ConfigError("a2 must be 'time' or 'fee', got '" + s + "'");
}

void DtsAttributes::validate() const
{
    if (a1_mempool_size < 1) throw std::domain_error("a1 (mempool size) must be at least 1");
    if (!(a3_fee_percentage > 0.0 && a3_fee_percentage <= 1.0)) throw std::domain_error("a3 (fee percentage) must lie in (0, 1]");
    if (a4_designated_small_space && !(a5_small_fee_threshold > 0.0))
        throw std::domain_error("a5 (small-fee threshold) must be positive");
    if (!(a7_max_leaf_space >= 1.0)) throw std::domain_error("a7 (max leaf space) must be at least 1");
    if (!std::isfinite(a8_scale_mu)) throw std::domain_error("a8 (scale) must be finite");
    if (!(a9_shape_sigma > 0.0) || !std::isfinite(a9_shape_sigma)) throw std::domain_error("a9 (shape) must be positive");
}

void DtsAttributes::load(const Config& cfg)
{
    a1_mempool_size = static_cast<std::uint64_t>(cfg.get_int("a1", static_cast<std::int64_t>(a1_mempool_size)));
    if (auto v = cfg.find("a2")) a2_priority = parse_priority(*v);
    a3_fee_percentage = cfg.get_double("a3", a3_fee_percentage);
    a4_designated_small_space = cfg.get_bool("a4", a4_designated_small_space);
    a5_small_fee_threshold = cfg.get_double("a5", a5_small_fee_threshold);
    a6_small_fee_count_threshold =
        static_cast<std::uint64_t>(cfg.get_int("a6", static_cast<std::int64_t>(a6_small_fee_count_threshold)));
    a7_max_leaf_space = cfg.get_double("a7", a7_max_leaf_space);
    a8_scale_mu = cfg.get_double("a8", a8_scale_mu);
    a9_shape_sigma = cfg.get_double("a9", a9_shape_sigma);
}

void DtsAttributes::store(Config& cfg) const
{
    auto num = format_double;
    cfg.set("a1", std::to_string(a1_mempool_size));
    cfg.set("a2", to_string(a2_priority));
    cfg.set("a3", num(a3_fee_percentage));
    cfg.set("a4", a4_designated_small_space ? "true" : "false");
    cfg.set("a5", num(a5_small_fee_threshold));
    cfg.set("a6", std::to_string(a6_small_fee_count_threshold));
    cfg.set("a7", num(a7_max_leaf_space));
    cfg.set("a8", num(a8_scale_mu));
    cfg.set("a9", num(a9_shape_sigma));
}

double lognormal_cdf(double x, double mu, double sigma)
{
    if (!(x > 0.0)) throw std::domain_error("lognormal_cdf: x must be positive");
    if (!(sigma > 0.0)) throw std::domain_error("lognormal_cdf: sigma must be positive");
    // erfc form keeps precision in the lower tail
    return 0.5 * std::erfc(-(std::log(x) - mu) / (sigma * std::numbers::sqrt2));
}

double leaf_space(double fee, const DtsAttributes& attrs)
{
    return lognormal_cdf(fee, attrs.a8_scale_mu, attrs.a9_shape_sigma) * attrs.a7_max_leaf_space;
}

double leaf_space(const Transaction& tx, const DtsAttributes& attrs)
{
    return leaf_space(tx.fee, attrs);
}

bool Mempool::add(const Transaction& tx)
{
    if (full()) return false;
    return txs_.emplace(tx.txid, tx).second;
}

bool Mempool::erase(const Hash256& txid)
{
    return txs_.erase(txid) != 0;
}

const Transaction* Mempool::find(const Hash256& txid) const
{
    auto it = txs_.find(txid);
    return it == txs_.end() ? nullptr : &it->second;
}

std::vector<Transaction> Selection::sorted_by_txid() const
{
    std::vector<Transaction> out = admitted;
    std::sort(out.begin(), out.end(), [](const Transaction& a, const Transaction& b) { return a.txid < b.txid; });
    return out;
}

bool precedes(const Transaction& a, const Transaction& b, Priority p)
{
    if (p == Priority::time_based) {
        if (a.arrival_ms != b.arrival_ms) return a.arrival_ms < b.arrival_ms;
    } else {
        if (a.fee != b.fee) return a.fee > b.fee;
    }
    return a.txid < b.txid;
}

Selection plan_selection(const Mempool& pool, const DtsAttributes& attrs, double leaf_budget)
{
    if (!(leaf_budget > 0.0)) throw std::invalid_argument("select_transactions: leaf budget must be positive");

    Selection sel;
    sel.leaf_budget = leaf_budget;

    std::vector<const Transaction*> main;
    std::vector<const Transaction*> small;
    main.reserve(pool.size());
    const bool reserve = attrs.a4_designated_small_space;
    for (const auto& [id, tx] : pool) {
        if (reserve && tx.fee < attrs.a5_small_fee_threshold)
            small.push_back(&tx);
        else
            main.push_back(&tx);
    }
    auto order = [p = attrs.a2_priority](const Transaction* a, const Transaction* b) { return precedes(*a, *b, p); };
    std::sort(main.begin(), main.end(), order);
    std::sort(small.begin(), small.end(), order);

    auto admit = [&](const Transaction* tx, double leaf) {
        sel.admitted.push_back(*tx);
        sel.leaves.push_back(leaf);
        sel.leaf_used += leaf;
    };

    if (reserve) {
        sel.reserve_budget = std::min(
            static_cast<double>(attrs.a6_small_fee_count_threshold) * leaf_space(attrs.a5_small_fee_threshold, attrs),
            leaf_budget);
        for (const Transaction* tx : small) {
            if (sel.small_count >= attrs.a6_small_fee_count_threshold) break;
            double leaf = leaf_space(*tx, attrs);
            if (sel.reserve_used + leaf > sel.reserve_budget || sel.leaf_used + leaf > leaf_budget) break;
            admit(tx, leaf);
            sel.reserve_used += leaf;
            ++sel.small_count;
        }
    }

    const double main_budget = leaf_budget - sel.reserve_budget;
    double main_used = 0.0;
    for (const Transaction* tx : main) {
        double leaf = leaf_space(*tx, attrs);
        if (main_used + leaf > main_budget || sel.leaf_used + leaf > leaf_budget) {
            sel.exhausted = true;
            sel.next_leaf = leaf;
            break;
        }
        admit(tx, leaf);
        main_used += leaf;
    }
    return sel;
}

std::vector<Transaction> select_transactions(const Mempool& pool, const DtsAttributes& attrs, double leaf_budget)
{
    return plan_selection(pool, attrs, leaf_budget).sorted_by_txid();
}

} // namespace edts
