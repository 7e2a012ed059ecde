#include "edts/transaction.hpp"

#include <algorithm>
#include <string>

namespace edts {

Transaction Transaction::make(std::uint64_t serial, double amount, double fee, std::int64_t arrival_ms,
                              std::uint32_t size_bytes)
{
    if (size_bytes < kTxFieldBytes)
        throw std::invalid_argument("transaction size must be at least " + std::to_string(kTxFieldBytes) + " bytes");
    if (!(fee >= 0.0)) throw std::invalid_argument("transaction fee must be nonnegative");
    Transaction tx;
    tx.size_bytes = size_bytes;
    tx.serial = serial;
    tx.amount = amount;
    tx.fee = fee;
    tx.arrival_ms = arrival_ms;
    tx.txid = tx.compute_txid();
    return tx;
}

void Transaction::serialize_into(ByteWriter& out) const
{
    out.put_u32(kTxVersion);
    out.put_u32(size_bytes);
    out.put_u64(serial);
    out.put_f64(amount);
    out.put_f64(fee);
    out.put_i64(arrival_ms);
    out.put_zeros(size_bytes - kTxFieldBytes);
}

std::vector<std::uint8_t> Transaction::serialize() const
{
    std::vector<std::uint8_t> out;
    out.reserve(size_bytes);
    ByteWriter w(out);
    serialize_into(w);
    return out;
}

Hash256 Transaction::compute_txid() const
{
    return sha256d(serialize());
}

Transaction Transaction::deserialize(ByteReader& in)
{
    const std::size_t start = in.position();
    if (in.get_u32() != kTxVersion) throw MalformedBytes("transaction: unsupported version");
    Transaction tx;
    tx.size_bytes = in.get_u32();
    if (tx.size_bytes < kTxFieldBytes) throw MalformedBytes("transaction: size below field width");
    tx.serial = in.get_u64();
    tx.amount = in.get_f64();
    tx.fee = in.get_f64();
    tx.arrival_ms = in.get_i64();
    auto pad = in.get_span(tx.size_bytes - kTxFieldBytes);
    if (std::any_of(pad.begin(), pad.end(), [](std::uint8_t b) { return b != 0; }))
        throw MalformedBytes("transaction: nonzero padding");
    tx.txid = sha256d(in.data().subspan(start, tx.size_bytes));
    return tx;
}

Transaction TxRecord::materialize(double fee_fraction) const
{
    return Transaction::make(serial, amount, amount * fee_fraction, arrival_ms, size_bytes);
}

} // namespace edts
