#pragma once

#include "edts/hash.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edts {

/// Raised when a byte string cannot be decoded (truncated, bad magic, inconsistent counts).
class MalformedBytes : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Little-endian encoder appending to a caller-owned buffer.
class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void put_u8(std::uint8_t v) { out_.push_back(v); }
    void put_u32(std::uint32_t v) { put_le(v, 4); }
    void put_u64(std::uint64_t v) { put_le(v, 8); }
    void put_i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v), 8); }
    void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
    void put_hash(const Hash256& h) { put_bytes(h.bytes); }
    void put_bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void put_zeros(std::size_t n) { out_.insert(out_.end(), n, 0); }

    std::size_t size() const { return out_.size(); }

private:
    void put_le(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t get_u8() { return static_cast<std::uint8_t>(get_le(1)); }
    std::uint32_t get_u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t get_u64() { return get_le(8); }
    std::int64_t get_i64() { return static_cast<std::int64_t>(get_le(8)); }
    double get_f64() { return std::bit_cast<double>(get_le(8)); }

    Hash256 get_hash()
    {
        Hash256 h;
        auto b = get_span(32);
        std::memcpy(h.bytes.data(), b.data(), 32);
        return h;
    }

    std::span<const std::uint8_t> get_span(std::size_t n)
    {
        require(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }
    std::span<const std::uint8_t> data() const { return data_; }

private:
    void require(std::size_t n) const
    {
        if (n > data_.size() - pos_)
            throw MalformedBytes("truncated input: need " + std::to_string(n) + " bytes at offset " +
                                 std::to_string(pos_) + ", have " + std::to_string(data_.size() - pos_));
    }

    std::uint64_t get_le(int n)
    {
        auto b = get_span(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

} // namespace edts
