#include "edts/hash.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <memory>
#include <stdexcept>

namespace edts {

namespace {

struct CtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};

EVP_MD_CTX* thread_context()
{
    thread_local std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx{EVP_MD_CTX_new()};
    if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
    return ctx.get();
}

const EVP_MD* sha256_md()
{
    static const EVP_MD* md = EVP_MD_fetch(nullptr, "SHA256", nullptr);
    if (!md) throw std::runtime_error("SHA-256 unavailable");
    return md;
}

void digest(const std::uint8_t* data, std::size_t len, std::uint8_t* out)
{
    EVP_MD_CTX* ctx = thread_context();
    unsigned int out_len = 0;
    if (EVP_DigestInit_ex(ctx, sha256_md(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 ||
        EVP_DigestFinal_ex(ctx, out, &out_len) != 1 || out_len != 32) {
        throw std::runtime_error("SHA-256 digest failed");
    }
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

std::string Hash256::hex() const
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

Hash256 Hash256::from_hex(std::string_view hex)
{
    if (hex.size() != 64) throw std::invalid_argument("hash hex must be 64 characters");
    Hash256 h;
    for (std::size_t i = 0; i < 32; ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit in hash");
        h.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return h;
}

std::uint64_t Hash256::prefix64() const noexcept
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
}

bool Hash256::is_null() const noexcept
{
    for (auto b : bytes)
        if (b != 0) return false;
    return true;
}

Hash256 sha256(std::span<const std::uint8_t> data)
{
    Hash256 h;
    digest(data.data(), data.size(), h.bytes.data());
    return h;
}

Hash256 sha256d(std::span<const std::uint8_t> data)
{
    Hash256 first = sha256(data);
    return sha256(first.bytes);
}

Hash256 hash_pair(const Hash256& left, const Hash256& right)
{
    std::array<std::uint8_t, 64> buf;
    std::memcpy(buf.data(), left.bytes.data(), 32);
    std::memcpy(buf.data() + 32, right.bytes.data(), 32);
    return sha256d(buf);
}

} // namespace edts
