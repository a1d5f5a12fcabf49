#include "coinprune/hash.hpp"

#include <openssl/evp.h>

#include <memory>
#include <stdexcept>

namespace coinprune {

namespace {

struct MdDeleter {
    void operator()(EVP_MD* md) const { EVP_MD_free(md); }
};
struct CtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

// EVP_MD_fetch is expensive in OpenSSL 3; keep one fetched digest and one
// context per thread.
class Sha256Engine {
public:
    Sha256Engine() : md_(EVP_MD_fetch(nullptr, "SHA256", nullptr)), ctx_(EVP_MD_CTX_new())
    {
        if (!md_ || !ctx_) throw std::runtime_error("OpenSSL SHA-256 unavailable");
    }

    Hash256 digest(ByteSpan a, ByteSpan b = {})
    {
        Hash256 out;
        unsigned int len = 0;
        if (EVP_DigestInit_ex2(ctx_.get(), md_.get(), nullptr) != 1 ||
            EVP_DigestUpdate(ctx_.get(), a.data(), a.size()) != 1 ||
            (!b.empty() && EVP_DigestUpdate(ctx_.get(), b.data(), b.size()) != 1) ||
            EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != 32)
            throw std::runtime_error("SHA-256 computation failed");
        return out;
    }

private:
    std::unique_ptr<EVP_MD, MdDeleter> md_;
    std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx_;
};

Sha256Engine& engine()
{
    thread_local Sha256Engine e;
    return e;
}

} // namespace

Hash256 sha256(ByteSpan data) { return engine().digest(data); }

Hash256 hash256(ByteSpan data)
{
    auto& e = engine();
    const auto first = e.digest(data);
    return e.digest(first.span());
}

Hash160 hash160(ByteSpan data)
{
    const auto full = sha256(data);
    Hash160 out;
    std::copy_n(full.bytes.begin(), 20, out.bytes.begin());
    return out;
}

Hash256 hash256_concat(const Hash256& a, const Hash256& b)
{
    auto& e = engine();
    const auto first = e.digest(a.span(), b.span());
    return e.digest(first.span());
}

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
} // namespace

std::string to_hex(ByteSpan data)
{
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex)
{
    if (hex.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = hex_value(hex[i]);
        const int lo = hex_value(hex[i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex character");
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

} // namespace coinprune
