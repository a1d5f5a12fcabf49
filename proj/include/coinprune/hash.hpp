#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "coinprune/bytes.hpp"

namespace coinprune {

/// Fixed-size digest with value semantics and lexicographic ordering over
/// its bytes in storage order.
template <std::size_t N>
struct Digest {
    std::array<std::uint8_t, N> bytes{};

    static constexpr std::size_t size() noexcept { return N; }

    const std::uint8_t* data() const noexcept { return bytes.data(); }
    std::uint8_t* data() noexcept { return bytes.data(); }
    ByteSpan span() const noexcept { return ByteSpan(bytes.data(), N); }

    bool is_null() const noexcept
    {
        for (auto b : bytes)
            if (b != 0) return false;
        return true;
    }

    std::string hex() const { return to_hex(span()); }

    /// Throws std::invalid_argument when `data` is not exactly N bytes.
    static Digest from_span(ByteSpan data)
    {
        if (data.size() != N)
            throw std::invalid_argument("digest must be " + std::to_string(N) + " bytes, got " +
                                        std::to_string(data.size()));
        Digest d;
        std::copy(data.begin(), data.end(), d.bytes.begin());
        return d;
    }

    static Digest from_hex(std::string_view hex) { return from_span(coinprune::from_hex(hex)); }

    static Digest filled(std::uint8_t v)
    {
        Digest d;
        d.bytes.fill(v);
        return d;
    }

    auto operator<=>(const Digest&) const = default;
    bool operator==(const Digest&) const = default;
};

using Hash256 = Digest<32>;
using Hash160 = Digest<20>;

/// Single SHA-256.
Hash256 sha256(ByteSpan data);

/// SHA-256 applied twice; the block, transaction and snapshot digest.
Hash256 hash256(ByteSpan data);

/// 20-byte commitment standing in for Bitcoin's RIPEMD160(SHA256(x)):
/// single SHA-256 truncated to its first 20 bytes.
Hash160 hash160(ByteSpan data);

/// hash256 over the concatenation of two digests.
Hash256 hash256_concat(const Hash256& a, const Hash256& b);

struct DigestHasher {
    template <std::size_t N>
    std::size_t operator()(const Digest<N>& d) const noexcept
    {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(std::size_t) && i < N; ++i)
            h |= static_cast<std::size_t>(d.bytes[i]) << (8 * i);
        return h;
    }
};

} // namespace coinprune
