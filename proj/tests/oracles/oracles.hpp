#pragma once

// Reference implementations used by the tests. They share nothing with the
// library except the digest primitives (checked separately against vectors
// produced by Python's hashlib) and the plain data structs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coinprune/chain.hpp"
#include "coinprune/hash.hpp"

namespace oracle {

using coinprune::Bytes;
using coinprune::Hash256;

inline void put_le(Bytes& out, std::uint64_t v, int width)
{
    for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put(Bytes& out, const Bytes& data) { out.insert(out.end(), data.begin(), data.end()); }

inline Bytes tx_bytes(const coinprune::chain::Transaction& tx)
{
    Bytes out;
    put_le(out, tx.inputs.size(), 4);
    for (const auto& in : tx.inputs) {
        out.insert(out.end(), in.prevout.txid.bytes.begin(), in.prevout.txid.bytes.end());
        put_le(out, in.prevout.vout, 4);
        put_le(out, in.unlock.size(), 4);
        put(out, in.unlock);
    }
    put_le(out, tx.outputs.size(), 4);
    for (const auto& o : tx.outputs) {
        put_le(out, o.amount, 8);
        put_le(out, o.script.size(), 4);
        put(out, o.script);
    }
    return out;
}

inline Hash256 txid(const coinprune::chain::Transaction& tx) { return coinprune::hash256(tx_bytes(tx)); }

/// Tree built top-down by recursion instead of layer by layer.
inline Hash256 merkle_root(const std::vector<Hash256>& leaves)
{
    if (leaves.size() == 1) return leaves[0];
    std::vector<Hash256> padded = leaves;
    if (padded.size() % 2) padded.push_back(padded.back());
    std::vector<Hash256> up;
    for (std::size_t i = 0; i < padded.size(); i += 2) {
        Bytes cat(padded[i].bytes.begin(), padded[i].bytes.end());
        cat.insert(cat.end(), padded[i + 1].bytes.begin(), padded[i + 1].bytes.end());
        up.push_back(coinprune::hash256(cat));
    }
    return merkle_root(up);
}

inline bool toy_y_matches(const std::uint8_t* key65)
{
    Bytes seed{'t', 'o', 'y', '-', 'c', 'u', 'r', 'v', 'e', '-', 'y'};
    seed.insert(seed.end(), key65 + 1, key65 + 33);
    auto y = coinprune::sha256(seed);
    y.bytes[31] = static_cast<std::uint8_t>((y.bytes[31] & 0xfe) | (key65[64] & 1));
    return std::equal(y.bytes.begin(), y.bytes.end(), key65 + 33);
}

struct Compressed {
    std::uint8_t code = 0;
    Bytes payload;
};

/// Stored form of an output script, written straight from the byte patterns.
inline Compressed compress(const Bytes& s, bool obfuscate)
{
    const auto sub = [&](std::size_t a, std::size_t n) { return Bytes(s.begin() + a, s.begin() + a + n); };
    const auto commit = [](const Bytes& v) {
        const auto h = coinprune::hash256(v);
        return Bytes(h.bytes.begin(), h.bytes.end());
    };
    const std::size_t n = s.size();
    if (n == 25 && s[0] == 0x76 && s[1] == 0xa9 && s[2] == 20 && s[23] == 0x88 && s[24] == 0xac)
        return obfuscate ? Compressed{6, commit(sub(3, 20))} : Compressed{0, sub(3, 20)};
    if (n == 23 && s[0] == 0xa9 && s[1] == 20 && s[22] == 0x87)
        return obfuscate ? Compressed{7, commit(sub(2, 20))} : Compressed{1, sub(2, 20)};
    if (n == 35 && s[0] == 33 && s[34] == 0xac && (s[1] == 2 || s[1] == 3)) return {s[1], sub(2, 32)};
    if (n == 67 && s[0] == 65 && s[1] == 4 && s[66] == 0xac && toy_y_matches(s.data() + 1))
        return {static_cast<std::uint8_t>(4 | (s[65] & 1)), sub(2, 32)};
    if (obfuscate && n == 22 && s[0] == 0 && s[1] == 20) return {8, commit(sub(2, 20))};
    if (obfuscate && n == 34 && s[0] == 0 && s[1] == 32) return {9, commit(sub(2, 32))};
    return {static_cast<std::uint8_t>(n + 10), s};
}

struct Coin {
    std::uint64_t amount = 0;
    std::uint32_t height = 0;
    bool coinbase = false;
    Compressed script;
};

/// UTXO set kept as a map from (txid bytes, vout) to coins. Spent outputs are
/// removed by set difference once all of a block's transactions are seen.
class Replayer {
public:
    explicit Replayer(bool obfuscate) : obfuscate_(obfuscate) {}

    void connect(const coinprune::chain::Block& b, std::uint32_t height)
    {
        std::vector<Key> spent;
        std::map<Key, Coin> created;
        for (std::size_t t = 0; t < b.txs.size(); ++t) {
            const auto& tx = b.txs[t];
            const auto id = txid(tx);
            if (t != 0)
                for (const auto& in : tx.inputs) spent.push_back({in.prevout.txid.bytes, in.prevout.vout});
            for (std::uint32_t v = 0; v < tx.outputs.size(); ++v) {
                const auto& s = tx.outputs[v].script;
                if (!s.empty() && s[0] == 0x6a) continue;
                created[{id.bytes, v}] = Coin{tx.outputs[v].amount, height, t == 0, compress(s, obfuscate_)};
            }
        }
        for (auto& [k, c] : created) coins_[k] = std::move(c);
        for (const auto& k : spent) coins_.erase(k);
    }

    /// txid(32) vout(4) amount(8) height(4) coinbase(1) code(1) payload, sorted.
    Bytes stream() const
    {
        Bytes out;
        for (const auto& [k, c] : coins_) {
            out.insert(out.end(), k.first.begin(), k.first.end());
            put_le(out, k.second, 4);
            put_le(out, c.amount, 8);
            put_le(out, c.height, 4);
            out.push_back(c.coinbase ? 1 : 0);
            out.push_back(c.script.code);
            put(out, c.script.payload);
        }
        return out;
    }

    std::size_t size() const { return coins_.size(); }

private:
    using Key = std::pair<std::array<std::uint8_t, 32>, std::uint32_t>;
    bool obfuscate_;
    std::map<Key, Coin> coins_;
};

inline double log_choose(unsigned n, unsigned k)
{
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double binom_pmf(unsigned n, unsigned k, double p)
{
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    return std::exp(log_choose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p));
}

struct Exact {
    double correct = 0;
    double adversary = 0;
    double skipped = 0;
};

/// Outcome probabilities of one pulse: per block, bogus tag with probability
/// pa, honest with ph, nothing otherwise; trinomial summed in full.
inline Exact exact_outcome(unsigned delta_r, unsigned k, double pa, double ph)
{
    Exact e;
    const double pn = 1.0 - pa - ph;
    for (unsigned a = 0; a <= delta_r; ++a)
        for (unsigned h = 0; a + h <= delta_r; ++h) {
            const unsigned z = delta_r - a - h;
            double lp = std::lgamma(delta_r + 1.0) - std::lgamma(a + 1.0) - std::lgamma(h + 1.0) - std::lgamma(z + 1.0);
            const auto term = [&](unsigned c, double p) {
                if (c == 0) return 0.0;
                return p > 0 ? c * std::log(p) : -INFINITY;
            };
            lp += term(a, pa) + term(h, ph) + term(z, pn);
            const double p = std::exp(lp);
            if (a > h && a >= k)
                e.adversary += p;
            else if (h > a && h >= k)
                e.correct += p;
            else
                e.skipped += p;
        }
    return e;
}

} // namespace oracle
