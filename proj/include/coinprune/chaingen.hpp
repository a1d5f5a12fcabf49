#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "coinprune/chain.hpp"

namespace coinprune::chaingen {

/// Relative weights of the output script classes a generated transaction uses.
struct ClassMix {
    double p2pkh = 0.85;
    double p2sh = 0.08;
    double p2wpkh = 0.03;
    double p2wsh = 0.01;
    double p2pk = 0.01;
    double p2ms = 0.005;
    double nonstandard = 0.005;
    /// Zero-value OP_RETURN outputs drawn from the per-output mixture.
    double op_return = 0.01;

    double sum() const noexcept { return p2pkh + p2sh + p2wpkh + p2wsh + p2pk + p2ms + nonstandard + op_return; }
};

struct WorkloadProfile {
    std::uint32_t txs_per_block = 50;
    std::uint32_t max_inputs = 3;
    std::uint32_t min_outputs = 1;
    std::uint32_t max_outputs = 3;
    ClassMix mix;
    /// Fraction of transactions that carry one OP_RETURN output.
    double op_return_rate = 0.05;
    /// Chance that a given live output is spent in the next block.
    double spend_probability = 0.05;
    std::uint64_t fee = 1000;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument for inconsistent settings, including
    /// mixture weights that do not sum to 1.
    void validate() const;
};

/// Seeded source of valid blocks. Owns the keys of every output it creates and
/// spends from the live set using the toy signature scheme. Blocks are assumed
/// to be connected in the order they are produced.
class WorkloadGenerator {
public:
    WorkloadGenerator(WorkloadProfile profile, const chain::ChainParams& params);

    const chain::Block& genesis() const noexcept { return genesis_; }

    /// Builds and mines the block on top of `parent`. `coinbase_extra` is
    /// appended to the coinbase field after the height prefix.
    chain::Block next_block(const chain::PersistedHeaderRecord& parent, ByteSpan coinbase_extra = {});

    std::size_t wallet_size() const noexcept { return wallet_.size(); }

private:
    struct Owned {
        std::uint64_t amount = 0;
        // unlock = sig(signer)... [signers[0] if reveal_key] extra...
        std::vector<Bytes> signers;
        bool reveal_key = false;
        std::vector<Bytes> extra;
    };

    struct Output {
        chain::TxOutput out;
        Owned owned;
        bool op_return = false;
    };

    Output make_output(std::uint64_t amount);
    Bytes fresh_pubkey();
    Bytes build_unlock(const Owned& owned, const chain::OutPoint& op) const;
    void add_to_wallet(const chain::Transaction& tx, const Hash256& txid, std::vector<Owned> owned);

    WorkloadProfile profile_;
    chain::ChainParams params_;
    std::mt19937_64 rng_;
    chain::Block genesis_;
    std::map<chain::OutPoint, Owned> wallet_;
    std::vector<chain::OutPoint> pool_;
};

/// length >= 1 blocks starting at genesis.
std::vector<chain::Block> generate_chain(const WorkloadProfile& profile, std::uint32_t length,
                                         const chain::ChainParams& params = chain::ChainParams::defaults());

} // namespace coinprune::chaingen
