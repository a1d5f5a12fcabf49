#include "coinprune/chaingen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coinprune::chaingen {

using chain::Block;
using chain::OutPoint;
using chain::Transaction;
using chain::TxInput;
using chain::TxOutput;

void WorkloadProfile::validate() const
{
    if (std::abs(mix.sum() - 1.0) > 1e-9) throw std::invalid_argument("script-class mixture weights must sum to 1");
    if (min_outputs < 1 || max_outputs < min_outputs) throw std::invalid_argument("invalid output count range");
    if (max_inputs < 1) throw std::invalid_argument("max_inputs must be at least 1");
    if (!(op_return_rate >= 0.0 && op_return_rate <= 1.0)) throw std::invalid_argument("op_return_rate outside [0, 1]");
    if (!(spend_probability >= 0.0 && spend_probability <= 1.0))
        throw std::invalid_argument("spend_probability outside [0, 1]");
}

WorkloadGenerator::WorkloadGenerator(WorkloadProfile profile, const chain::ChainParams& params)
    : profile_(std::move(profile)), params_(params), rng_(profile_.seed), genesis_(chain::make_genesis_block(params))
{
    profile_.validate();
    Owned owner;
    owner.amount = genesis_.txs[0].outputs[0].amount;
    owner.signers = {to_bytes("genesis-owner")};
    owner.reveal_key = true;
    add_to_wallet(genesis_.txs[0], genesis_.txs[0].txid(), {owner});
}

Bytes WorkloadGenerator::fresh_pubkey()
{
    Bytes key(33);
    key[0] = (rng_() & 1) ? 0x03 : 0x02;
    for (std::size_t i = 1; i < key.size(); i += 8) {
        const auto r = rng_();
        for (std::size_t j = 0; j < 8 && i + j < key.size(); ++j) key[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
    }
    return key;
}

WorkloadGenerator::Output WorkloadGenerator::make_output(std::uint64_t amount)
{
    const auto& m = profile_.mix;
    const double weights[] = {m.p2pkh, m.p2sh, m.p2wpkh, m.p2wsh, m.p2pk, m.p2ms, m.nonstandard, m.op_return};
    std::discrete_distribution<int> pick(std::begin(weights), std::end(weights));

    Output o;
    o.out.amount = amount;
    o.owned.amount = amount;
    const auto key = fresh_pubkey();
    switch (pick(rng_)) {
    case 0:
        o.out.script = scripts::p2pkh_script(hash160(key));
        o.owned.signers = {key};
        o.owned.reveal_key = true;
        break;
    case 1: {
        const auto redeem = scripts::p2pk_script(key);
        o.out.script = scripts::p2sh_script(hash160(redeem));
        o.owned.signers = {key};
        o.owned.extra = {redeem};
        break;
    }
    case 2:
        o.out.script = scripts::p2wpkh_script(hash160(key));
        o.owned.signers = {key};
        o.owned.reveal_key = true;
        break;
    case 3: {
        const auto witness_script = scripts::p2pk_script(key);
        o.out.script = scripts::p2wsh_script(sha256(witness_script));
        o.owned.signers = {key};
        o.owned.extra = {witness_script};
        break;
    }
    case 4: {
        const auto variant = rng_() % 2;
        if (variant == 0) {
            o.out.script = scripts::p2pk_script(key);
            o.owned.signers = {key};
        } else {
            Hash256 x;
            std::copy(key.begin() + 1, key.end(), x.bytes.begin());
            const auto full = scripts::toy_uncompressed_pubkey(x, (rng_() & 1) != 0);
            o.out.script = scripts::p2pk_script(full);
            o.owned.signers = {full};
        }
        break;
    }
    case 5: {
        std::vector<Bytes> keys{key, fresh_pubkey(), fresh_pubkey()};
        const int required = 1 + static_cast<int>(rng_() % 2);
        o.out.script = scripts::p2ms_script(required, keys);
        o.owned.signers.assign(keys.begin(), keys.begin() + required);
        break;
    }
    case 7: {
        std::uniform_int_distribution<std::size_t> len(1, chain::kMaxOpReturnPayload);
        Bytes payload(len(rng_));
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng_());
        o.out.amount = 0;
        o.owned.amount = 0;
        o.out.script = scripts::op_return_script(payload);
        o.op_return = true;
        break;
    }
    default: {
        // Hash lock: HASH256 <h> EQUAL, spent by revealing the preimage.
        Bytes preimage(key.begin(), key.end());
        const auto h = hash256(preimage);
        Bytes s{scripts::op::HASH256};
        scripts::append_push(s, h.span());
        s.push_back(scripts::op::EQUAL);
        o.out.script = std::move(s);
        o.owned.extra = {preimage};
        break;
    }
    }
    return o;
}

Bytes WorkloadGenerator::build_unlock(const Owned& owned, const OutPoint& op) const
{
    const scripts::SpendContext ctx{op.txid, op.vout};
    std::vector<Bytes> items;
    for (const auto& k : owned.signers) items.push_back(scripts::toy_signature(k, ctx));
    if (owned.reveal_key) items.push_back(owned.signers.front());
    for (const auto& e : owned.extra) items.push_back(e);
    return scripts::push_sequence(items);
}

void WorkloadGenerator::add_to_wallet(const Transaction& tx, const Hash256& txid, std::vector<Owned> owned)
{
    for (std::uint32_t v = 0; v < tx.outputs.size() && v < owned.size(); ++v) {
        if (owned[v].signers.empty() && owned[v].extra.empty()) continue; // OP_RETURN
        const OutPoint op{txid, v};
        wallet_.emplace(op, std::move(owned[v]));
        pool_.push_back(op);
    }
}

Block WorkloadGenerator::next_block(const chain::PersistedHeaderRecord& parent, ByteSpan coinbase_extra)
{
    const std::uint32_t height = parent.height + 1;

    std::uint64_t spends = 0;
    if (!pool_.empty() && profile_.spend_probability > 0.0) {
        std::binomial_distribution<std::uint64_t> draw(pool_.size(), profile_.spend_probability);
        spends = draw(rng_);
    }
    spends = std::min<std::uint64_t>(spends, static_cast<std::uint64_t>(profile_.txs_per_block) * profile_.max_inputs);

    std::vector<Transaction> txs;
    std::vector<std::vector<Owned>> owned_per_tx;
    std::uint64_t fees = 0;

    while (spends > 0 && txs.size() < profile_.txs_per_block && !pool_.empty()) {
        std::uniform_int_distribution<std::uint64_t> in_count(1, profile_.max_inputs);
        const auto n_in = std::min<std::uint64_t>({in_count(rng_), spends, pool_.size()});
        spends -= n_in;

        Transaction tx;
        std::uint64_t in_sum = 0;
        for (std::uint64_t i = 0; i < n_in; ++i) {
            std::uniform_int_distribution<std::size_t> idx(0, pool_.size() - 1);
            const auto at = idx(rng_);
            const OutPoint op = pool_[at];
            pool_[at] = pool_.back();
            pool_.pop_back();
            auto node = wallet_.extract(op);
            in_sum += node.mapped().amount;
            tx.inputs.push_back(TxInput{op, build_unlock(node.mapped(), op)});
        }

        const std::uint64_t fee = std::min(profile_.fee, in_sum);
        std::uint64_t available = in_sum - fee;
        fees += fee;

        std::uniform_int_distribution<std::uint32_t> out_count(profile_.min_outputs, profile_.max_outputs);
        std::uint32_t n_out = out_count(rng_);
        if (available < n_out) n_out = static_cast<std::uint32_t>(std::max<std::uint64_t>(available, 1));

        std::vector<Owned> owned;
        for (std::uint32_t o = 0; o < n_out; ++o) {
            std::uint64_t amount = available;
            if (o + 1 < n_out && available > 0) {
                std::uniform_int_distribution<std::uint64_t> split(available / 4 + 1, available / 2 + 1);
                amount = std::min(available, split(rng_));
            }
            auto out = make_output(amount);
            if (!out.op_return) available -= amount;
            tx.outputs.push_back(std::move(out.out));
            owned.push_back(std::move(out.owned));
        }
        // Whatever an OP_RETURN draw left unassigned goes to the miner.
        fees += available;
        if (std::bernoulli_distribution(profile_.op_return_rate)(rng_)) {
            std::uniform_int_distribution<std::size_t> len(1, chain::kMaxOpReturnPayload);
            Bytes payload(len(rng_));
            for (auto& b : payload) b = static_cast<std::uint8_t>(rng_());
            tx.outputs.push_back(TxOutput{0, scripts::op_return_script(payload)});
            owned.emplace_back();
        }
        txs.push_back(std::move(tx));
        owned_per_tx.push_back(std::move(owned));
    }

    Bytes cb_data = chain::coinbase_height_prefix(height);
    const auto room = chain::kMaxCoinbaseData - cb_data.size();
    if (coinbase_extra.size() > room) throw std::invalid_argument("coinbase extra data exceeds the coinbase field");
    cb_data.insert(cb_data.end(), coinbase_extra.begin(), coinbase_extra.end());

    // The reward always goes to a fresh P2PKH key.
    const auto key = fresh_pubkey();
    const Owned payout{params_.subsidy + fees, {key}, true, {}};

    Block b;
    b.txs.push_back(
        Transaction::coinbase(std::move(cb_data), {TxOutput{payout.amount, scripts::p2pkh_script(hash160(key))}}));
    for (auto& tx : txs) b.txs.push_back(std::move(tx));

    const auto txids = b.txids();
    b.header.version = 1;
    b.header.prev_hash = parent.block_id;
    b.header.merkle_root = chain::compute_merkle_root(txids);
    b.header.timestamp = parent.timestamp + params_.block_spacing;
    b.header.bits = params_.pow_bits;
    b.header.nonce = static_cast<std::uint32_t>(rng_());
    chain::mine_header(b.header);

    add_to_wallet(b.txs[0], txids[0], {payout});
    for (std::size_t t = 0; t < owned_per_tx.size(); ++t)
        add_to_wallet(b.txs[t + 1], txids[t + 1], std::move(owned_per_tx[t]));
    return b;
}

std::vector<Block> generate_chain(const WorkloadProfile& profile, std::uint32_t length, const chain::ChainParams& params)
{
    if (length < 1) throw std::invalid_argument("chain length must be at least 1");
    WorkloadGenerator gen(profile, params);
    std::vector<Block> blocks;
    blocks.reserve(length);
    blocks.push_back(gen.genesis());
    auto record = chain::make_record(gen.genesis().header, 1, nullptr);
    for (std::uint32_t h = 1; h < length; ++h) {
        blocks.push_back(gen.next_block(record));
        record = chain::make_record(blocks.back().header, static_cast<std::uint32_t>(blocks.back().txs.size()), &record);
    }
    return blocks;
}

} // namespace coinprune::chaingen
