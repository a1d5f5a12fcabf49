#include "coinprune/chain.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <unordered_map>

namespace coinprune::chain {

// ---------------------------------------------------------------------------
// Serialization

void BlockHeader::serialize(ByteWriter& w) const
{
    w.u32(version);
    w.raw(prev_hash.span());
    w.raw(merkle_root.span());
    w.u32(timestamp);
    w.u32(bits);
    w.u32(nonce);
}

Bytes BlockHeader::serialized() const
{
    ByteWriter w(kSize);
    serialize(w);
    return w.take();
}

BlockHeader BlockHeader::parse(ByteReader& r)
{
    BlockHeader h;
    h.version = r.u32();
    h.prev_hash = Hash256::from_span(r.raw(32));
    h.merkle_root = Hash256::from_span(r.raw(32));
    h.timestamp = r.u32();
    h.bits = r.u32();
    h.nonce = r.u32();
    return h;
}

Hash256 BlockHeader::id() const { return hash256(serialized()); }

void Transaction::serialize(ByteWriter& w) const
{
    w.u32(static_cast<std::uint32_t>(inputs.size()));
    for (const auto& in : inputs) {
        w.raw(in.prevout.txid.span());
        w.u32(in.prevout.vout);
        w.blob(in.unlock);
    }
    w.u32(static_cast<std::uint32_t>(outputs.size()));
    for (const auto& out : outputs) {
        w.u64(out.amount);
        w.blob(out.script);
    }
}

Bytes Transaction::serialized() const
{
    ByteWriter w(serialized_size());
    serialize(w);
    return w.take();
}

std::size_t Transaction::serialized_size() const
{
    std::size_t n = 8;
    for (const auto& in : inputs) n += 40 + in.unlock.size();
    for (const auto& out : outputs) n += 12 + out.script.size();
    return n;
}

Transaction Transaction::parse(ByteReader& r)
{
    Transaction tx;
    const auto n_in = r.u32();
    if (n_in > r.remaining() / 40) throw DecodeError("input count exceeds stream", r.offset());
    tx.inputs.resize(n_in);
    for (auto& in : tx.inputs) {
        in.prevout.txid = Hash256::from_span(r.raw(32));
        in.prevout.vout = r.u32();
        const auto unlock = r.blob();
        in.unlock.assign(unlock.begin(), unlock.end());
    }
    const auto n_out = r.u32();
    if (n_out > r.remaining() / 12) throw DecodeError("output count exceeds stream", r.offset());
    tx.outputs.resize(n_out);
    for (auto& out : tx.outputs) {
        out.amount = r.u64();
        const auto script = r.blob();
        out.script.assign(script.begin(), script.end());
    }
    return tx;
}

Hash256 Transaction::txid() const { return hash256(serialized()); }

Transaction Transaction::coinbase(Bytes coinbase_data, std::vector<TxOutput> outputs)
{
    Transaction tx;
    tx.inputs.push_back(TxInput{OutPoint{Hash256{}, OutPoint::kNullIndex}, std::move(coinbase_data)});
    tx.outputs = std::move(outputs);
    return tx;
}

void Block::serialize(ByteWriter& w) const
{
    header.serialize(w);
    w.u32(static_cast<std::uint32_t>(txs.size()));
    for (const auto& tx : txs) tx.serialize(w);
}

Bytes Block::serialized() const
{
    ByteWriter w(serialized_size());
    serialize(w);
    return w.take();
}

std::size_t Block::serialized_size() const
{
    std::size_t n = BlockHeader::kSize + 4;
    for (const auto& tx : txs) n += tx.serialized_size();
    return n;
}

Block Block::parse(ByteReader& r)
{
    Block b;
    b.header = BlockHeader::parse(r);
    const auto n = r.u32();
    if (n > r.remaining() / 8) throw DecodeError("transaction count exceeds stream", r.offset());
    b.txs.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) b.txs.push_back(Transaction::parse(r));
    return b;
}

std::vector<Hash256> Block::txids() const
{
    std::vector<Hash256> ids;
    ids.reserve(txs.size());
    for (const auto& tx : txs) ids.push_back(tx.txid());
    return ids;
}

std::uint64_t UtxoSet::total_amount() const
{
    std::uint64_t sum = 0;
    for (const auto& [op, e] : map_) sum += e.amount;
    return sum;
}

void PersistedHeaderRecord::serialize(ByteWriter& w) const
{
    w.raw(block_id.span());
    header.serialize(w);
    w.u32(height);
    w.u128(cumulative_work);
    w.u32(tx_count);
    w.u32(timestamp);
}

PersistedHeaderRecord PersistedHeaderRecord::parse(ByteReader& r)
{
    PersistedHeaderRecord rec;
    rec.block_id = Hash256::from_span(r.raw(32));
    rec.header = BlockHeader::parse(r);
    rec.height = r.u32();
    rec.cumulative_work = r.u128();
    rec.tx_count = r.u32();
    rec.timestamp = r.u32();
    return rec;
}

// ---------------------------------------------------------------------------
// Proof of work

namespace {

// Minimal unsigned 256-bit arithmetic, little-endian limbs.
struct U256 {
    std::uint64_t limb[4] = {0, 0, 0, 0};

    static U256 from_le_bytes(ByteSpan b)
    {
        U256 v;
        for (std::size_t i = 0; i < 32; ++i) v.limb[i / 8] |= static_cast<std::uint64_t>(b[i]) << (8 * (i % 8));
        return v;
    }

    bool bit(int i) const { return (limb[i / 64] >> (i % 64)) & 1; }
    void set_bit(int i) { limb[i / 64] |= std::uint64_t{1} << (i % 64); }

    // Returns the bit shifted out.
    bool shl1()
    {
        const bool out = limb[3] >> 63;
        for (int i = 3; i > 0; --i) limb[i] = (limb[i] << 1) | (limb[i - 1] >> 63);
        limb[0] <<= 1;
        return out;
    }

    void sub(const U256& o)
    {
        std::uint64_t borrow = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint64_t a = limb[i];
            const std::uint64_t d = a - o.limb[i] - borrow;
            borrow = (a < o.limb[i] || (a == o.limb[i] && borrow)) ? 1 : 0;
            limb[i] = d;
        }
    }

    bool add_one()
    {
        for (auto& l : limb)
            if (++l != 0) return false;
        return true;
    }

    U256 operator~() const
    {
        U256 v;
        for (int i = 0; i < 4; ++i) v.limb[i] = ~limb[i];
        return v;
    }

    auto operator<=>(const U256& o) const
    {
        for (int i = 3; i >= 0; --i)
            if (limb[i] != o.limb[i]) return limb[i] <=> o.limb[i];
        return std::strong_ordering::equal;
    }
    bool operator==(const U256&) const = default;

    bool is_zero() const { return (limb[0] | limb[1] | limb[2] | limb[3]) == 0; }
};

U256 divide(const U256& num, const U256& den)
{
    U256 q;
    U256 r;
    for (int i = 255; i >= 0; --i) {
        const bool carry = r.shl1();
        if (num.bit(i)) r.limb[0] |= 1;
        if (carry || r >= den) {
            r.sub(den);
            q.set_bit(i);
        }
    }
    return q;
}

U256 target_from_compact(std::uint32_t bits)
{
    const int exponent = static_cast<int>(bits >> 24);
    const std::uint32_t mantissa = bits & 0x007fffff;
    if ((bits & 0x00800000) && mantissa != 0) throw std::invalid_argument("negative compact target");
    U256 t;
    if (exponent <= 3) {
        t.limb[0] = mantissa >> (8 * (3 - exponent));
        return t;
    }
    const int shift = 8 * (exponent - 3);
    if (mantissa != 0 && (shift > 255 - 23)) {
        // The mantissa's top set bit must stay below 2^256.
        int top = 0;
        for (int b = 22; b >= 0; --b)
            if (mantissa >> b & 1) {
                top = b;
                break;
            }
        if (top + shift > 255) throw std::invalid_argument("compact target overflows 256 bits");
    }
    for (int b = 0; b < 23; ++b)
        if (mantissa >> b & 1) t.set_bit(b + shift);
    return t;
}

} // namespace

Work block_work(std::uint32_t bits)
{
    static std::mutex mu;
    static std::unordered_map<std::uint32_t, Work> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(bits); it != cache.end()) return it->second;
    }
    const U256 target = target_from_compact(bits);
    if (target.is_zero()) throw std::invalid_argument("zero target");
    // 2^256 / (target + 1) == ~target / (target + 1) + 1
    U256 den = target;
    if (den.add_one()) return 1;
    const U256 q = divide(~target, den);
    if (q.limb[2] != 0 || q.limb[3] != 0) throw std::invalid_argument("block work exceeds 128 bits");
    Work w = (static_cast<Work>(q.limb[1]) << 64) | q.limb[0];
    w += 1;
    std::lock_guard lock(mu);
    cache.emplace(bits, w);
    return w;
}

bool check_proof_of_work(const Hash256& id, std::uint32_t bits)
{
    U256 target;
    try {
        target = target_from_compact(bits);
    } catch (const std::invalid_argument&) {
        return false;
    }
    if (target.is_zero()) return false;
    return U256::from_le_bytes(id.span()) <= target;
}

void mine_header(BlockHeader& header)
{
    while (!check_proof_of_work(header.id(), header.bits)) ++header.nonce;
}

Hash256 compute_merkle_root(std::span<const Hash256> txids)
{
    if (txids.empty()) throw std::invalid_argument("merkle root of an empty transaction list");
    std::vector<Hash256> layer(txids.begin(), txids.end());
    while (layer.size() > 1) {
        if (layer.size() % 2 == 1) layer.push_back(layer.back());
        std::vector<Hash256> next;
        next.reserve(layer.size() / 2);
        for (std::size_t i = 0; i < layer.size(); i += 2) next.push_back(hash256_concat(layer[i], layer[i + 1]));
        layer = std::move(next);
    }
    return layer.front();
}

// ---------------------------------------------------------------------------
// Genesis and params

Block make_genesis_block(const ChainParams& params)
{
    Block b;
    Bytes data = coinbase_height_prefix(0);
    const auto msg = to_bytes("coinprune genesis");
    data.insert(data.end(), msg.begin(), msg.end());
    const auto owner = hash160(to_bytes("genesis-owner"));
    b.txs.push_back(Transaction::coinbase(std::move(data), {TxOutput{params.subsidy, scripts::p2pkh_script(owner)}}));
    b.header.version = 1;
    b.header.timestamp = params.genesis_time;
    b.header.bits = params.pow_bits;
    const auto ids = b.txids();
    b.header.merkle_root = compute_merkle_root(ids);
    mine_header(b.header);
    return b;
}

const ChainParams& ChainParams::defaults()
{
    static const ChainParams params = [] {
        ChainParams p;
        p.genesis_id = make_genesis_block(p).id();
        return p;
    }();
    return params;
}

PersistedHeaderRecord make_record(const BlockHeader& header, std::uint32_t tx_count, const PersistedHeaderRecord* parent)
{
    PersistedHeaderRecord rec;
    rec.block_id = header.id();
    rec.header = header;
    rec.height = parent ? parent->height + 1 : 0;
    rec.cumulative_work = (parent ? parent->cumulative_work : 0) + block_work(header.bits);
    rec.tx_count = tx_count;
    rec.timestamp = header.timestamp;
    return rec;
}

Bytes coinbase_height_prefix(std::uint32_t height)
{
    ByteWriter w(4);
    w.u32(height);
    return w.take();
}

// ---------------------------------------------------------------------------
// Block validation

std::string_view to_string(BlockError e) noexcept
{
    switch (e) {
    case BlockError::BadPrevHash: return "bad-prevhash";
    case BlockError::BadGenesis: return "bad-genesis";
    case BlockError::BadBits: return "bad-bits";
    case BlockError::PowFailure: return "pow-failure";
    case BlockError::MerkleMismatch: return "merkle-mismatch";
    case BlockError::NoCoinbase: return "no-coinbase";
    case BlockError::BadCoinbase: return "bad-coinbase";
    case BlockError::UnknownOutpoint: return "unknown-outpoint";
    case BlockError::DoubleSpend: return "double-spend";
    case BlockError::DuplicateOutput: return "duplicate-output";
    case BlockError::ScriptFailure: return "script-failure";
    case BlockError::OversizedScript: return "oversized-script";
    case BlockError::OversizedOpReturn: return "oversized-op-return";
    case BlockError::ValueOverflow: return "value-overflow";
    case BlockError::OutputsExceedInputs: return "outputs-exceed-inputs";
    case BlockError::CoinbaseOverpays: return "coinbase-overpays";
    }
    return "?";
}

namespace {

bool add_overflows(std::uint64_t& acc, std::uint64_t v)
{
    if (acc > UINT64_MAX - v) return true;
    acc += v;
    return false;
}

[[noreturn]] void reject(BlockError code, std::size_t tx, const std::string& detail)
{
    throw BlockValidationError(code, tx, detail);
}

std::size_t op_return_payload_size(const Bytes& script)
{
    auto pushes = scripts::parse_pushes(ByteSpan(script).subspan(1));
    if (!pushes) return script.size() - 1;
    std::size_t n = 0;
    for (const auto& p : *pushes) n += p.size();
    return n;
}

} // namespace

PersistedHeaderRecord validate_and_apply_block(UtxoSet& utxos, const Block& block, const PersistedHeaderRecord* parent,
                                               const ChainParams& params, const ValidationOptions& opts)
{
    using E = BlockError;
    const auto fail = reject;

    const auto id = block.id();
    if (parent) {
        if (block.header.prev_hash != parent->block_id) fail(E::BadPrevHash, 0, "parent " + parent->block_id.hex());
    } else if (id != params.genesis_id || !block.header.prev_hash.is_null()) {
        fail(E::BadGenesis, 0, "block " + id.hex() + " is not the configured genesis");
    }
    if (block.header.bits != params.pow_bits) fail(E::BadBits, 0, "unexpected difficulty bits");
    if (opts.check_pow && !check_proof_of_work(id, block.header.bits)) fail(E::PowFailure, 0, id.hex());
    if (block.txs.empty() || !block.txs[0].is_coinbase()) fail(E::NoCoinbase, 0, "first transaction is not a coinbase");

    const auto txids = block.txids();
    if (compute_merkle_root(txids) != block.header.merkle_root) fail(E::MerkleMismatch, 0, "merkle root mismatch");

    const std::uint32_t height = parent ? parent->height + 1 : 0;
    const auto& cb_data = block.txs[0].inputs[0].unlock;
    const auto prefix = coinbase_height_prefix(height);
    if (cb_data.size() > kMaxCoinbaseData || cb_data.size() < prefix.size() ||
        !std::equal(prefix.begin(), prefix.end(), cb_data.begin()))
        fail(E::BadCoinbase, 0, "coinbase field must start with the height and hold at most 100 bytes");

    // Overlay of changes; committed only once the whole block checks out.
    std::map<OutPoint, UtxoEntry> created;
    std::set<OutPoint> spent;
    std::uint64_t fees = 0;

    const auto lookup = [&](const OutPoint& op) -> const UtxoEntry* {
        if (auto it = created.find(op); it != created.end()) return &it->second;
        return utxos.find(op);
    };

    for (std::size_t t = 0; t < block.txs.size(); ++t) {
        const auto& tx = block.txs[t];
        const bool is_cb = t == 0;
        if (!is_cb && tx.is_coinbase()) fail(E::BadCoinbase, t, "coinbase outside position 0");
        if (!is_cb && tx.inputs.empty()) fail(E::BadCoinbase, t, "transaction without inputs");

        std::uint64_t in_sum = 0;
        if (!is_cb) {
            for (const auto& in : tx.inputs) {
                if (in.prevout.is_null()) fail(E::BadCoinbase, t, "null prevout in regular transaction");
                if (spent.count(in.prevout)) fail(E::DoubleSpend, t, in.prevout.txid.hex());
                const UtxoEntry* coin = lookup(in.prevout);
                if (!coin) fail(E::UnknownOutpoint, t, in.prevout.txid.hex() + ":" + std::to_string(in.prevout.vout));
                if (!scripts::validate_spend(coin->compressed, in.unlock,
                                             scripts::SpendContext{in.prevout.txid, in.prevout.vout}))
                    fail(E::ScriptFailure, t, in.prevout.txid.hex());
                if (add_overflows(in_sum, coin->amount)) fail(E::ValueOverflow, t, "input sum");
                spent.insert(in.prevout);
            }
        }

        std::uint64_t out_sum = 0;
        for (std::uint32_t v = 0; v < tx.outputs.size(); ++v) {
            const auto& out = tx.outputs[v];
            if (add_overflows(out_sum, out.amount)) fail(E::ValueOverflow, t, "output sum");
            const auto cls = scripts::classify_script(out.script);
            if (cls == scripts::ScriptClass::OpReturn) {
                if (op_return_payload_size(out.script) > kMaxOpReturnPayload)
                    fail(E::OversizedOpReturn, t, "OP_RETURN payload above 80 bytes");
                continue;
            }
            scripts::CompressedTxOut compressed;
            try {
                compressed = scripts::compress(out.script);
            } catch (const scripts::ScriptError& e) {
                fail(E::OversizedScript, t, e.what());
            }
            if (opts.obfuscate_utxos) compressed = scripts::obfuscate(compressed);
            const OutPoint op{txids[t], v};
            if (utxos.contains(op) || created.count(op)) fail(E::DuplicateOutput, t, op.txid.hex());
            created.emplace(op, UtxoEntry{op, out.amount, height, is_cb, std::move(compressed)});
        }

        if (!is_cb) {
            if (out_sum > in_sum) fail(E::OutputsExceedInputs, t, "outputs exceed inputs");
            if (add_overflows(fees, in_sum - out_sum)) fail(E::ValueOverflow, t, "fees");
        }
    }

    std::uint64_t cb_out = 0;
    for (const auto& out : block.txs[0].outputs) cb_out += out.amount;
    std::uint64_t allowed = params.subsidy;
    if (add_overflows(allowed, fees) || cb_out > allowed) fail(E::CoinbaseOverpays, 0, "coinbase pays more than subsidy + fees");

    for (const auto& op : spent) {
        if (!created.erase(op)) utxos.erase(op);
    }
    for (auto& [op, entry] : created) utxos.insert(std::move(entry));

    return make_record(block.header, static_cast<std::uint32_t>(block.txs.size()), parent);
}

// ---------------------------------------------------------------------------
// Header chain

HeaderChainResult verify_headerchain(std::span<const BlockHeader> headers, const ChainParams& params)
{
    using F = HeaderChainFault;
    if (headers.empty()) throw HeaderChainError(F::Empty, 0, "empty header list");

    struct Node {
        std::size_t parent;
        Work work;
        std::uint32_t height;
    };
    std::vector<Node> nodes;
    std::vector<Hash256> ids;
    std::unordered_map<Hash256, std::size_t, DigestHasher> index;
    nodes.reserve(headers.size());

    std::size_t best = 0;
    for (std::size_t i = 0; i < headers.size(); ++i) {
        const auto& h = headers[i];
        const auto id = h.id();
        if (h.bits != params.pow_bits) throw HeaderChainError(F::BadBits, i, "unexpected difficulty bits");
        if (!check_proof_of_work(id, h.bits)) throw HeaderChainError(F::PowFailure, i, "insufficient proof of work");
        if (index.count(id)) continue;
        if (i == 0) {
            if (id != params.genesis_id) throw HeaderChainError(F::UnknownGenesis, 0, "unknown genesis");
            nodes.push_back(Node{SIZE_MAX, block_work(h.bits), 0});
        } else {
            auto it = index.find(h.prev_hash);
            if (it == index.end()) throw HeaderChainError(F::BrokenLink, i, "prev_hash links to no earlier header");
            const auto& parent = nodes[it->second];
            nodes.push_back(Node{it->second, parent.work + block_work(h.bits), parent.height + 1});
        }
        ids.push_back(id);
        index.emplace(id, nodes.size() - 1);
        if (nodes.back().work > nodes[best].work) best = nodes.size() - 1;
    }

    HeaderChainResult res;
    res.tip = ids[best];
    res.cumulative_work = nodes[best].work;
    res.tip_height = nodes[best].height;
    res.best_chain.resize(res.tip_height + 1);
    for (std::size_t n = best; n != SIZE_MAX; n = nodes[n].parent) res.best_chain[nodes[n].height] = ids[n];
    return res;
}

// ---------------------------------------------------------------------------
// Files

Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, ByteSpan data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

void write_header_index(const std::filesystem::path& path, std::span<const PersistedHeaderRecord> records)
{
    ByteWriter w(records.size() * PersistedHeaderRecord::kSize);
    for (const auto& r : records) r.serialize(w);
    write_file(path, w.view());
}

std::vector<PersistedHeaderRecord> read_header_index(const std::filesystem::path& path)
{
    const auto data = read_file(path);
    if (data.size() % PersistedHeaderRecord::kSize != 0)
        throw DecodeError("header index is not a whole number of 140-byte records",
                          data.size() - data.size() % PersistedHeaderRecord::kSize);
    ByteReader r(data);
    std::vector<PersistedHeaderRecord> out;
    out.reserve(data.size() / PersistedHeaderRecord::kSize);
    while (!r.empty()) out.push_back(PersistedHeaderRecord::parse(r));
    return out;
}

void write_block_file(const std::filesystem::path& path, std::span<const Block> blocks)
{
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) w.blob(b.serialized());
    write_file(path, w.view());
}

std::vector<Block> read_block_file(const std::filesystem::path& path)
{
    const auto data = read_file(path);
    ByteReader r(data);
    const auto n = r.u32();
    std::vector<Block> blocks;
    blocks.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto start = r.offset() + 4;
        ByteReader br(r.blob(), start);
        blocks.push_back(Block::parse(br));
        br.expect_end("block");
    }
    r.expect_end("block file");
    return blocks;
}

} // namespace coinprune::chain
