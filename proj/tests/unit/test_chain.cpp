#include "doctest.h"

#include <filesystem>
#include <random>

#include "coinprune/chain.hpp"
#include "oracles/golden_vectors.hpp"
#include "oracles/oracles.hpp"

using namespace coinprune;
using namespace coinprune::chain;
using scripts::push_sequence;
using scripts::toy_signature;

namespace {

const ChainParams& P() { return ChainParams::defaults(); }

Bytes key(std::uint8_t fill)
{
    Bytes k(33, fill);
    k[0] = 0x02;
    return k;
}

TxOutput pay(std::uint64_t amount, const Bytes& pubkey) { return {amount, scripts::p2pkh_script(hash160(pubkey))}; }

Bytes unlock_for(const Bytes& pubkey, const OutPoint& op)
{
    return push_sequence({toy_signature(pubkey, {op.txid, op.vout}), pubkey});
}

Block make_block(const PersistedHeaderRecord& parent, std::vector<Transaction> txs, std::uint64_t cb_amount,
                 const Bytes& cb_key = key(0xcb))
{
    Block b;
    b.txs.push_back(Transaction::coinbase(coinbase_height_prefix(parent.height + 1), {pay(cb_amount, cb_key)}));
    for (auto& t : txs) b.txs.push_back(std::move(t));
    b.header.prev_hash = parent.block_id;
    b.header.timestamp = parent.timestamp + 600;
    b.header.bits = P().pow_bits;
    const auto ids = b.txids();
    b.header.merkle_root = compute_merkle_root(ids);
    mine_header(b.header);
    return b;
}

void remine(Block& b)
{
    const auto ids = b.txids();
    b.header.merkle_root = compute_merkle_root(ids);
    b.header.nonce = 0;
    mine_header(b.header);
}

struct Fixture {
    UtxoSet utxos;
    std::vector<PersistedHeaderRecord> recs;
    Bytes owner = key(0x01);
    OutPoint coin; // spendable 50 BTC P2PKH output owned by `owner`

    Fixture()
    {
        const auto g = make_genesis_block(P());
        recs.push_back(validate_and_apply_block(utxos, g, nullptr, P()));
        const auto b1 = make_block(recs.back(), {}, P().subsidy, owner);
        recs.push_back(validate_and_apply_block(utxos, b1, &recs.back(), P()));
        coin = OutPoint{b1.txs[0].txid(), 0};
    }

    Transaction spend(std::uint64_t amount, const Bytes& to = key(0x02)) const
    {
        Transaction t;
        t.inputs.push_back({coin, unlock_for(owner, coin)});
        t.outputs.push_back(pay(amount, to));
        return t;
    }

    BlockError reject(const Block& b)
    {
        const auto before = utxos;
        try {
            validate_and_apply_block(utxos, b, &recs.back(), P());
        } catch (const BlockValidationError& e) {
            CHECK(utxos == before);
            return e.code();
        }
        FAIL("block was accepted");
        return BlockError::BadGenesis;
    }
};

} // namespace

TEST_CASE("genesis and proof-of-work constants")
{
    const auto g = make_genesis_block(P());
    CHECK(g.txs[0].txid().hex() == golden::kGenesisCoinbaseTxid);
    CHECK(oracle::txid(g.txs[0]).hex() == golden::kGenesisCoinbaseTxid);
    CHECK(g.id().hex() == golden::kGenesisId);
    CHECK(g.header.nonce == golden::kGenesisNonce);
    CHECK(P().genesis_id == g.id());

    CHECK(block_work(0x200fffff) == (static_cast<Work>(golden::kWorkDefaultBitsHi) << 64 | golden::kWorkDefaultBitsLo));
    CHECK(block_work(0x1d00ffff) == golden::kWorkBitcoinBits);
    CHECK_THROWS_AS(block_work(0x04923456), std::invalid_argument);
    CHECK_THROWS_AS(block_work(0x00000000), std::invalid_argument);
    CHECK_FALSE(check_proof_of_work(Hash256::filled(0xff), 0x200fffff));
    CHECK(check_proof_of_work(Hash256{}, 0x1d00ffff));
}

TEST_CASE("merkle root matches recursive oracle")
{
    CHECK(compute_merkle_root(std::vector{hash256(to_bytes("a")), hash256(to_bytes("b")), hash256(to_bytes("c"))})
              .hex() == golden::kMerkleAbc);
    CHECK(compute_merkle_root(std::vector{hash256(to_bytes("a")), hash256(to_bytes("b")), hash256(to_bytes("c")),
                                          hash256(to_bytes("d"))})
              .hex() == golden::kMerkleAbcd);
    CHECK_THROWS_AS(compute_merkle_root(std::vector<Hash256>{}), std::invalid_argument);
    for (std::size_t n = 1; n <= 33; ++n) {
        std::vector<Hash256> leaves;
        for (std::size_t i = 0; i < n; ++i) leaves.push_back(hash256(to_bytes("leaf" + std::to_string(i))));
        CHECK(compute_merkle_root(leaves) == oracle::merkle_root(leaves));
    }
}

TEST_CASE("serialization round trips")
{
    Fixture f;
    auto t = f.spend(100);
    t.outputs.push_back({0, scripts::op_return_script(to_bytes("note"))});
    const auto b = make_block(f.recs.back(), {t}, P().subsidy);
    const auto raw = b.serialized();
    ByteReader r(raw);
    CHECK(Block::parse(r) == b);
    CHECK(b.serialized().size() == b.serialized_size());
    CHECK(t.txid() == oracle::txid(t));

    const auto rec = f.recs.back();
    ByteWriter w;
    rec.serialize(w);
    CHECK(w.size() == PersistedHeaderRecord::kSize);
    ByteReader rr(w.view());
    CHECK(PersistedHeaderRecord::parse(rr) == rec);

    const auto bytes = b.serialized();
    ByteReader cut(ByteSpan(bytes).first(bytes.size() - 3));
    CHECK_THROWS_AS(Block::parse(cut), DecodeError);
}

TEST_CASE("valid spends apply, including spends within the block")
{
    Fixture f;
    auto t1 = f.spend(P().subsidy - 1000, key(0x02));
    const OutPoint mid{t1.txid(), 0};
    Transaction t2;
    t2.inputs.push_back({mid, unlock_for(key(0x02), mid)});
    t2.outputs.push_back(pay(P().subsidy - 3000, key(0x03)));
    const auto b = make_block(f.recs.back(), {t1, t2}, P().subsidy + 3000);
    const auto rec = validate_and_apply_block(f.utxos, b, &f.recs.back(), P());
    CHECK(rec.height == 2);
    CHECK(rec.tx_count == 3);
    CHECK(rec.cumulative_work == 3 * block_work(P().pow_bits));
    CHECK_FALSE(f.utxos.contains(f.coin));
    CHECK_FALSE(f.utxos.contains(mid));
    const auto* e = f.utxos.find({t2.txid(), 0});
    REQUIRE(e);
    CHECK(e->height == 2);
    CHECK_FALSE(e->coinbase);
    CHECK(f.utxos.find({b.txs[0].txid(), 0})->coinbase);
}

TEST_CASE("every block error is detected and leaves the set untouched")
{
    Fixture f;
    const auto& tip = f.recs.back();

    SUBCASE("bad prev hash")
    {
        auto b = make_block(tip, {}, P().subsidy);
        b.header.prev_hash = Hash256::filled(1);
        remine(b);
        CHECK(f.reject(b) == BlockError::BadPrevHash);
    }
    SUBCASE("bad genesis")
    {
        UtxoSet u;
        auto g = make_genesis_block(P());
        g.header.timestamp += 1;
        remine(g);
        CHECK_THROWS_AS(validate_and_apply_block(u, g, nullptr, P()), BlockValidationError);
        CHECK(u.empty());
    }
    SUBCASE("bad bits")
    {
        auto b = make_block(tip, {}, P().subsidy);
        b.header.bits = 0x207fffff;
        remine(b);
        CHECK(f.reject(b) == BlockError::BadBits);
    }
    SUBCASE("pow failure")
    {
        auto b = make_block(tip, {}, P().subsidy);
        while (check_proof_of_work(b.id(), b.header.bits)) ++b.header.nonce;
        CHECK(f.reject(b) == BlockError::PowFailure);
    }
    SUBCASE("merkle mismatch")
    {
        auto b = make_block(tip, {}, P().subsidy);
        b.header.merkle_root = Hash256::filled(7);
        b.header.nonce = 0;
        mine_header(b.header);
        CHECK(f.reject(b) == BlockError::MerkleMismatch);
    }
    SUBCASE("no coinbase")
    {
        auto b = make_block(tip, {f.spend(10)}, P().subsidy);
        b.txs.erase(b.txs.begin());
        remine(b);
        CHECK(f.reject(b) == BlockError::NoCoinbase);
    }
    SUBCASE("coinbase field")
    {
        auto b = make_block(tip, {}, P().subsidy);
        b.txs[0].inputs[0].unlock = coinbase_height_prefix(7);
        remine(b);
        CHECK(f.reject(b) == BlockError::BadCoinbase);
        b.txs[0].inputs[0].unlock = coinbase_height_prefix(tip.height + 1);
        b.txs[0].inputs[0].unlock.resize(101, 0x20);
        remine(b);
        CHECK(f.reject(b) == BlockError::BadCoinbase);
        b.txs[0].inputs[0].unlock.resize(100);
        remine(b);
        CHECK_NOTHROW(validate_and_apply_block(f.utxos, b, &tip, P()));
    }
    SUBCASE("second coinbase")
    {
        auto b = make_block(tip, {}, P().subsidy);
        b.txs.push_back(Transaction::coinbase(coinbase_height_prefix(2), {pay(1, key(5))}));
        remine(b);
        CHECK(f.reject(b) == BlockError::BadCoinbase);
    }
    SUBCASE("unknown outpoint")
    {
        auto t = f.spend(10);
        t.inputs[0].prevout.vout = 5;
        CHECK(f.reject(make_block(tip, {t}, P().subsidy)) == BlockError::UnknownOutpoint);
    }
    SUBCASE("double spend")
    {
        CHECK(f.reject(make_block(tip, {f.spend(10), f.spend(20)}, P().subsidy)) == BlockError::DoubleSpend);
    }
    SUBCASE("duplicate output")
    {
        const auto t = f.spend(10);
        auto dup = t;
        CHECK(f.reject(make_block(tip, {t, dup}, P().subsidy)) == BlockError::DoubleSpend);
        // an identical coinbase re-creates the same outpoints
        auto b = make_block(tip, {}, P().subsidy);
        b.txs.push_back(b.txs[0]);
        b.txs[1].inputs[0].prevout = f.coin;
        b.txs[1].inputs[0].unlock = unlock_for(f.owner, f.coin);
        remine(b);
        UtxoSet u = f.utxos;
        auto clash = b.txs[1];
        u.insert(UtxoEntry{{clash.txid(), 0}, 1, 1, false, scripts::compress(clash.outputs[0].script)});
        const auto before = u;
        try {
            validate_and_apply_block(u, b, &tip, P());
            FAIL("accepted");
        } catch (const BlockValidationError& e) {
            CHECK(e.code() == BlockError::DuplicateOutput);
        }
        CHECK(u == before);
    }
    SUBCASE("script failure")
    {
        auto t = f.spend(10);
        t.inputs[0].unlock = unlock_for(key(0x09), f.coin);
        CHECK(f.reject(make_block(tip, {t}, P().subsidy)) == BlockError::ScriptFailure);
    }
    SUBCASE("oversized script")
    {
        auto t = f.spend(10);
        t.outputs[0].script = Bytes(246, 0x61);
        CHECK(f.reject(make_block(tip, {t}, P().subsidy)) == BlockError::OversizedScript);
    }
    SUBCASE("oversized op_return")
    {
        auto t = f.spend(10);
        t.outputs.push_back({0, scripts::op_return_script(Bytes(81, 1))});
        CHECK(f.reject(make_block(tip, {t}, P().subsidy)) == BlockError::OversizedOpReturn);
        t.outputs.back() = {0, scripts::op_return_script(Bytes(80, 1))};
        CHECK_NOTHROW(validate_and_apply_block(f.utxos, make_block(tip, {t}, P().subsidy), &tip, P()));
    }
    SUBCASE("value overflow")
    {
        auto t = f.spend(UINT64_MAX);
        t.outputs.push_back(pay(2, key(4)));
        CHECK(f.reject(make_block(tip, {t}, P().subsidy)) == BlockError::ValueOverflow);
    }
    SUBCASE("outputs exceed inputs")
    {
        CHECK(f.reject(make_block(tip, {f.spend(P().subsidy + 1)}, P().subsidy)) == BlockError::OutputsExceedInputs);
    }
    SUBCASE("coinbase overpays")
    {
        CHECK(f.reject(make_block(tip, {f.spend(P().subsidy - 10)}, P().subsidy + 11)) ==
              BlockError::CoinbaseOverpays);
        CHECK_NOTHROW(
            validate_and_apply_block(f.utxos, make_block(tip, {f.spend(P().subsidy - 10)}, P().subsidy + 10), &tip, P()));
    }
}

TEST_CASE("obfuscated storage still validates spends")
{
    UtxoSet u;
    ValidationOptions opts;
    opts.obfuscate_utxos = true;
    const auto g = make_genesis_block(P());
    std::vector<PersistedHeaderRecord> recs{validate_and_apply_block(u, g, nullptr, P(), opts)};
    const auto owner = key(0x41);
    const auto b1 = make_block(recs.back(), {}, P().subsidy, owner);
    recs.push_back(validate_and_apply_block(u, b1, &recs.back(), P(), opts));
    const OutPoint op{b1.txs[0].txid(), 0};
    CHECK(u.find(op)->compressed.case_code == scripts::cases::ObfuscatedP2PKH);
    Transaction t;
    t.inputs.push_back({op, unlock_for(owner, op)});
    t.outputs.push_back(pay(5, key(0x42)));
    CHECK_NOTHROW(validate_and_apply_block(u, make_block(recs.back(), {t}, P().subsidy), &recs.back(), P(), opts));
}

namespace {

std::vector<BlockHeader> branch(const BlockHeader& from, std::uint32_t from_height, int n, std::uint32_t salt)
{
    std::vector<BlockHeader> out;
    auto prev = from;
    for (int i = 0; i < n; ++i) {
        BlockHeader h;
        h.prev_hash = prev.id();
        h.merkle_root = hash256(to_bytes("m" + std::to_string(salt) + "/" + std::to_string(from_height + i)));
        h.timestamp = prev.timestamp + 600;
        h.bits = P().pow_bits;
        mine_header(h);
        out.push_back(h);
        prev = h;
    }
    return out;
}

} // namespace

TEST_CASE("header chain picks the most work and reports faults")
{
    const auto g = make_genesis_block(P()).header;
    const auto main = branch(g, 1, 6, 1);
    const auto side = branch(main[1], 3, 6, 2); // tip height 8

    std::vector<BlockHeader> all{g};
    all.insert(all.end(), main.begin(), main.end());
    all.insert(all.end(), side.begin(), side.end());
    auto res = verify_headerchain(all, P());
    CHECK(res.tip == side.back().id());
    CHECK(res.tip_height == 8);
    CHECK(res.cumulative_work == 9 * block_work(P().pow_bits));
    REQUIRE(res.best_chain.size() == 9);
    CHECK(res.best_chain[0] == g.id());
    CHECK(res.best_chain[2] == main[1].id());
    CHECK(res.best_chain[3] == side[0].id());

    // equal work keeps the first branch seen
    std::vector<BlockHeader> tie{g};
    const auto a = branch(g, 1, 3, 3);
    const auto b = branch(g, 1, 3, 4);
    tie.insert(tie.end(), a.begin(), a.end());
    tie.insert(tie.end(), b.begin(), b.end());
    CHECK(verify_headerchain(tie, P()).tip == a.back().id());

    const auto fault = [&](std::vector<BlockHeader> hs) {
        try {
            verify_headerchain(hs, P());
        } catch (const HeaderChainError& e) {
            return std::pair{e.fault(), e.position()};
        }
        FAIL("accepted");
        return std::pair{HeaderChainFault::Empty, std::size_t{0}};
    };
    CHECK(fault({}).first == HeaderChainFault::Empty);
    CHECK(fault({main[0]}).first == HeaderChainFault::UnknownGenesis);
    auto broken = all;
    broken.erase(broken.begin() + 2);
    CHECK(fault(broken) == std::pair{HeaderChainFault::BrokenLink, std::size_t{2}});
    auto bits = all;
    bits[3].bits = 0x207fffff;
    mine_header(bits[3]);
    CHECK(fault(bits) == std::pair{HeaderChainFault::BadBits, std::size_t{3}});
    auto weak = all;
    while (check_proof_of_work(weak[4].id(), weak[4].bits)) ++weak[4].nonce;
    CHECK(fault(weak) == std::pair{HeaderChainFault::PowFailure, std::size_t{4}});
}

TEST_CASE("index and block files")
{
    Fixture f;
    const auto dir = std::filesystem::temp_directory_path() / "coinprune_test_chain";
    std::filesystem::create_directories(dir);
    write_header_index(dir / "index.dat", f.recs);
    CHECK(std::filesystem::file_size(dir / "index.dat") == 140 * f.recs.size());
    CHECK(read_header_index(dir / "index.dat") == f.recs);

    auto data = read_file(dir / "index.dat");
    data.pop_back();
    write_file(dir / "index.dat", data);
    CHECK_THROWS_AS(read_header_index(dir / "index.dat"), DecodeError);

    std::vector<Block> blocks{make_genesis_block(P()), make_block(f.recs.back(), {f.spend(9)}, P().subsidy)};
    write_block_file(dir / "blocks.dat", blocks);
    CHECK(read_block_file(dir / "blocks.dat") == blocks);
    CHECK_THROWS(read_block_file(dir / "missing.dat"));
    std::filesystem::remove_all(dir);
}
