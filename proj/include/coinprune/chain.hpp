#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coinprune/bytes.hpp"
#include "coinprune/hash.hpp"
#include "coinprune/scripts.hpp"

namespace coinprune::chain {

using Work = unsigned __int128;

struct BlockHeader {
    std::uint32_t version = 1;
    Hash256 prev_hash;
    Hash256 merkle_root;
    std::uint32_t timestamp = 0;
    std::uint32_t bits = 0;
    std::uint32_t nonce = 0;

    static constexpr std::size_t kSize = 80;

    void serialize(ByteWriter& w) const;
    Bytes serialized() const;
    static BlockHeader parse(ByteReader& r);
    Hash256 id() const;

    bool operator==(const BlockHeader&) const = default;
};

struct OutPoint {
    Hash256 txid;
    std::uint32_t vout = 0;

    static constexpr std::uint32_t kNullIndex = 0xffffffff;
    bool is_null() const noexcept { return txid.is_null() && vout == kNullIndex; }

    auto operator<=>(const OutPoint&) const = default;
    bool operator==(const OutPoint&) const = default;
};

struct TxInput {
    OutPoint prevout;
    Bytes unlock;
    bool operator==(const TxInput&) const = default;
};

struct TxOutput {
    std::uint64_t amount = 0;
    Bytes script;
    bool operator==(const TxOutput&) const = default;
};

/// Maximum size of the coinbase unlock field ("coinbase field").
inline constexpr std::size_t kMaxCoinbaseData = 100;

struct Transaction {
    std::vector<TxInput> inputs;
    std::vector<TxOutput> outputs;

    /// Exactly one input spending the null outpoint.
    bool is_coinbase() const noexcept { return inputs.size() == 1 && inputs[0].prevout.is_null(); }

    void serialize(ByteWriter& w) const;
    Bytes serialized() const;
    std::size_t serialized_size() const;
    static Transaction parse(ByteReader& r);
    Hash256 txid() const;

    static Transaction coinbase(Bytes coinbase_data, std::vector<TxOutput> outputs);

    bool operator==(const Transaction&) const = default;
};

struct Block {
    BlockHeader header;
    std::vector<Transaction> txs;

    void serialize(ByteWriter& w) const;
    Bytes serialized() const;
    std::size_t serialized_size() const;
    static Block parse(ByteReader& r);
    Hash256 id() const { return header.id(); }

    std::vector<Hash256> txids() const;

    bool operator==(const Block&) const = default;
};

struct UtxoEntry {
    OutPoint outpoint;
    std::uint64_t amount = 0;
    std::uint32_t height = 0;
    bool coinbase = false;
    scripts::CompressedTxOut compressed;

    bool operator==(const UtxoEntry&) const = default;
};

/// Unspent outputs keyed by outpoint. Iteration order is the canonical
/// (txid, vout) ascending order.
class UtxoSet {
public:
    using Map = std::map<OutPoint, UtxoEntry>;

    const UtxoEntry* find(const OutPoint& op) const
    {
        auto it = map_.find(op);
        return it == map_.end() ? nullptr : &it->second;
    }
    bool contains(const OutPoint& op) const { return map_.count(op) != 0; }
    /// Returns false if the outpoint already exists.
    bool insert(UtxoEntry entry) { return map_.emplace(entry.outpoint, std::move(entry)).second; }
    bool erase(const OutPoint& op) { return map_.erase(op) != 0; }

    std::size_t size() const noexcept { return map_.size(); }
    bool empty() const noexcept { return map_.empty(); }
    Map::const_iterator begin() const { return map_.begin(); }
    Map::const_iterator end() const { return map_.end(); }

    std::uint64_t total_amount() const;

    bool operator==(const UtxoSet&) const = default;

private:
    Map map_;
};

struct ChainParams {
    std::uint32_t pow_bits = 0x200fffff; // accepts roughly 1 in 16 nonces
    std::uint64_t subsidy = 50'0000'0000;
    std::uint32_t genesis_time = 1'600'000'000;
    std::uint32_t block_spacing = 600;
    Hash256 genesis_id;

    /// Default parameters with the matching genesis id filled in.
    static const ChainParams& defaults();
};

/// The hard-coded genesis block for `params` (genesis_id is ignored).
Block make_genesis_block(const ChainParams& params);

// Proof of work ------------------------------------------------------------

/// Throws std::invalid_argument for negative/overflowing encodings or targets
/// whose work does not fit 128 bits.
Work block_work(std::uint32_t bits);
bool check_proof_of_work(const Hash256& id, std::uint32_t bits);
/// Increments the nonce until the header satisfies its own bits.
void mine_header(BlockHeader& header);

/// Odd layers duplicate their last element. Throws std::invalid_argument on an
/// empty list.
Hash256 compute_merkle_root(std::span<const Hash256> txids);

// Header index -------------------------------------------------------------

struct PersistedHeaderRecord {
    Hash256 block_id;
    BlockHeader header;
    std::uint32_t height = 0;
    Work cumulative_work = 0;
    std::uint32_t tx_count = 0;
    std::uint32_t timestamp = 0;

    static constexpr std::size_t kSize = 140;

    void serialize(ByteWriter& w) const;
    static PersistedHeaderRecord parse(ByteReader& r);

    bool operator==(const PersistedHeaderRecord&) const = default;
};

/// Record for `header` given its parent's record (nullptr for genesis).
PersistedHeaderRecord make_record(const BlockHeader& header, std::uint32_t tx_count,
                                  const PersistedHeaderRecord* parent);

void write_header_index(const std::filesystem::path& path, std::span<const PersistedHeaderRecord> records);
std::vector<PersistedHeaderRecord> read_header_index(const std::filesystem::path& path);

// Validation ---------------------------------------------------------------

enum class BlockError {
    BadPrevHash,
    BadGenesis,
    BadBits,
    PowFailure,
    MerkleMismatch,
    NoCoinbase,
    BadCoinbase,
    UnknownOutpoint,
    DoubleSpend,
    DuplicateOutput,
    ScriptFailure,
    OversizedScript,
    OversizedOpReturn,
    ValueOverflow,
    OutputsExceedInputs,
    CoinbaseOverpays,
};

std::string_view to_string(BlockError e) noexcept;

class BlockValidationError : public std::runtime_error {
public:
    BlockValidationError(BlockError code, std::size_t tx_index, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + " (tx " + std::to_string(tx_index) + "): " + detail),
          code_(code), tx_index_(tx_index)
    {
    }
    BlockError code() const noexcept { return code_; }
    std::size_t tx_index() const noexcept { return tx_index_; }

private:
    BlockError code_;
    std::size_t tx_index_;
};

struct ValidationOptions {
    /// Store obfuscatable outputs in obfuscated form.
    bool obfuscate_utxos = false;
    bool check_pow = true;
};

/// Largest OP_RETURN payload a block may carry.
inline constexpr std::size_t kMaxOpReturnPayload = 80;

/// Validates `block` on top of `parent` (nullptr: the block must be genesis)
/// and applies it to `utxos`. The set is left untouched if the block is
/// rejected.
PersistedHeaderRecord validate_and_apply_block(UtxoSet& utxos, const Block& block, const PersistedHeaderRecord* parent,
                                               const ChainParams& params, const ValidationOptions& opts = {});

/// First four bytes of every coinbase field: the block height, little endian.
Bytes coinbase_height_prefix(std::uint32_t height);

// Header chain -------------------------------------------------------------

enum class HeaderChainFault { UnknownGenesis, BrokenLink, BadBits, PowFailure, Empty };

class HeaderChainError : public std::runtime_error {
public:
    HeaderChainError(HeaderChainFault fault, std::size_t position, const std::string& what)
        : std::runtime_error(what + " at header " + std::to_string(position)), fault_(fault), position_(position)
    {
    }
    HeaderChainFault fault() const noexcept { return fault_; }
    std::size_t position() const noexcept { return position_; }

private:
    HeaderChainFault fault_;
    std::size_t position_;
};

struct HeaderChainResult {
    Hash256 tip;
    Work cumulative_work = 0;
    std::uint32_t tip_height = 0;
    /// Ids from genesis to tip along the most-work branch.
    std::vector<Hash256> best_chain;
};

/// Headers may describe several branches; every header must link to an earlier
/// one. Ties in cumulative work keep the branch seen first.
HeaderChainResult verify_headerchain(std::span<const BlockHeader> headers, const ChainParams& params);

// Block files --------------------------------------------------------------

/// Count (4 LE) followed by length-prefixed serialized blocks.
void write_block_file(const std::filesystem::path& path, std::span<const Block> blocks);
std::vector<Block> read_block_file(const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteSpan data);

} // namespace coinprune::chain
