#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coinprune/chain.hpp"

namespace coinprune::snapshot {

inline constexpr std::size_t kMaxChunkSize = std::size_t{1} << 20;

struct SnapshotHeader {
    std::uint32_t height = 0;
    Hash256 block_id;
    std::uint32_t chunk_count = 0;

    static constexpr std::size_t kSize = 40;

    void serialize(ByteWriter& w) const;
    Bytes serialized() const;
    static SnapshotHeader parse(ByteReader& r);
    Hash256 hash() const { return hash256(serialized()); }

    bool operator==(const SnapshotHeader&) const = default;
};

/// hash256(header_hash || chunk_hash_1 || ... || chunk_hash_n).
Hash256 layered_id(const Hash256& header_hash, std::span<const Hash256> chunk_hashes);

/// What a peer advertises for a snapshot: header and the hash of every chunk.
struct SnapshotManifest {
    SnapshotHeader header;
    std::vector<Hash256> chunk_hashes;

    Hash256 id() const { return layered_id(header.hash(), chunk_hashes); }

    void serialize(ByteWriter& w) const;
    static SnapshotManifest parse(ByteReader& r);

    bool operator==(const SnapshotManifest&) const = default;
};

/// Header plus chunks of whole records. Shared by UTXO snapshots and the
/// application data store.
struct ChunkedObject {
    SnapshotHeader header;
    std::vector<Bytes> chunks;

    SnapshotManifest manifest() const;
    Hash256 compute_id() const { return manifest().id(); }
    std::size_t serialized_size() const;

    bool operator==(const ChunkedObject&) const = default;
};

struct Snapshot : ChunkedObject {
    /// Id computed when the snapshot was built.
    Hash256 id;

    bool operator==(const Snapshot&) const = default;
};

/// Splits `records` greedily into chunks of at most `max_chunk` bytes
/// (capped at kMaxChunkSize) without ever splitting a record. Throws
/// std::length_error when a single record is larger than a chunk.
std::vector<Bytes> chunk_records(std::span<const Bytes> records, std::size_t max_chunk = kMaxChunkSize);

/// Layout: txid(32) vout(4) amount(8) height(4) coinbase(1) case(1) payload.
void serialize_record(ByteWriter& w, const chain::UtxoEntry& entry);
chain::UtxoEntry parse_record(ByteReader& r);

/// Records in (txid, vout) ascending order.
std::vector<Bytes> serialize_utxo_set(const chain::UtxoSet& utxos);
/// Concatenated record stream.
Bytes utxo_stream(const chain::UtxoSet& utxos);

Snapshot build_snapshot(const chain::UtxoSet& utxos, std::uint32_t height, const Hash256& block_id, bool obfuscation,
                        std::size_t max_chunk = kMaxChunkSize);

struct Verdict {
    bool ok = false;
    /// Index (0-based) of the first chunk that differs from the reference
    /// manifest, when one was supplied and trusted.
    std::optional<std::size_t> first_mismatch;
    std::string reason;
};

/// Recomputes the layered id and compares it against `expected_id`. With a
/// reference manifest whose id equals `expected_id`, a failure also names the
/// first mismatching chunk.
Verdict verify_snapshot(const ChunkedObject& snap, const Hash256& expected_id,
                        const SnapshotManifest* reference = nullptr);

/// Thrown by apply_snapshot; `chunk` and offset() locate the failure.
class SnapshotParseError : public DecodeError {
public:
    SnapshotParseError(const std::string& what, std::size_t chunk, std::size_t offset)
        : DecodeError(what + " in chunk " + std::to_string(chunk), offset), chunk_(chunk)
    {
    }
    std::size_t chunk() const noexcept { return chunk_; }

private:
    std::size_t chunk_;
};

/// Rebuilds the UTXO set. Records must be strictly increasing by outpoint.
/// Offsets reported in errors are relative to the concatenated record stream.
chain::UtxoSet apply_snapshot(const ChunkedObject& snap);

// File format: header(40) then, per chunk, a 4-byte LE length and the bytes.
Bytes encode_file(const ChunkedObject& obj);
ChunkedObject decode_file(ByteSpan data);
void write_snapshot_file(const std::filesystem::path& path, const ChunkedObject& obj);
ChunkedObject read_snapshot_file(const std::filesystem::path& path);

// Manifest sidecar: header(40) then chunk_count 32-byte chunk hashes.
void write_manifest_file(const std::filesystem::path& path, const SnapshotManifest& m);
SnapshotManifest read_manifest_file(const std::filesystem::path& path);

} // namespace coinprune::snapshot
