#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coinprune/chain.hpp"
#include "coinprune/snapshot.hpp"

namespace coinprune::appdata {

struct AppDataEntry {
    Bytes payload;
    Hash256 txid;
    Hash256 block_id;

    /// payload length (1) || payload || txid || block_id
    void serialize(ByteWriter& w) const;
    static AppDataEntry parse(ByteReader& r);
    std::size_t serialized_size() const noexcept { return 1 + payload.size() + 64; }

    bool operator==(const AppDataEntry&) const = default;
};

/// OP_RETURN payload with the opcode and push framing removed. Bytes that do
/// not parse as pushes are kept verbatim.
Bytes op_return_payload(ByteSpan script);

/// One entry per OP_RETURN output, in transaction and output order.
std::vector<AppDataEntry> extract_op_return(const chain::Block& block);

/// Append-only lookup table of OP_RETURN payloads in chain order.
class AppDataStore {
public:
    void append_block(const chain::Block& block, std::uint32_t height);
    /// Drops the entries of the most recently appended block when it matches
    /// `block_id`; returns false otherwise.
    bool disconnect_block(const Hash256& block_id);
    /// Keeps only entries from blocks at height <= `height`.
    void truncate_after(std::uint32_t height);

    const std::vector<AppDataEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::vector<AppDataEntry> lookup(const Hash256& txid) const;

    /// Chunked serialization of the entries from blocks up to `height`, with
    /// a header naming (height, block_id, chunk_count).
    snapshot::ChunkedObject chunked(std::uint32_t height, const Hash256& block_id,
                                    std::size_t max_chunk = snapshot::kMaxChunkSize) const;
    Hash256 id(std::uint32_t height, const Hash256& block_id) const { return chunked(height, block_id).compute_id(); }
    /// Serialized size of every entry held.
    std::size_t stored_bytes() const noexcept;

    /// Inverse of chunked(); block heights are not carried by the format and
    /// are set to the header's height.
    static AppDataStore from_chunked(const snapshot::ChunkedObject& obj);

    /// Compares entries only; heights are bookkeeping.
    bool operator==(const AppDataStore& o) const { return entries_ == o.entries_; }

private:
    std::vector<AppDataEntry> entries_;
    std::vector<std::uint32_t> heights_;
};

std::vector<AppDataEntry> lookup(const AppDataStore& store, const Hash256& txid);

/// hash256(snapshot_id || appdata_id): the reaffirmation tag once application
/// data is preserved.
Hash256 combined_tag(const Hash256& snapshot_id, const Hash256& appdata_id);
/// Throws std::invalid_argument unless both inputs are 32 bytes.
Hash256 combined_tag(ByteSpan snapshot_id, ByteSpan appdata_id);

} // namespace coinprune::appdata
