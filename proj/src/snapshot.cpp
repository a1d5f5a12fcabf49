#include "coinprune/snapshot.hpp"

#include <algorithm>
#include <stdexcept>

namespace coinprune::snapshot {

void SnapshotHeader::serialize(ByteWriter& w) const
{
    w.u32(height);
    w.raw(block_id.span());
    w.u32(chunk_count);
}

Bytes SnapshotHeader::serialized() const
{
    ByteWriter w(kSize);
    serialize(w);
    return w.take();
}

SnapshotHeader SnapshotHeader::parse(ByteReader& r)
{
    SnapshotHeader h;
    h.height = r.u32();
    h.block_id = Hash256::from_span(r.raw(32));
    h.chunk_count = r.u32();
    return h;
}

Hash256 layered_id(const Hash256& header_hash, std::span<const Hash256> chunk_hashes)
{
    ByteWriter w(32 * (1 + chunk_hashes.size()));
    w.raw(header_hash.span());
    for (const auto& h : chunk_hashes) w.raw(h.span());
    return hash256(w.view());
}

void SnapshotManifest::serialize(ByteWriter& w) const
{
    header.serialize(w);
    for (const auto& h : chunk_hashes) w.raw(h.span());
}

SnapshotManifest SnapshotManifest::parse(ByteReader& r)
{
    SnapshotManifest m;
    m.header = SnapshotHeader::parse(r);
    if (m.header.chunk_count > r.remaining() / 32) throw DecodeError("manifest truncated", r.offset());
    m.chunk_hashes.reserve(m.header.chunk_count);
    for (std::uint32_t i = 0; i < m.header.chunk_count; ++i) m.chunk_hashes.push_back(Hash256::from_span(r.raw(32)));
    return m;
}

SnapshotManifest ChunkedObject::manifest() const
{
    SnapshotManifest m;
    m.header = header;
    m.chunk_hashes.reserve(chunks.size());
    for (const auto& c : chunks) m.chunk_hashes.push_back(hash256(c));
    return m;
}

std::size_t ChunkedObject::serialized_size() const
{
    std::size_t n = SnapshotHeader::kSize;
    for (const auto& c : chunks) n += 4 + c.size();
    return n;
}

std::vector<Bytes> chunk_records(std::span<const Bytes> records, std::size_t max_chunk)
{
    max_chunk = std::min(max_chunk, kMaxChunkSize);
    std::vector<Bytes> chunks;
    Bytes current;
    for (const auto& rec : records) {
        if (rec.size() > max_chunk) throw std::length_error("record larger than the chunk limit");
        if (current.size() + rec.size() > max_chunk) {
            chunks.push_back(std::move(current));
            current.clear();
        }
        current.insert(current.end(), rec.begin(), rec.end());
    }
    if (!current.empty()) chunks.push_back(std::move(current));
    return chunks;
}

void serialize_record(ByteWriter& w, const chain::UtxoEntry& e)
{
    w.raw(e.outpoint.txid.span());
    w.u32(e.outpoint.vout);
    w.u64(e.amount);
    w.u32(e.height);
    w.u8(e.coinbase ? 1 : 0);
    e.compressed.serialize(w);
}

chain::UtxoEntry parse_record(ByteReader& r)
{
    chain::UtxoEntry e;
    e.outpoint.txid = Hash256::from_span(r.raw(32));
    e.outpoint.vout = r.u32();
    e.amount = r.u64();
    e.height = r.u32();
    const auto flag = r.u8();
    if (flag > 1) throw DecodeError("coinbase flag must be 0 or 1", r.offset() - 1);
    e.coinbase = flag == 1;
    e.compressed = scripts::CompressedTxOut::parse(r);
    return e;
}

std::vector<Bytes> serialize_utxo_set(const chain::UtxoSet& utxos)
{
    std::vector<Bytes> out;
    out.reserve(utxos.size());
    for (const auto& [op, entry] : utxos) {
        ByteWriter w(50 + entry.compressed.serialized_size());
        serialize_record(w, entry);
        out.push_back(w.take());
    }
    return out;
}

Bytes utxo_stream(const chain::UtxoSet& utxos)
{
    ByteWriter w;
    for (const auto& [op, entry] : utxos) serialize_record(w, entry);
    return w.take();
}

Snapshot build_snapshot(const chain::UtxoSet& utxos, std::uint32_t height, const Hash256& block_id, bool obfuscation,
                        std::size_t max_chunk)
{
    std::vector<Bytes> records;
    records.reserve(utxos.size());
    for (const auto& [op, entry] : utxos) {
        ByteWriter w(50 + 33);
        if (obfuscation && scripts::is_obfuscatable(entry.compressed)) {
            auto copy = entry;
            copy.compressed = scripts::obfuscate(entry.compressed);
            serialize_record(w, copy);
        } else {
            serialize_record(w, entry);
        }
        records.push_back(w.take());
    }
    Snapshot snap;
    snap.chunks = chunk_records(records, max_chunk);
    snap.header = SnapshotHeader{height, block_id, static_cast<std::uint32_t>(snap.chunks.size())};
    snap.id = snap.compute_id();
    return snap;
}

Verdict verify_snapshot(const ChunkedObject& snap, const Hash256& expected_id, const SnapshotManifest* reference)
{
    Verdict v;
    if (snap.header.chunk_count != snap.chunks.size()) {
        v.reason = "header declares " + std::to_string(snap.header.chunk_count) + " chunks, found " +
                   std::to_string(snap.chunks.size());
        return v;
    }
    for (const auto& c : snap.chunks) {
        if (c.size() > kMaxChunkSize) {
            v.reason = "chunk exceeds 1 MiB";
            return v;
        }
    }
    const auto m = snap.manifest();
    if (m.id() == expected_id) {
        v.ok = true;
        return v;
    }
    v.reason = "snapshot id mismatch";
    if (reference && reference->id() == expected_id) {
        if (reference->header != m.header) {
            v.reason = "snapshot header differs from the reference";
            return v;
        }
        for (std::size_t i = 0; i < m.chunk_hashes.size(); ++i) {
            if (i >= reference->chunk_hashes.size() || m.chunk_hashes[i] != reference->chunk_hashes[i]) {
                v.first_mismatch = i;
                v.reason = "chunk " + std::to_string(i) + " does not match its advertised hash";
                break;
            }
        }
    }
    return v;
}

chain::UtxoSet apply_snapshot(const ChunkedObject& snap)
{
    chain::UtxoSet out;
    std::size_t base = 0;
    const chain::OutPoint* prev = nullptr;
    chain::OutPoint last;
    for (std::size_t c = 0; c < snap.chunks.size(); ++c) {
        ByteReader r(snap.chunks[c], base);
        while (!r.empty()) {
            const auto start = r.offset();
            chain::UtxoEntry e;
            try {
                e = parse_record(r);
            } catch (const DecodeError& err) {
                throw SnapshotParseError("malformed record", c, err.offset());
            }
            if (prev && !(last < e.outpoint)) throw SnapshotParseError("records out of canonical order", c, start);
            last = e.outpoint;
            prev = &last;
            out.insert(std::move(e));
        }
        base += snap.chunks[c].size();
    }
    return out;
}

Bytes encode_file(const ChunkedObject& obj)
{
    ByteWriter w(obj.serialized_size());
    obj.header.serialize(w);
    for (const auto& c : obj.chunks) w.blob(c);
    return w.take();
}

ChunkedObject decode_file(ByteSpan data)
{
    ByteReader r(data);
    ChunkedObject obj;
    obj.header = SnapshotHeader::parse(r);
    while (!r.empty()) {
        const auto at = r.offset();
        const auto len = r.u32();
        if (len > kMaxChunkSize) throw DecodeError("chunk length exceeds 1 MiB", at);
        const auto body = r.raw(len);
        obj.chunks.emplace_back(body.begin(), body.end());
    }
    return obj;
}

void write_snapshot_file(const std::filesystem::path& path, const ChunkedObject& obj)
{
    chain::write_file(path, encode_file(obj));
}

ChunkedObject read_snapshot_file(const std::filesystem::path& path) { return decode_file(chain::read_file(path)); }

void write_manifest_file(const std::filesystem::path& path, const SnapshotManifest& m)
{
    ByteWriter w;
    m.serialize(w);
    chain::write_file(path, w.view());
}

SnapshotManifest read_manifest_file(const std::filesystem::path& path)
{
    const auto data = chain::read_file(path);
    ByteReader r(data);
    auto m = SnapshotManifest::parse(r);
    r.expect_end("manifest");
    return m;
}

} // namespace coinprune::snapshot
