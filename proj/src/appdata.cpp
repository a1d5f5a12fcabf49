#include "coinprune/appdata.hpp"

#include <algorithm>
#include <stdexcept>

namespace coinprune::appdata {

void AppDataEntry::serialize(ByteWriter& w) const
{
    w.u8(static_cast<std::uint8_t>(payload.size()));
    w.raw(payload);
    w.raw(txid.span());
    w.raw(block_id.span());
}

AppDataEntry AppDataEntry::parse(ByteReader& r)
{
    AppDataEntry e;
    const auto len = r.u8();
    const auto body = r.raw(len);
    e.payload.assign(body.begin(), body.end());
    e.txid = Hash256::from_span(r.raw(32));
    e.block_id = Hash256::from_span(r.raw(32));
    return e;
}

Bytes op_return_payload(ByteSpan script)
{
    if (script.empty() || script[0] != scripts::op::RETURN) return {};
    const auto rest = script.subspan(1);
    auto pushes = scripts::parse_pushes(rest);
    if (!pushes) return Bytes(rest.begin(), rest.end());
    Bytes out;
    for (const auto& p : *pushes) out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::vector<AppDataEntry> extract_op_return(const chain::Block& block)
{
    std::vector<AppDataEntry> out;
    const auto block_id = block.id();
    for (const auto& tx : block.txs) {
        bool any = false;
        for (const auto& o : tx.outputs)
            if (scripts::classify_script(o.script) == scripts::ScriptClass::OpReturn) any = true;
        if (!any) continue;
        const auto txid = tx.txid();
        for (const auto& o : tx.outputs)
            if (scripts::classify_script(o.script) == scripts::ScriptClass::OpReturn)
                out.push_back(AppDataEntry{op_return_payload(o.script), txid, block_id});
    }
    return out;
}

void AppDataStore::append_block(const chain::Block& block, std::uint32_t height)
{
    if (!heights_.empty() && height < heights_.back())
        throw std::invalid_argument("application data must be appended in block order");
    for (auto& e : extract_op_return(block)) {
        if (e.payload.size() > chain::kMaxOpReturnPayload)
            throw std::invalid_argument("OP_RETURN payload above 80 bytes");
        entries_.push_back(std::move(e));
        heights_.push_back(height);
    }
}

bool AppDataStore::disconnect_block(const Hash256& block_id)
{
    if (entries_.empty() || entries_.back().block_id != block_id) return false;
    while (!entries_.empty() && entries_.back().block_id == block_id) {
        entries_.pop_back();
        heights_.pop_back();
    }
    return true;
}

void AppDataStore::truncate_after(std::uint32_t height)
{
    while (!heights_.empty() && heights_.back() > height) {
        heights_.pop_back();
        entries_.pop_back();
    }
}

std::vector<AppDataEntry> AppDataStore::lookup(const Hash256& txid) const
{
    std::vector<AppDataEntry> out;
    for (const auto& e : entries_)
        if (e.txid == txid) out.push_back(e);
    return out;
}

std::size_t AppDataStore::stored_bytes() const noexcept
{
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.serialized_size();
    return n;
}

snapshot::ChunkedObject AppDataStore::chunked(std::uint32_t height, const Hash256& block_id,
                                              std::size_t max_chunk) const
{
    const auto end = std::upper_bound(heights_.begin(), heights_.end(), height) - heights_.begin();
    std::vector<Bytes> records;
    records.reserve(static_cast<std::size_t>(end));
    for (std::ptrdiff_t i = 0; i < end; ++i) {
        ByteWriter w(entries_[static_cast<std::size_t>(i)].serialized_size());
        entries_[static_cast<std::size_t>(i)].serialize(w);
        records.push_back(w.take());
    }
    snapshot::ChunkedObject obj;
    obj.chunks = snapshot::chunk_records(records, max_chunk);
    obj.header = snapshot::SnapshotHeader{height, block_id, static_cast<std::uint32_t>(obj.chunks.size())};
    return obj;
}

AppDataStore AppDataStore::from_chunked(const snapshot::ChunkedObject& obj)
{
    AppDataStore store;
    std::size_t base = 0;
    for (std::size_t c = 0; c < obj.chunks.size(); ++c) {
        ByteReader r(obj.chunks[c], base);
        while (!r.empty()) {
            store.entries_.push_back(AppDataEntry::parse(r));
            store.heights_.push_back(obj.header.height);
        }
        base += obj.chunks[c].size();
    }
    return store;
}

std::vector<AppDataEntry> lookup(const AppDataStore& store, const Hash256& txid) { return store.lookup(txid); }

Hash256 combined_tag(const Hash256& snapshot_id, const Hash256& appdata_id)
{
    return hash256_concat(snapshot_id, appdata_id);
}

Hash256 combined_tag(ByteSpan snapshot_id, ByteSpan appdata_id)
{
    if (snapshot_id.size() != 32 || appdata_id.size() != 32)
        throw std::invalid_argument("combined tag needs two 32-byte identifiers");
    return combined_tag(Hash256::from_span(snapshot_id), Hash256::from_span(appdata_id));
}

} // namespace coinprune::appdata
