#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <variant>
#include <vector>

#include "coinprune/chain.hpp"
#include "coinprune/snapshot.hpp"

namespace coinprune::netsim {

/// Service bit a node sets in Version when it speaks the state messages.
inline constexpr std::uint64_t kNodeNetwork = 1;
inline constexpr std::uint64_t kNodeCoinPrune = 1 << 12;

/// Every message is metered as this envelope plus its payload.
inline constexpr std::size_t kEnvelopeSize = 24;

enum class ObjectKind : std::uint8_t { StateHeader = 1, StateChunk = 2, AppDataChunk = 3, Block = 4 };
std::string_view to_string(ObjectKind k) noexcept;

struct InvItem {
    ObjectKind kind = ObjectKind::Block;
    Hash256 hash;

    bool operator==(const InvItem&) const = default;
};

struct HeaderEntry {
    chain::BlockHeader header;
    std::uint32_t tx_count = 0;
};

namespace msg {

struct Version {
    std::uint64_t services = kNodeNetwork;
    std::uint32_t height = 0;
};
struct Verack {};
struct GetHeaders {
    std::vector<Hash256> locator;
};
struct Headers {
    std::vector<HeaderEntry> entries;
};
struct GetState {};
struct Inv {
    std::vector<InvItem> items;
};
struct GetData {
    std::vector<InvItem> items;
};
struct NotFound {
    std::vector<InvItem> items;
};
struct StateHeader {
    snapshot::SnapshotHeader header;
};
struct StateChunk {
    std::uint32_t index = 0; // position among the chunks listed in the Inv, state chunks first
    Bytes bytes;
};
struct BlockMsg {
    std::shared_ptr<const chain::Block> block;
    std::size_t size = 0;
};

} // namespace msg

using Message = std::variant<msg::Version, msg::Verack, msg::GetHeaders, msg::Headers, msg::GetState, msg::Inv,
                             msg::GetData, msg::NotFound, msg::StateHeader, msg::StateChunk, msg::BlockMsg>;

std::string_view type_name(const Message& m) noexcept;
std::size_t payload_size(const Message& m) noexcept;
inline std::size_t wire_size(const Message& m) noexcept { return kEnvelopeSize + payload_size(m); }

/// GetState and STATE/APPDATA inventory travel only between CoinPrune peers.
bool is_state_message(const Message& m) noexcept;

} // namespace coinprune::netsim
