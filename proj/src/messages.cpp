#include "coinprune/messages.hpp"

#include <algorithm>

namespace coinprune::netsim {

std::string_view to_string(ObjectKind k) noexcept
{
    switch (k) {
    case ObjectKind::StateHeader: return "STATE_HEADER";
    case ObjectKind::StateChunk: return "STATE_CHUNK";
    case ObjectKind::AppDataChunk: return "APPDATA_CHUNK";
    case ObjectKind::Block: return "BLOCK";
    }
    return "?";
}

namespace {

constexpr std::size_t kInvItemSize = 33;

template <class... F> struct Overload : F... {
    using F::operator()...;
};
template <class... F> Overload(F...) -> Overload<F...>;

bool has_state_item(const std::vector<InvItem>& items)
{
    return std::any_of(items.begin(), items.end(), [](const InvItem& i) { return i.kind != ObjectKind::Block; });
}

} // namespace

std::string_view type_name(const Message& m) noexcept
{
    static constexpr std::string_view names[] = {"version", "verack", "getheaders", "headers",     "getstate",  "inv",
                                                 "getdata", "notfound", "stateheader", "statechunk", "block"};
    return names[m.index()];
}

std::size_t payload_size(const Message& m) noexcept
{
    return std::visit(Overload{
                          [](const msg::Version&) -> std::size_t { return 8 + 4; },
                          [](const msg::Verack&) -> std::size_t { return 0; },
                          [](const msg::GetHeaders& g) -> std::size_t { return 4 + 32 * g.locator.size(); },
                          [](const msg::Headers& h) -> std::size_t {
                              return 4 + (chain::BlockHeader::kSize + 4) * h.entries.size();
                          },
                          [](const msg::GetState&) -> std::size_t { return 0; },
                          [](const msg::Inv& i) -> std::size_t { return 4 + kInvItemSize * i.items.size(); },
                          [](const msg::GetData& g) -> std::size_t { return 4 + kInvItemSize * g.items.size(); },
                          [](const msg::NotFound& n) -> std::size_t { return 4 + kInvItemSize * n.items.size(); },
                          [](const msg::StateHeader&) -> std::size_t { return snapshot::SnapshotHeader::kSize; },
                          [](const msg::StateChunk& c) -> std::size_t { return 4 + 4 + c.bytes.size(); },
                          [](const msg::BlockMsg& b) -> std::size_t { return b.size; },
                      },
                      m);
}

bool is_state_message(const Message& m) noexcept
{
    return std::visit(Overload{
                          [](const msg::GetState&) { return true; },
                          [](const msg::StateHeader&) { return true; },
                          [](const msg::StateChunk&) { return true; },
                          [](const msg::Inv& i) { return has_state_item(i.items); },
                          [](const msg::GetData& g) { return has_state_item(g.items); },
                          [](const msg::NotFound& n) { return has_state_item(n.items); },
                          [](const auto&) { return false; },
                      },
                      m);
}

} // namespace coinprune::netsim
