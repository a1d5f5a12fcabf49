#include "coinprune/netsim.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>

namespace coinprune::netsim {

using chain::Block;
using chain::PersistedHeaderRecord;
using chain::UtxoSet;

namespace {

template <class... F> struct Overload : F... {
    using F::operator()...;
};
template <class... F> Overload(F...) -> Overload<F...>;

using BlockPtr = std::shared_ptr<const Block>;

/// Everything a node serves for one pulse: the snapshot, the application data
/// object and the tag it reaffirms.
struct Candidate {
    std::uint32_t pulse = 0;
    snapshot::Snapshot snap;
    snapshot::ChunkedObject appdata;
    bool with_appdata = false;
    Hash256 tag;
    std::vector<InvItem> inventory;

    void finish()
    {
        tag = with_appdata ? appdata::combined_tag(snap.id, appdata.compute_id()) : snap.id;
        inventory.clear();
        inventory.push_back({ObjectKind::StateHeader, snap.header.hash()});
        for (const auto& c : snap.chunks) inventory.push_back({ObjectKind::StateChunk, hash256(c)});
        if (with_appdata)
            for (const auto& c : appdata.chunks) inventory.push_back({ObjectKind::AppDataChunk, hash256(c)});
    }

    const Bytes* chunk(std::uint32_t index) const
    {
        if (index < snap.chunks.size()) return &snap.chunks[index];
        index -= static_cast<std::uint32_t>(snap.chunks.size());
        if (with_appdata && index < appdata.chunks.size()) return &appdata.chunks[index];
        return nullptr;
    }
};
using CandidatePtr = std::shared_ptr<const Candidate>;

struct Node {
    std::uint32_t index = 0;
    NodeConfig cfg;
    std::set<std::uint32_t> peers;
    std::map<std::uint32_t, std::uint64_t> peer_services;
    std::set<std::uint32_t> version_sent;

    std::vector<PersistedHeaderRecord> records;
    std::map<Hash256, std::uint32_t> height_of;
    std::map<std::uint32_t, BlockPtr> blocks;
    std::set<Hash256> requested;
    UtxoSet utxos;
    appdata::AppDataStore appdata;
    std::vector<std::optional<Hash256>> coinbase_tags;

    std::map<std::uint32_t, UtxoSet> pending;
    std::map<std::uint32_t, CandidatePtr> candidates;
    CandidatePtr serving;
    bool pruned = false;
    std::uint32_t lowest_block = 0;

    std::uint64_t rx = 0;
    std::uint64_t tx = 0;
    std::uint64_t state_rx = 0;
    std::uint32_t sync_rounds = 0;
    std::uint32_t rejected = 0;

    std::vector<std::pair<std::uint32_t, Message>> inbox;

    std::uint64_t services() const { return kNodeNetwork | (cfg.coinprune ? kNodeCoinPrune : 0); }
    std::uint32_t tip_height() const { return static_cast<std::uint32_t>(records.size() - 1); }
    bool peer_is_coinprune(std::uint32_t p) const
    {
        const auto it = peer_services.find(p);
        return it != peer_services.end() && (it->second & kNodeCoinPrune) != 0;
    }
};

std::string short_hex(const Hash256& h) { return h.hex().substr(0, 16); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint32_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    std::uint32_t words[2];
    seq.generate(std::begin(words), std::end(words));
    return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

class Simulator {
public:
    explicit Simulator(const SimScenario& s)
        : sc_(s),
          params_(chain::ChainParams::defaults()),
          opts_{s.obfuscation, true},
          mine_rng_(mix_seed(s.seed, 1)),
          topo_rng_(mix_seed(s.seed, 2)),
          join_rng_(mix_seed(s.seed, 3))
    {
        auto profile = s.workload;
        profile.seed = mix_seed(s.seed, 4);
        gen_ = std::make_unique<chaingen::WorkloadGenerator>(profile, params_);
    }

    SimResult run();

private:
    struct Event {
        std::uint64_t tick;
        std::uint32_t from;
        std::uint32_t to;
        Message m;
    };

    // -- plumbing --------------------------------------------------------
    void trace(const std::string& line)
    {
        ++events_;
        Bytes buf(digest_.bytes.begin(), digest_.bytes.end());
        buf.insert(buf.end(), line.begin(), line.end());
        digest_ = hash256(buf);
        if (sc_.keep_trace_lines) lines_.push_back(line);
    }

    void state(std::uint32_t node, const std::string& what)
    {
        trace("t=" + std::to_string(now_) + " node=" + std::to_string(node) + " " + what);
    }

    void send(std::uint32_t from, std::uint32_t to, Message m)
    {
        if (is_state_message(m) && !(nodes_[from].cfg.coinprune && nodes_[from].peer_is_coinprune(to))) return;
        const auto size = wire_size(m);
        nodes_[from].tx += size;
        queue_.push_back(Event{now_ + sc_.latency, from, to, std::move(m)});
    }

    void run_until_idle()
    {
        while (!queue_.empty()) {
            auto ev = std::move(queue_.front());
            queue_.pop_front();
            now_ = std::max(now_, ev.tick);
            deliver(ev);
        }
    }

    void connect(std::uint32_t a, std::uint32_t b)
    {
        nodes_[a].peers.insert(b);
        nodes_[b].peers.insert(a);
    }

    void disconnect(std::uint32_t a, std::uint32_t b)
    {
        nodes_[a].peers.erase(b);
        nodes_[b].peers.erase(a);
        nodes_[a].peer_services.erase(b);
        nodes_[b].peer_services.erase(a);
        nodes_[a].version_sent.erase(b);
        nodes_[b].version_sent.erase(a);
    }

    void deliver(Event& ev);
    void handle(Node& n, std::uint32_t from, Message& m);

    // -- chain state -------------------------------------------------------
    void init_node(Node& n);
    bool accept_block(Node& n, const BlockPtr& b);
    void on_block_applied(Node& n, std::uint32_t height);
    CandidatePtr make_candidate(const Node& n, std::uint32_t pulse, const UtxoSet& at_pulse) const;
    void prune(Node& n, std::uint32_t snapshot_height);
    Bytes coinbase_extra(const Node& miner, std::uint32_t height) const;

    // -- joining ----------------------------------------------------------
    BootstrapResult bootstrap(Node& j);
    std::vector<std::uint32_t> pick_neighbors(const Node& j, std::uint32_t attempt, const std::set<std::uint32_t>& used);
    void handshake(Node& j, const std::vector<std::uint32_t>& peers);
    struct HeaderView {
        std::vector<HeaderEntry> entries; // heights 1..tip
        chain::HeaderChainResult chain;
        std::vector<PersistedHeaderRecord> records;
    };
    std::optional<HeaderView> fetch_headers(Node& j, const std::vector<std::uint32_t>& peers);
    bool fetch_blocks(Node& j, const std::vector<std::uint32_t>& peers, const HeaderView& hv, std::uint32_t from_height,
                      std::map<std::uint32_t, BlockPtr>& out);
    std::string try_snapshot(Node& j, const std::vector<std::uint32_t>& peers, BootstrapResult& res, bool& fallback);
    std::string full_sync(Node& j, const std::vector<std::uint32_t>& peers, BootstrapResult& res);

    NodeReport report(const Node& n) const;

    const SimScenario& sc_;
    chain::ChainParams params_;
    chain::ValidationOptions opts_;
    std::mt19937_64 mine_rng_;
    std::mt19937_64 topo_rng_;
    std::mt19937_64 join_rng_;
    std::unique_ptr<chaingen::WorkloadGenerator> gen_;

    std::vector<Node> nodes_;
    std::deque<Event> queue_;
    std::uint64_t now_ = 0;
    Hash256 digest_;
    std::uint64_t events_ = 0;
    std::vector<std::string> lines_;
    std::vector<BlockPtr> chain_;
};

// ---------------------------------------------------------------------------

void Simulator::deliver(Event& ev)
{
    auto& n = nodes_[ev.to];
    const auto size = wire_size(ev.m);
    n.rx += size;
    if (is_state_message(ev.m)) ++n.state_rx;
    char buf[128];
    std::snprintf(buf, sizeof buf, "t=%llu msg %u>%u %.*s %zu", static_cast<unsigned long long>(now_), ev.from, ev.to,
                  static_cast<int>(type_name(ev.m).size()), type_name(ev.m).data(), size);
    trace(buf);
    if (!n.peers.count(ev.from)) return; // link already closed
    handle(n, ev.from, ev.m);
}

void Simulator::handle(Node& n, std::uint32_t from, Message& m)
{
    const bool joining = n.cfg.role == Role::Joining;
    std::visit(Overload{
                   [&](msg::Version& v) {
                       n.peer_services[from] = v.services;
                       if (!n.version_sent.count(from)) {
                           n.version_sent.insert(from);
                           send(n.index, from, msg::Version{n.services(), n.tip_height()});
                       }
                       send(n.index, from, msg::Verack{});
                   },
                   [&](msg::Verack&) {},
                   [&](msg::GetHeaders& g) {
                       std::uint32_t start = 0;
                       for (const auto& id : g.locator)
                           if (const auto it = n.height_of.find(id); it != n.height_of.end()) {
                               start = std::max(start, it->second);
                           }
                       msg::Headers h;
                       for (std::uint32_t i = start + 1; i < n.records.size(); ++i)
                           h.entries.push_back(HeaderEntry{n.records[i].header, n.records[i].tx_count});
                       send(n.index, from, std::move(h));
                   },
                   [&](msg::GetState&) {
                       if (!n.cfg.coinprune) return;
                       msg::Inv inv;
                       if (n.serving) inv.items = n.serving->inventory;
                       send(n.index, from, std::move(inv));
                   },
                   [&](msg::Inv& inv) {
                       if (joining) {
                           n.inbox.emplace_back(from, std::move(m));
                           return;
                       }
                       msg::GetData want;
                       for (const auto& item : inv.items)
                           if (item.kind == ObjectKind::Block && !n.height_of.count(item.hash) &&
                               !n.requested.count(item.hash)) {
                               n.requested.insert(item.hash);
                               want.items.push_back(item);
                           }
                       if (!want.items.empty()) send(n.index, from, std::move(want));
                   },
                   [&](msg::GetData& g) {
                       msg::NotFound missing;
                       for (const auto& item : g.items) {
                           if (item.kind == ObjectKind::Block) {
                               const auto it = n.height_of.find(item.hash);
                               const auto b = it == n.height_of.end() ? n.blocks.end() : n.blocks.find(it->second);
                               if (b == n.blocks.end()) {
                                   missing.items.push_back(item);
                                   continue;
                               }
                               send(n.index, from, msg::BlockMsg{b->second, b->second->serialized_size()});
                               continue;
                           }
                           const auto& inv = n.serving ? n.serving->inventory : std::vector<InvItem>{};
                           const auto pos = std::find(inv.begin(), inv.end(), item);
                           if (pos == inv.end()) {
                               missing.items.push_back(item);
                               continue;
                           }
                           if (item.kind == ObjectKind::StateHeader) {
                               send(n.index, from, msg::StateHeader{n.serving->snap.header});
                               continue;
                           }
                           const auto index = static_cast<std::uint32_t>(pos - inv.begin() - 1);
                           Bytes bytes = *n.serving->chunk(index);
                           if (n.cfg.bogus_chunks && !bytes.empty()) bytes[bytes.size() / 2] ^= 0x5a;
                           send(n.index, from, msg::StateChunk{index, std::move(bytes)});
                       }
                       if (!missing.items.empty()) send(n.index, from, std::move(missing));
                   },
                   [&](msg::BlockMsg& b) {
                       if (joining) {
                           n.inbox.emplace_back(from, std::move(m));
                           return;
                       }
                       const auto id = b.block->id();
                       n.requested.erase(id);
                       if (n.height_of.count(id)) return;
                       if (!accept_block(n, b.block)) return;
                       for (const auto p : n.peers)
                           if (p != from) send(n.index, p, msg::Inv{{InvItem{ObjectKind::Block, id}}});
                   },
                   [&](auto&) {
                       if (joining) n.inbox.emplace_back(from, std::move(m));
                   },
               },
               m);
}

// ---------------------------------------------------------------------------

void Simulator::init_node(Node& n)
{
    const auto genesis = chain_[0];
    n.records.push_back(chain::validate_and_apply_block(n.utxos, *genesis, nullptr, params_, opts_));
    n.height_of.emplace(genesis->id(), 0);
    n.blocks.emplace(0, genesis);
    n.coinbase_tags.push_back(std::nullopt);
    if (sc_.appdata && n.cfg.coinprune) n.appdata.append_block(*genesis, 0);
}

bool Simulator::accept_block(Node& n, const BlockPtr& b)
{
    const auto& parent = n.records.back();
    if (b->header.prev_hash != parent.block_id) {
        ++n.rejected;
        state(n.index, "reject reason=not_on_tip");
        return false;
    }
    try {
        n.records.push_back(chain::validate_and_apply_block(n.utxos, *b, &parent, params_, opts_));
    } catch (const chain::BlockValidationError& e) {
        ++n.rejected;
        state(n.index, std::string("reject reason=") + std::string(chain::to_string(e.code())));
        return false;
    }
    const auto h = n.tip_height();
    n.height_of.emplace(n.records.back().block_id, h);
    n.blocks.emplace(h, b);
    n.coinbase_tags.push_back(coordination::parse_coinbase_tag(b->txs[0].inputs[0].unlock));
    if (sc_.appdata && n.cfg.coinprune) n.appdata.append_block(*b, h);
    on_block_applied(n, h);
    return true;
}

CandidatePtr Simulator::make_candidate(const Node& n, std::uint32_t pulse, const UtxoSet& at_pulse) const
{
    const auto height = coordination::pulse_height(pulse, sc_.pulse);
    const auto block_id = n.records[height].block_id;
    auto c = std::make_shared<Candidate>();
    c->pulse = pulse;
    c->with_appdata = sc_.appdata;
    if (sc_.appdata) c->appdata = n.appdata.chunked(height, block_id, sc_.chunk_size);
    if (n.cfg.adversarial) {
        // Coordinated forgery: the genuine set plus one fabricated output.
        UtxoSet forged = at_pulse;
        chain::UtxoEntry fake;
        ByteWriter w;
        w.raw(to_bytes("coinprune-forged-output"));
        w.u32(pulse);
        fake.outpoint = chain::OutPoint{hash256(w.view()), 0};
        fake.amount = 21'000'000ull * 100'000'000ull;
        fake.height = height;
        fake.compressed = scripts::compress(scripts::p2pkh_script(hash160(to_bytes("adversary"))));
        forged.insert(fake);
        c->snap = snapshot::build_snapshot(forged, height, block_id, sc_.obfuscation, sc_.chunk_size);
    } else {
        c->snap = snapshot::build_snapshot(at_pulse, height, block_id, sc_.obfuscation, sc_.chunk_size);
    }
    c->finish();
    return c;
}

void Simulator::on_block_applied(Node& n, std::uint32_t h)
{
    if (!n.cfg.coinprune) return;
    const auto& p = sc_.pulse;
    if (h > 0 && h % p.delta_p == 0) n.pending.emplace(h / p.delta_p, n.utxos);

    // Snapshot construction once the pulse block is delta_d deep.
    if (h > p.delta_d && (h - p.delta_d) % p.delta_p == 0) {
        const auto pulse = (h - p.delta_d) / p.delta_p;
        if (const auto it = n.pending.find(pulse); it != n.pending.end()) {
            auto c = make_candidate(n, pulse, it->second);
            state(n.index, "snapshot pulse=" + std::to_string(pulse) + " id=" + short_hex(c->snap.id) +
                               " tag=" + short_hex(c->tag));
            n.candidates[pulse] = std::move(c);
            n.pending.erase(it);
        }
    }

    // Window close: tally locally.
    const auto pulse = coordination::window_pulse(h, p);
    if (!pulse || coordination::reaffirmation_window(*pulse, p).last != h) return;
    const auto win = coordination::reaffirmation_window(*pulse, p);
    const std::span<const std::optional<Hash256>> tags(n.coinbase_tags.data() + win.first, p.delta_r);
    const auto outcome = coordination::tally_window(tags, p);
    const auto cand = n.candidates.find(*pulse);
    const bool mine = cand != n.candidates.end() && outcome.accepted() && outcome.tag == cand->second->tag;
    state(n.index, "pulse=" + std::to_string(*pulse) + " outcome=" + (outcome.accepted() ? "accepted" : "skipped") +
                       " count=" + std::to_string(outcome.count) + (mine ? " own" : ""));
    if (cand != n.candidates.end() && (mine || n.cfg.adversarial)) {
        n.serving = cand->second;
        if (mine && n.cfg.prune) prune(n, coordination::pulse_height(*pulse, p));
    }
    n.candidates.erase(n.candidates.begin(), n.candidates.upper_bound(*pulse));
}

void Simulator::prune(Node& n, std::uint32_t snapshot_height)
{
    if (!n.serving || n.serving->snap.header.height != snapshot_height) {
        state(n.index, "prune refused height=" + std::to_string(snapshot_height));
        return;
    }
    n.blocks.erase(n.blocks.begin(), n.blocks.lower_bound(snapshot_height));
    n.pruned = true;
    n.lowest_block = snapshot_height;
    state(n.index, "prune below=" + std::to_string(snapshot_height));
}

Bytes Simulator::coinbase_extra(const Node& miner, std::uint32_t height) const
{
    if (!miner.cfg.coinprune) return to_bytes("/legacy-pool/");
    const auto pulse = coordination::window_pulse(height, sc_.pulse);
    if (!pulse) return {};
    const auto it = miner.candidates.find(*pulse);
    if (it == miner.candidates.end()) return {};
    return coordination::encode_coinbase_tag(it->second->tag);
}

// ---------------------------------------------------------------------------

std::vector<std::uint32_t> Simulator::pick_neighbors(const Node& j, std::uint32_t attempt,
                                                     const std::set<std::uint32_t>& used)
{
    if (attempt == 1 && !sc_.joiner_peers.empty()) {
        std::vector<std::uint32_t> fixed(sc_.joiner_peers);
        std::sort(fixed.begin(), fixed.end());
        fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
        return fixed;
    }
    std::vector<std::uint32_t> fresh;
    std::vector<std::uint32_t> stale;
    for (const auto& n : nodes_) {
        if (n.cfg.role == Role::Joining) continue;
        if (attempt == 1 && sc_.faults.joiner_adversarial_neighbors && !n.cfg.adversarial) continue;
        (used.count(n.index) ? stale : fresh).push_back(n.index);
    }
    if (fresh.empty()) return {};
    std::shuffle(fresh.begin(), fresh.end(), join_rng_);
    std::shuffle(stale.begin(), stale.end(), join_rng_);
    fresh.insert(fresh.end(), stale.begin(), stale.end());
    fresh.resize(std::min<std::size_t>(fresh.size(), j.cfg.neighbor_count));
    std::sort(fresh.begin(), fresh.end());
    return fresh;
}

void Simulator::handshake(Node& j, const std::vector<std::uint32_t>& peers)
{
    for (const auto p : peers) {
        connect(j.index, p);
        j.version_sent.insert(p);
        send(j.index, p, msg::Version{j.services(), 0});
    }
    run_until_idle();
    j.inbox.clear();
}

std::optional<Simulator::HeaderView> Simulator::fetch_headers(Node& j, const std::vector<std::uint32_t>& peers)
{
    for (const auto p : peers) send(j.index, p, msg::GetHeaders{{params_.genesis_id}});
    run_until_idle();
    std::optional<HeaderView> best;
    for (auto& [from, m] : j.inbox) {
        auto* h = std::get_if<msg::Headers>(&m);
        if (!h) continue;
        std::vector<chain::BlockHeader> headers{chain_[0]->header};
        for (const auto& e : h->entries) headers.push_back(e.header);
        try {
            auto result = chain::verify_headerchain(headers, params_);
            if (result.best_chain.size() != headers.size()) continue; // side branches are not served here
            if (best && result.cumulative_work <= best->chain.cumulative_work) continue;
            HeaderView hv;
            hv.entries = std::move(h->entries);
            hv.chain = std::move(result);
            best = std::move(hv);
        } catch (const chain::HeaderChainError& e) {
            state(j.index, "headers_rejected from=" + std::to_string(from) + " " + e.what());
        }
    }
    j.inbox.clear();
    if (!best) return std::nullopt;
    best->records.push_back(chain::make_record(chain_[0]->header, static_cast<std::uint32_t>(chain_[0]->txs.size()),
                                               nullptr));
    for (const auto& e : best->entries)
        best->records.push_back(chain::make_record(e.header, e.tx_count, &best->records.back()));
    state(j.index, "headerchain tip=" + std::to_string(best->chain.tip_height));
    return best;
}

bool Simulator::fetch_blocks(Node& j, const std::vector<std::uint32_t>& peers, const HeaderView& hv,
                             std::uint32_t from_height, std::map<std::uint32_t, BlockPtr>& out)
{
    const auto tip = hv.chain.tip_height;
    std::map<Hash256, std::uint32_t> wanted;
    std::map<std::uint32_t, std::size_t> tries; // height -> peers asked
    for (std::uint32_t h = from_height; h <= tip; ++h) {
        wanted.emplace(hv.chain.best_chain[h], h);
        tries[h] = 1;
        send(j.index, peers[h % peers.size()], msg::GetData{{InvItem{ObjectKind::Block, hv.chain.best_chain[h]}}});
    }
    while (true) {
        run_until_idle();
        bool resent = false;
        auto inbox = std::move(j.inbox);
        j.inbox.clear();
        for (auto& [from, m] : inbox) {
            if (auto* b = std::get_if<msg::BlockMsg>(&m)) {
                const auto it = wanted.find(b->block->id());
                if (it != wanted.end()) out[it->second] = b->block;
            } else if (auto* nf = std::get_if<msg::NotFound>(&m)) {
                for (const auto& item : nf->items) {
                    const auto it = wanted.find(item.hash);
                    if (it == wanted.end() || out.count(it->second)) continue;
                    auto& t = tries[it->second];
                    if (t >= peers.size()) return false;
                    const auto next = peers[(it->second + t) % peers.size()];
                    ++t;
                    send(j.index, next, msg::GetData{{item}});
                    resent = true;
                }
            }
        }
        if (!resent) break;
    }
    return out.size() == tip + 1 - from_height;
}

std::string Simulator::try_snapshot(Node& j, const std::vector<std::uint32_t>& peers, BootstrapResult& res,
                                    bool& fallback)
{
    fallback = false;
    std::vector<std::uint32_t> cp_peers;
    for (const auto p : peers)
        if (j.peer_is_coinprune(p)) cp_peers.push_back(p);
    if (cp_peers.empty()) {
        fallback = true;
        return "no CoinPrune neighbors";
    }

    // 1. Advertisements, grouped by identical inventories.
    for (const auto p : cp_peers) send(j.index, p, msg::GetState{});
    run_until_idle();
    struct Group {
        std::vector<InvItem> items;
        std::vector<std::uint32_t> advertisers;
        std::optional<snapshot::SnapshotHeader> header;
        Hash256 snap_id, tag;
    };
    std::vector<Group> groups;
    for (auto& [from, m] : j.inbox) {
        auto* inv = std::get_if<msg::Inv>(&m);
        if (!inv || inv->items.empty() || inv->items[0].kind != ObjectKind::StateHeader) continue;
        auto g = std::find_if(groups.begin(), groups.end(), [&](const Group& x) { return x.items == inv->items; });
        if (g == groups.end()) {
            groups.push_back(Group{inv->items, {}, std::nullopt, {}, {}});
            g = groups.end() - 1;
        }
        g->advertisers.push_back(from);
    }
    j.inbox.clear();
    if (groups.empty()) {
        fallback = true;
        return "no snapshot advertised";
    }

    // 2. Headers of every advertised snapshot, for ids and tie breaks.
    for (const auto& g : groups) send(j.index, g.advertisers.front(), msg::GetData{{g.items.front()}});
    run_until_idle();
    for (auto& [from, m] : j.inbox) {
        auto* sh = std::get_if<msg::StateHeader>(&m);
        if (!sh) continue;
        for (auto& g : groups)
            if (g.advertisers.front() == from && !g.header && sh->header.hash() == g.items.front().hash)
                g.header = sh->header;
    }
    j.inbox.clear();
    for (auto& g : groups) {
        if (!g.header) continue;
        std::vector<Hash256> state_hashes, app_hashes;
        for (std::size_t i = 1; i < g.items.size(); ++i)
            (g.items[i].kind == ObjectKind::StateChunk ? state_hashes : app_hashes).push_back(g.items[i].hash);
        g.snap_id = snapshot::layered_id(g.header->hash(), state_hashes);
        if (sc_.appdata) {
            const snapshot::SnapshotHeader ah{g.header->height, g.header->block_id,
                                              static_cast<std::uint32_t>(app_hashes.size())};
            g.tag = appdata::combined_tag(g.snap_id, snapshot::layered_id(ah.hash(), app_hashes));
        } else {
            g.tag = g.snap_id;
        }
    }
    std::erase_if(groups, [](const Group& g) { return !g.header; });
    if (groups.empty()) return "no valid state header received";

    // Strict plurality; ties prefer the higher snapshot, then the smaller tag.
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        if (a.advertisers.size() != b.advertisers.size()) return a.advertisers.size() > b.advertisers.size();
        if (a.header->height != b.header->height) return a.header->height > b.header->height;
        return a.tag < b.tag;
    });
    const auto& g = groups.front();
    const auto& hdr = *g.header;
    res.snapshot_id = g.snap_id;
    res.tag = g.tag;
    res.snapshot_height = hdr.height;
    state(j.index, "choose tag=" + short_hex(g.tag) + " height=" + std::to_string(hdr.height) +
                       " advertisers=" + std::to_string(g.advertisers.size()));

    // 3. Headerchain and consistency of the snapshot header.
    auto hv = fetch_headers(j, peers);
    if (!hv) return "no valid headerchain";
    const auto& p = sc_.pulse;
    const auto tip = hv->chain.tip_height;
    if (hdr.height == 0 || hdr.height % p.delta_p != 0 || hdr.height > tip ||
        hv->chain.best_chain[hdr.height] != hdr.block_id)
        return "snapshot header inconsistent with headerchain";
    const auto pulse = hdr.height / p.delta_p;
    const auto win = coordination::reaffirmation_window(pulse, p);
    if (tip < win.last) return "reaffirmation window still open";

    // 4. Chunks, spread across the advertisers and verified on arrival.
    const auto count = static_cast<std::uint32_t>(g.items.size() - 1);
    std::vector<std::optional<Bytes>> chunks(count);
    std::vector<std::vector<std::uint32_t>> asked(count);
    const auto& adv = g.advertisers;
    for (std::uint32_t c = 0; c < count; ++c) {
        asked[c].push_back(adv[c % adv.size()]);
        send(j.index, asked[c].back(), msg::GetData{{g.items[c + 1]}});
    }
    std::set<std::uint32_t> faulty; // served a chunk that failed its hash
    const auto retry = [&](std::uint32_t c) -> bool {
        if (asked[c].size() > sc_.chunk_retries) return false;
        for (std::size_t k = 0; k < adv.size(); ++k) {
            const auto cand = adv[(c + k) % adv.size()];
            if (faulty.count(cand)) continue;
            if (std::find(asked[c].begin(), asked[c].end(), cand) != asked[c].end()) continue;
            asked[c].push_back(cand);
            send(j.index, cand, msg::GetData{{g.items[c + 1]}});
            return true;
        }
        return false;
    };
    std::string failure;
    while (failure.empty()) {
        run_until_idle();
        bool pending = false;
        auto inbox = std::move(j.inbox);
        j.inbox.clear();
        for (auto& [from, m] : inbox) {
            std::optional<std::uint32_t> redo;
            if (auto* sc = std::get_if<msg::StateChunk>(&m)) {
                const auto c = sc->index;
                if (c >= count || chunks[c] || asked[c].back() != from) continue;
                if (hash256(sc->bytes) == g.items[c + 1].hash) {
                    chunks[c] = std::move(sc->bytes);
                    continue;
                }
                ++res.chunk_mismatches;
                faulty.insert(from);
                state(j.index, "chunk_mismatch index=" + std::to_string(c) + " from=" + std::to_string(from));
                redo = c;
            } else if (auto* nf = std::get_if<msg::NotFound>(&m)) {
                for (const auto& item : nf->items)
                    for (std::uint32_t c = 0; c < count; ++c)
                        if (g.items[c + 1] == item && !chunks[c] && asked[c].back() == from) redo = c;
            }
            if (!redo) continue;
            if (!retry(*redo)) {
                failure = "chunk " + std::to_string(*redo) + " failed verification on every allowed neighbor";
                break;
            }
            pending = true;
        }
        if (failure.empty() && !pending) break;
    }
    if (!failure.empty()) {
        run_until_idle();
        j.inbox.clear();
        return failure;
    }
    for (std::uint32_t c = 0; c < count; ++c)
        if (!chunks[c]) return "chunk " + std::to_string(c) + " never arrived";

    snapshot::ChunkedObject snap_obj{hdr, {}};
    snapshot::ChunkedObject app_obj;
    for (std::uint32_t c = 0; c < count; ++c)
        (g.items[c + 1].kind == ObjectKind::StateChunk ? snap_obj.chunks : app_obj.chunks).push_back(*chunks[c]);
    app_obj.header = snapshot::SnapshotHeader{hdr.height, hdr.block_id, static_cast<std::uint32_t>(app_obj.chunks.size())};
    const auto verdict = snapshot::verify_snapshot(snap_obj, g.snap_id);
    if (!verdict.ok) return "snapshot verification failed: " + verdict.reason;
    if (sc_.appdata && appdata::combined_tag(snap_obj.compute_id(), app_obj.compute_id()) != g.tag)
        return "application data does not match the tag";

    // 5. Apply.
    UtxoSet utxos;
    appdata::AppDataStore store;
    try {
        utxos = snapshot::apply_snapshot(snap_obj);
        if (sc_.appdata) store = appdata::AppDataStore::from_chunked(app_obj);
    } catch (const DecodeError& e) {
        return std::string("malformed state object: ") + e.what();
    }
    state(j.index, "applied snapshot utxos=" + std::to_string(utxos.size()));

    // 6. Chaintail.
    std::map<std::uint32_t, BlockPtr> tail;
    if (!fetch_blocks(j, peers, *hv, hdr.height + 1, tail)) return "chaintail unavailable";
    for (auto& [h, b] : tail) {
        try {
            const auto rec = chain::validate_and_apply_block(utxos, *b, &hv->records[h - 1], params_, opts_);
            if (rec.block_id != hv->chain.best_chain[h]) return "chaintail block off the headerchain";
        } catch (const chain::BlockValidationError& e) {
            return std::string("invalid chaintail block: ") + e.what();
        }
        if (sc_.appdata) store.append_block(*b, h);
    }

    // 7. Reaffirmation.
    std::vector<std::optional<Hash256>> tags;
    for (auto h = win.first; h <= win.last; ++h)
        tags.push_back(coordination::parse_coinbase_tag(tail.at(h)->txs[0].inputs[0].unlock));
    const auto outcome = coordination::tally_window(tags, p);
    res.verified_outcome = outcome;
    if (!outcome.accepted() || outcome.tag != g.tag) return "unreaffirmed snapshot";

    res.utxos = std::move(utxos);
    res.appdata = std::move(store);
    res.records = std::move(hv->records);
    j.records = res.records;
    j.blocks = std::move(tail);
    j.lowest_block = hdr.height + 1;
    j.pruned = true;
    auto held = std::make_shared<Candidate>();
    held->snap.header = snap_obj.header;
    held->snap.chunks = std::move(snap_obj.chunks);
    held->snap.id = g.snap_id;
    held->with_appdata = sc_.appdata;
    held->appdata = std::move(app_obj);
    held->tag = g.tag;
    j.serving = std::move(held);
    return {};
}

std::string Simulator::full_sync(Node& j, const std::vector<std::uint32_t>& peers, BootstrapResult& res)
{
    auto hv = fetch_headers(j, peers);
    if (!hv) return "no valid headerchain";
    std::map<std::uint32_t, BlockPtr> blocks;
    if (!fetch_blocks(j, peers, *hv, 1, blocks)) return "blocks unavailable for full synchronization";
    UtxoSet utxos;
    appdata::AppDataStore store;
    std::vector<PersistedHeaderRecord> records;
    records.push_back(chain::validate_and_apply_block(utxos, *chain_[0], nullptr, params_, opts_));
    if (sc_.appdata) store.append_block(*chain_[0], 0);
    for (auto& [h, b] : blocks) {
        try {
            records.push_back(chain::validate_and_apply_block(utxos, *b, &records.back(), params_, opts_));
        } catch (const chain::BlockValidationError& e) {
            return std::string("invalid block: ") + e.what();
        }
        if (sc_.appdata) store.append_block(*b, h);
    }
    res.utxos = std::move(utxos);
    res.appdata = std::move(store);
    res.records = records;
    j.records = std::move(records);
    j.blocks = std::move(blocks);
    j.blocks.emplace(0, chain_[0]);
    return {};
}

BootstrapResult Simulator::bootstrap(Node& j)
{
    BootstrapResult res;
    const auto start = now_;
    std::set<std::uint32_t> used;
    state(j.index, "bootstrap start");
    for (std::uint32_t attempt = 1; attempt <= sc_.max_attempts; ++attempt) {
        res.attempts = attempt;
        const auto peers = pick_neighbors(j, attempt, used);
        if (peers.empty()) {
            res.reason = attempt == 1 ? "disconnected: no reachable neighbors" : "no fresh neighbors left";
            break;
        }
        used.insert(peers.begin(), peers.end());
        handshake(j, peers);

        std::string failure;
        bool fallback = !j.cfg.coinprune;
        if (j.cfg.coinprune) failure = try_snapshot(j, peers, res, fallback);
        if (fallback) {
            state(j.index, "full_sync reason=" + (failure.empty() ? std::string("legacy node") : failure));
            failure = full_sync(j, peers, res);
            if (failure.empty()) res.kind = BootstrapResult::Kind::FullSync;
        } else if (failure.empty()) {
            res.kind = BootstrapResult::Kind::Accepted;
        }
        for (const auto p : peers) disconnect(j.index, p);
        if (failure.empty()) {
            res.reason.clear();
            break;
        }
        state(j.index, "abort attempt=" + std::to_string(attempt) + " reason=" + failure);
        res.aborted_attempts.push_back(failure);
        res.reason = failure;
        res.snapshot_id.reset();
        res.tag.reset();
        res.verified_outcome.reset();
        res.snapshot_height = 0;
    }
    j.sync_rounds = static_cast<std::uint32_t>(now_ - start);
    state(j.index, "bootstrap end result=" + std::string(to_string(res.kind)));
    return res;
}

// ---------------------------------------------------------------------------

NodeReport Simulator::report(const Node& n) const
{
    NodeReport r;
    r.node = n.index;
    r.role = n.cfg.role;
    r.coinprune = n.cfg.coinprune;
    r.adversarial = n.cfg.adversarial;
    r.pruned = n.pruned;
    r.storage.header_index = PersistedHeaderRecord::kSize * n.records.size();
    if (n.serving && n.cfg.coinprune) r.storage.snapshot = n.serving->snap.serialized_size();
    for (const auto& [h, b] : n.blocks) r.storage.blocks += b->serialized_size();
    r.bytes_rx = n.rx;
    r.bytes_tx = n.tx;
    r.sync_rounds = n.sync_rounds;
    r.state_messages_rx = n.state_rx;
    r.lowest_block = n.blocks.empty() ? 0 : n.blocks.begin()->first;
    r.rejected_blocks = n.rejected;
    return r;
}

SimResult Simulator::run()
{
    sc_.validate();
    chain_.push_back(std::make_shared<const Block>(gen_->genesis()));

    nodes_.resize(sc_.nodes.size());
    std::uint32_t bogus_left = sc_.faults.bogus_chunk_servers;
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
        nodes_[i].index = i;
        nodes_[i].cfg = sc_.nodes[i];
        if (bogus_left > 0 && nodes_[i].cfg.coinprune && !nodes_[i].cfg.adversarial &&
            nodes_[i].cfg.role != Role::Joining) {
            nodes_[i].cfg.bogus_chunks = true;
            --bogus_left;
        }
        init_node(nodes_[i]);
    }

    // Topology among the established nodes.
    std::vector<std::uint32_t> established;
    for (const auto& n : nodes_)
        if (n.cfg.role != Role::Joining) established.push_back(n.index);
    for (const auto a : established) {
        std::vector<std::uint32_t> others;
        for (const auto b : established)
            if (b != a) others.push_back(b);
        std::shuffle(others.begin(), others.end(), topo_rng_);
        others.resize(std::min<std::size_t>(others.size(), nodes_[a].cfg.neighbor_count));
        for (const auto b : others) connect(a, b);
    }
    if (!established.empty()) {
        std::set<std::uint32_t> seen{established.front()};
        std::vector<std::uint32_t> stack{established.front()};
        while (!stack.empty()) {
            const auto x = stack.back();
            stack.pop_back();
            for (const auto y : nodes_[x].peers)
                if (seen.insert(y).second) stack.push_back(y);
        }
        if (seen.size() != established.size()) throw std::invalid_argument("scenario topology is disconnected");
    }
    for (const auto a : established)
        for (const auto b : nodes_[a].peers)
            if (a < b) {
                nodes_[a].version_sent.insert(b);
                send(a, b, msg::Version{nodes_[a].services(), 0});
            }
    run_until_idle();

    // Mining rounds; each block settles before the next one is found.
    std::vector<std::uint32_t> miners;
    std::vector<double> power;
    for (const auto& n : nodes_)
        if (n.cfg.role == Role::Miner) {
            miners.push_back(n.index);
            power.push_back(n.cfg.hash_power);
        }
    std::discrete_distribution<std::size_t> pick(power.begin(), power.end());
    for (std::uint32_t h = 1; h < sc_.blocks; ++h) {
        ++now_;
        auto& m = nodes_[miners[pick(mine_rng_)]];
        const auto extra = coinbase_extra(m, h);
        auto block = std::make_shared<const Block>(gen_->next_block(m.records.back(), extra));
        chain_.push_back(block);
        state(m.index, "mined height=" + std::to_string(h) + " id=" + short_hex(block->id()));
        if (!accept_block(m, block)) throw std::logic_error("miner rejected its own block");
        for (const auto p : m.peers) send(m.index, p, msg::Inv{{InvItem{ObjectKind::Block, block->id()}}});
        run_until_idle();
    }

    SimResult out;
    out.scenario_id = sc_.id;
    out.seed = sc_.seed;

    // Pulse outcomes straight from the mined coinbases.
    for (std::uint32_t i = 1;; ++i) {
        if (static_cast<std::uint64_t>(i) * sc_.pulse.delta_p >= sc_.blocks) break;
        const auto win = coordination::reaffirmation_window(i, sc_.pulse);
        if (win.last >= sc_.blocks) break;
        std::vector<std::optional<Hash256>> tags;
        for (auto h = win.first; h <= win.last; ++h)
            tags.push_back(coordination::parse_coinbase_tag(chain_[h]->txs[0].inputs[0].unlock));
        PulseRecord rec;
        rec.index = i;
        rec.height = coordination::pulse_height(i, sc_.pulse);
        rec.outcome = coordination::tally_window(tags, sc_.pulse);
        out.pulses.push_back(rec);
    }
    // Genuine tags, rebuilt from a from-genesis replay.
    if (!out.pulses.empty()) {
        UtxoSet replay;
        appdata::AppDataStore store;
        std::size_t next = 0;
        const PersistedHeaderRecord* parent = nullptr;
        std::vector<PersistedHeaderRecord> recs;
        recs.reserve(chain_.size());
        for (std::uint32_t h = 0; h < chain_.size() && next < out.pulses.size(); ++h) {
            recs.push_back(chain::validate_and_apply_block(replay, *chain_[h], parent, params_, opts_));
            parent = &recs.back();
            if (sc_.appdata) store.append_block(*chain_[h], h);
            if (h != out.pulses[next].height) continue;
            auto snap = snapshot::build_snapshot(replay, h, chain_[h]->id(), sc_.obfuscation, sc_.chunk_size);
            out.pulses[next].genuine_tag =
                sc_.appdata ? appdata::combined_tag(snap.id, store.chunked(h, chain_[h]->id(), sc_.chunk_size).compute_id())
                            : snap.id;
            ++next;
        }
    }

    for (auto& n : nodes_)
        if (n.cfg.role == Role::Joining) out.bootstraps.emplace(n.index, bootstrap(n));

    for (const auto& n : nodes_) {
        auto r = report(n);
        if (n.cfg.coinprune && sc_.appdata) {
            const auto& store = n.cfg.role == Role::Joining ? out.bootstraps.at(n.index).appdata : n.appdata;
            r.storage.appdata = store.stored_bytes();
            out.appdata.emplace(n.index, store);
        }
        if (n.serving) out.served_snapshot_ids.emplace(n.index, n.serving->snap.id);
        out.nodes.push_back(r);
    }
    for (const auto& b : chain_) {
        out.chain.push_back(*b);
        out.full_chain_bytes += b->serialized_size();
    }
    out.trace_digest = digest_;
    out.trace_events = events_;
    out.trace_lines = std::move(lines_);
    return out;
}

} // namespace

SimResult run_simulation(const SimScenario& scenario)
{
    Simulator sim(scenario);
    return sim.run();
}

std::string SimResult::report_csv() const
{
    std::string s = "node,bytes_stored,bytes_rx,bytes_tx,sync_rounds\n";
    char buf[160];
    for (const auto& n : nodes) {
        std::snprintf(buf, sizeof buf, "%u,%llu,%llu,%llu,%u\n", n.node,
                      static_cast<unsigned long long>(n.storage.total()), static_cast<unsigned long long>(n.bytes_rx),
                      static_cast<unsigned long long>(n.bytes_tx), n.sync_rounds);
        s += buf;
    }
    return s;
}

} // namespace coinprune::netsim
