#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coinprune/appdata.hpp"
#include "coinprune/chain.hpp"
#include "coinprune/chaingen.hpp"
#include "coinprune/coordination.hpp"
#include "coinprune/messages.hpp"

namespace coinprune::netsim {

enum class Role { Miner, Full, Joining };
std::string_view to_string(Role r) noexcept;

struct NodeConfig {
    Role role = Role::Full;
    bool coinprune = false;
    bool adversarial = false; // requires coinprune
    double hash_power = 1.0;  // miners only
    std::uint32_t neighbor_count = 8;
    bool prune = false;        // delete blocks below each accepted snapshot
    bool bogus_chunks = false; // serve corrupted STATE/APPDATA chunks
};

struct Faults {
    /// Honest CoinPrune nodes (lowest indices first) that serve corrupted chunks.
    std::uint32_t bogus_chunk_servers = 0;
    /// Restrict the joiners' first neighbor set to adversarial nodes.
    bool joiner_adversarial_neighbors = false;
};

struct SimScenario {
    std::string id = "scenario";
    std::vector<NodeConfig> nodes;
    coordination::PulseParams pulse{500, 100, 6, 5};
    /// Number of blocks including genesis; the tip is at height blocks - 1.
    std::uint32_t blocks = 1200;
    std::uint64_t seed = 1;
    chaingen::WorkloadProfile workload;
    bool obfuscation = false;
    bool appdata = true;
    std::uint32_t latency = 1; // ticks per hop
    std::size_t chunk_size = snapshot::kMaxChunkSize;
    std::uint32_t chunk_retries = 2;
    std::uint32_t max_attempts = 3;
    Faults faults;
    /// First-attempt neighbors of every joiner; empty means a random draw.
    std::vector<std::uint32_t> joiner_peers;
    bool keep_trace_lines = false;

    /// Throws std::invalid_argument when the scenario cannot be simulated:
    /// no miner, adversarial without coinprune, invalid pulse parameters or a
    /// disconnected topology among non-joining nodes.
    void validate() const;

    /// Flat key=value lines. Keys: id, seed, blocks, nodes (alias roles),
    /// params, faults, workload, neighbors, latency, obfuscation, appdata,
    /// chunk_size, chunk_retries, max_attempts, joiner_neighbors, joiner_peers,
    /// trace. `#` starts a comment.
    static SimScenario parse(std::string_view text);
    static SimScenario load(const std::filesystem::path& path);
};

struct PulseRecord {
    std::uint32_t index = 0;
    std::uint32_t height = 0;
    coordination::PulseOutcome outcome;
    /// Tag honest nodes derived for this pulse.
    Hash256 genuine_tag;
};

struct BootstrapResult {
    enum class Kind { Accepted, FullSync, Aborted };
    Kind kind = Kind::Aborted;
    std::string reason;
    std::vector<std::string> aborted_attempts;
    std::uint32_t attempts = 0;

    chain::UtxoSet utxos;
    appdata::AppDataStore appdata;
    std::vector<chain::PersistedHeaderRecord> records;
    std::optional<Hash256> snapshot_id;
    std::optional<Hash256> tag;
    std::uint32_t snapshot_height = 0;
    /// Outcome of the pulse the joiner checked itself from the chaintail.
    std::optional<coordination::PulseOutcome> verified_outcome;
    std::uint32_t chunk_mismatches = 0;

    bool ok() const noexcept { return kind != Kind::Aborted; }
};
std::string_view to_string(BootstrapResult::Kind k) noexcept;

struct StorageBreakdown {
    std::uint64_t header_index = 0; // 140 B per persisted record
    std::uint64_t snapshot = 0;
    std::uint64_t appdata = 0;
    std::uint64_t blocks = 0; // full blocks still held
    std::uint64_t total() const noexcept { return header_index + snapshot + appdata + blocks; }
};

struct NodeReport {
    std::uint32_t node = 0;
    Role role = Role::Full;
    bool coinprune = false;
    bool adversarial = false;
    bool pruned = false;
    StorageBreakdown storage;
    std::uint64_t bytes_rx = 0;
    std::uint64_t bytes_tx = 0;
    std::uint32_t sync_rounds = 0;
    std::uint64_t state_messages_rx = 0;
    std::uint32_t lowest_block = 0; // lowest full block height held
    std::uint32_t rejected_blocks = 0;
};

struct SimResult {
    std::string scenario_id;
    std::uint64_t seed = 0;
    Hash256 trace_digest;
    std::uint64_t trace_events = 0;
    std::vector<std::string> trace_lines;
    std::vector<NodeReport> nodes;
    std::vector<PulseRecord> pulses;
    /// One entry per joining node, in node order.
    std::map<std::uint32_t, BootstrapResult> bootstraps;
    /// The chain as mined, genesis first.
    std::vector<chain::Block> chain;
    std::uint64_t full_chain_bytes = 0;
    /// Final application data store of every CoinPrune node.
    std::map<std::uint32_t, appdata::AppDataStore> appdata;
    /// Id of the snapshot each node advertises at the end of the run.
    std::map<std::uint32_t, Hash256> served_snapshot_ids;

    std::string report_csv() const;
};

/// Runs mining to `blocks`, then each joining node bootstraps in node order.
SimResult run_simulation(const SimScenario& scenario);

} // namespace coinprune::netsim
