// coinprune: command line front end for chains, snapshots and simulations.
//
// Exit status: 0 success, 1 runtime error, 2 usage error, 3 verification failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coinprune/appdata.hpp"
#include "coinprune/chain.hpp"
#include "coinprune/chaingen.hpp"
#include "coinprune/netsim.hpp"
#include "coinprune/security_sim.hpp"
#include "coinprune/snapshot.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using namespace coinprune;
using nlohmann::ordered_json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerify = 3;

struct VerificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path default_out_dir()
{
    if (const char* env = std::getenv("COINPRUNE_OUT_DIR"); env && *env) return env;
    return ".";
}

fs::path resolve(const fs::path& out_dir, const fs::path& p)
{
    return p.is_absolute() || p.has_parent_path() ? p : out_dir / p;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Sidecar "<file>.meta.json" carrying the seed and the flags of the run.
void write_meta(const fs::path& artifact, ordered_json meta)
{
    write_text(artifact.string() + ".meta.json", meta.dump(2) + "\n");
}

std::optional<ordered_json> read_meta(const fs::path& artifact)
{
    const fs::path p = artifact.string() + ".meta.json";
    if (!fs::exists(p)) return std::nullopt;
    return ordered_json::parse(read_text(p));
}

fs::path manifest_path(const fs::path& snap)
{
    fs::path m = snap;
    return m.replace_extension(".manifest");
}

// --- chain ---------------------------------------------------------------

struct ChainGenOpts {
    std::uint32_t blocks = 1000;
    std::uint64_t seed = 1;
    std::uint32_t txs_per_block = 50;
    double op_return_rate = 0.05;
    double spend_probability = 0.05;
    std::string out = "chain.blk";
};

void chain_gen(const ChainGenOpts& o, const fs::path& out_dir)
{
    chaingen::WorkloadProfile w;
    w.seed = o.seed;
    w.txs_per_block = o.txs_per_block;
    w.op_return_rate = o.op_return_rate;
    w.spend_probability = o.spend_probability;
    const auto blocks = chaingen::generate_chain(w, o.blocks);
    const fs::path path = resolve(out_dir, o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    chain::write_block_file(path, blocks);
    write_meta(path, {{"command", "chain gen"},
                      {"seed", o.seed},
                      {"blocks", o.blocks},
                      {"txs_per_block", o.txs_per_block},
                      {"op_return_rate", o.op_return_rate},
                      {"spend_probability", o.spend_probability},
                      {"tip", blocks.back().id().hex()}});
    std::cout << "wrote " << blocks.size() << " blocks to " << path.string() << "\ntip " << blocks.back().id().hex()
              << "\n";
}

// --- snapshot ------------------------------------------------------------

struct SnapshotCreateOpts {
    std::string chain;
    std::optional<std::uint32_t> height;
    bool obfuscate = false;
    bool appdata = false;
    std::size_t chunk_size = snapshot::kMaxChunkSize;
    std::string out = "state.snap";
};

void snapshot_create(const SnapshotCreateOpts& o, const fs::path& out_dir)
{
    const auto blocks = chain::read_block_file(o.chain);
    if (blocks.empty()) throw std::runtime_error("block file is empty");
    const std::uint32_t tip = static_cast<std::uint32_t>(blocks.size() - 1);
    const std::uint32_t h = o.height.value_or(tip);
    if (h > tip) throw std::runtime_error("height " + std::to_string(h) + " is above the tip " + std::to_string(tip));

    chain::UtxoSet utxos;
    appdata::AppDataStore store;
    std::optional<chain::PersistedHeaderRecord> parent;
    for (std::uint32_t i = 0; i <= h; ++i) {
        try {
            parent = chain::validate_and_apply_block(utxos, blocks[i], parent ? &*parent : nullptr,
                                                     chain::ChainParams::defaults());
        } catch (const chain::BlockValidationError& e) {
            throw VerificationFailure("block " + std::to_string(i) + " rejected: " + e.what());
        }
        store.append_block(blocks[i], i);
    }
    const Hash256 block_id = blocks[h].id();
    const auto snap = snapshot::build_snapshot(utxos, h, block_id, o.obfuscate, o.chunk_size);
    const fs::path path = resolve(out_dir, o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    snapshot::write_snapshot_file(path, snap);
    snapshot::write_manifest_file(manifest_path(path), snap.manifest());
    const Hash256 id = snap.compute_id();

    ordered_json meta{{"command", "snapshot create"}, {"chain", o.chain},        {"height", h},
                      {"block_id", block_id.hex()},   {"obfuscate", o.obfuscate}, {"chunk_size", o.chunk_size},
                      {"records", utxos.size()},      {"chunks", snap.chunks.size()}, {"id", id.hex()}};
    if (const auto cm = read_meta(o.chain)) meta["seed"] = (*cm)["seed"];
    std::cout << "height " << h << "\nrecords " << utxos.size() << "\nchunks " << snap.chunks.size() << "\nid "
              << id.hex() << "\n";
    if (o.appdata) {
        fs::path app = path;
        app.replace_extension(".appdata");
        const auto obj = store.chunked(h, block_id, o.chunk_size);
        snapshot::write_snapshot_file(app, obj);
        const Hash256 app_id = obj.compute_id();
        const Hash256 tag = appdata::combined_tag(id, app_id);
        meta["appdata_id"] = app_id.hex();
        meta["tag"] = tag.hex();
        std::cout << "appdata_entries " << store.size() << "\nappdata_id " << app_id.hex() << "\ntag " << tag.hex()
                  << "\n";
    }
    write_meta(path, meta);
}

snapshot::ChunkedObject load_snapshot(const fs::path& path)
{
    try {
        return snapshot::read_snapshot_file(path);
    } catch (const DecodeError& e) {
        throw VerificationFailure(std::string("malformed snapshot file: ") + e.what());
    }
}

void snapshot_id(const std::string& file)
{
    std::cout << load_snapshot(file).compute_id().hex() << "\n";
}

void snapshot_verify(const std::string& file, const std::string& id_hex, const std::string& manifest)
{
    const auto snap = load_snapshot(file);
    Hash256 expected;
    try {
        expected = Hash256::from_hex(id_hex);
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("--id", e.what());
    }
    std::optional<snapshot::SnapshotManifest> ref;
    const fs::path mpath = manifest.empty() ? manifest_path(file) : fs::path(manifest);
    if (fs::exists(mpath)) ref = snapshot::read_manifest_file(mpath);
    const auto v = snapshot::verify_snapshot(snap, expected, ref ? &*ref : nullptr);
    if (!v.ok) {
        std::string msg = "verification failed: " + v.reason;
        if (v.first_mismatch) msg += "\nmismatching chunk " + std::to_string(*v.first_mismatch);
        throw VerificationFailure(msg);
    }
    try {
        const auto utxos = snapshot::apply_snapshot(snap);
        std::cout << "ok " << expected.hex() << "\nrecords " << utxos.size() << "\nchunks " << snap.chunks.size()
                  << "\n";
    } catch (const snapshot::SnapshotParseError& e) {
        throw VerificationFailure(std::string("records do not parse: ") + e.what() + "\nmismatching chunk " +
                                  std::to_string(e.chunk()));
    }
}

// --- sim bootstrap -------------------------------------------------------

std::string hex_or_empty(const std::optional<Hash256>& h) { return h ? h->hex() : std::string(); }

void sim_bootstrap(const std::string& scenario_file, std::optional<std::uint64_t> seed, bool trace,
                   const fs::path& out_dir)
{
    auto sc = netsim::SimScenario::load(scenario_file);
    if (seed) {
        sc.seed = *seed;
        sc.workload.seed = *seed;
    }
    sc.keep_trace_lines = sc.keep_trace_lines || trace;
    const auto r = netsim::run_simulation(sc);
    fs::create_directories(out_dir);
    const fs::path base = out_dir / r.scenario_id;

    write_text(base.string() + ".csv", r.report_csv());

    std::string storage = "node,role,coinprune,pruned,header_index,snapshot,appdata,chaintail,total,full_chain\n";
    for (const auto& n : r.nodes) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%u,%s,%d,%d,%llu,%llu,%llu,%llu,%llu,%llu\n", n.node,
                      std::string(netsim::to_string(n.role)).c_str(), n.coinprune ? 1 : 0, n.pruned ? 1 : 0,
                      static_cast<unsigned long long>(n.storage.header_index),
                      static_cast<unsigned long long>(n.storage.snapshot),
                      static_cast<unsigned long long>(n.storage.appdata),
                      static_cast<unsigned long long>(n.storage.blocks),
                      static_cast<unsigned long long>(n.storage.total()),
                      static_cast<unsigned long long>(r.full_chain_bytes));
        storage += buf;
    }
    write_text(base.string() + "_storage.csv", storage);

    std::string pulses = "index,height,outcome,count,tag,genuine\n";
    for (const auto& p : r.pulses)
        pulses += std::to_string(p.index) + "," + std::to_string(p.height) + "," +
                  (p.outcome.accepted() ? "accepted" : "skipped") + "," + std::to_string(p.outcome.count) + "," +
                  (p.outcome.accepted() ? p.outcome.tag.hex() : "") + "," +
                  (p.outcome.accepted() && p.outcome.tag == p.genuine_tag ? "1" : "0") + "\n";
    write_text(base.string() + "_pulses.csv", pulses);

    std::string boots = "node,outcome,attempts,snapshot_height,tag,chunk_mismatches,reason\n";
    bool any_abort = false;
    for (const auto& [node, b] : r.bootstraps) {
        any_abort = any_abort || b.kind == netsim::BootstrapResult::Kind::Aborted;
        boots += std::to_string(node) + "," + std::string(netsim::to_string(b.kind)) + "," +
                 std::to_string(b.attempts) + "," + std::to_string(b.snapshot_height) + "," + hex_or_empty(b.tag) +
                 "," + std::to_string(b.chunk_mismatches) + ",\"" + b.reason + "\"\n";
        std::cout << "joiner " << node << ": " << netsim::to_string(b.kind);
        if (b.kind == netsim::BootstrapResult::Kind::Accepted) std::cout << " at height " << b.snapshot_height;
        if (!b.reason.empty()) std::cout << " (" << b.reason << ")";
        std::cout << "\n";
    }
    write_text(base.string() + "_bootstrap.csv", boots);

    if (trace) {
        std::string t;
        for (const auto& l : r.trace_lines) t += l + "\n";
        write_text(base.string() + ".trace", t);
    }
    const ordered_json meta{{"command", "sim bootstrap"},
                                        {"scenario", scenario_file},
                                        {"id", r.scenario_id},
                                        {"seed", r.seed},
                                        {"blocks", sc.blocks},
                                        {"trace_digest", r.trace_digest.hex()},
                                        {"trace_events", r.trace_events},
                            {"full_chain_bytes", r.full_chain_bytes}};
    for (const char* suffix : {".csv", "_storage.csv", "_pulses.csv", "_bootstrap.csv"})
        write_meta(base.string() + suffix, meta);
    std::cout << "trace " << r.trace_digest.hex() << "\nreport " << base.string() << ".csv\n";
    if (any_abort) throw VerificationFailure("a joining node aborted its bootstrap");
}

// --- sim security --------------------------------------------------------

struct SecurityOpts {
    std::vector<std::uint32_t> delta_r = {100, 1000};
    std::vector<std::uint32_t> k = {5, 10, 20};
    std::uint32_t trials = 1000;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::uint32_t n_miners = 1000;
    std::uint32_t steps = 100;
    std::string method = "binomial";
    std::string out = "security";
};

void sim_security(const SecurityOpts& o, const fs::path& out_dir)
{
    security::SweepConfig cfg;
    cfg.delta_r = o.delta_r;
    cfg.k = o.k;
    cfg.trials = o.trials;
    cfg.seed = o.seed;
    cfg.jobs = o.jobs;
    cfg.n_miners = o.n_miners;
    cfg.steps = o.steps;
    cfg.method = o.method == "blockwise" ? security::Method::Blockwise : security::Method::Binomial;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("sim security", e.what());
    }
    const auto res = security::sweep(cfg);
    const fs::path base = resolve(out_dir, o.out);
    const fs::path cells = base.string() + ".csv";
    const fs::path thr = base.string() + "_thresholds.csv";
    write_text(cells, res.csv());
    write_text(thr, res.thresholds_csv());
    // jobs is left out so the sidecar is identical across parallelism settings
    const ordered_json meta{{"command", "sim security"}, {"seed", o.seed},   {"trials", o.trials},
                            {"n_miners", o.n_miners},     {"steps", o.steps}, {"method", o.method},
                            {"delta_r", o.delta_r},       {"k", o.k}};
    write_meta(cells, meta);
    write_meta(thr, meta);
    std::cout << "wrote " << res.rows.size() << " cells to " << cells.string() << "\nthresholds " << thr.string()
              << "\n";
}

// --- report --------------------------------------------------------------

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path)
{
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<std::string> header;
    std::vector<std::map<std::string, std::string>> rows;
    const auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false;
        for (const char c : l) {
            if (c == '"')
                quoted = !quoted;
            else if (c == ',' && !quoted) {
                out.push_back(cur);
                cur.clear();
            } else
                cur += c;
        }
        out.push_back(cur);
        return out;
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (header.empty()) {
            header = std::move(cells);
            continue;
        }
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string seed_note(const fs::path& input)
{
    const auto meta = read_meta(input);
    if (!meta || !meta->contains("seed")) return "seed unknown (no metadata sidecar)";
    return "seed " + (*meta)["seed"].dump() + ", source " + input.filename().string();
}

void report(const std::string& thresholds, const std::string& storage, const fs::path& out_dir)
{
    if (thresholds.empty() && storage.empty())
        throw CLI::ValidationError("report", "give --thresholds and/or --storage");
    fs::create_directories(out_dir);
    ordered_json summary{{"command", "report"}, {"outputs", ordered_json::array()}};

    if (!thresholds.empty()) {
        const auto rows = read_csv(thresholds);
        std::map<std::string, tools::Series> fa, skip;
        for (const auto& r : rows) {
            const std::string key = "dR=" + r.at("delta_r") + " k=" + r.at("k");
            const double fc = std::stod(r.at("f_C"));
            fa[key].label = skip[key].label = key;
            const auto& m = r.at("min_fA_compromise");
            if (!m.empty()) fa[key].points.emplace_back(fc, std::stod(m));
            skip[key].points.emplace_back(fc, std::stod(r.at("worst_skip")));
        }
        const auto values = [](const std::map<std::string, tools::Series>& m) {
            std::vector<tools::Series> v;
            for (const auto& [_, s] : m) v.push_back(s);
            return v;
        };
        const std::string note = seed_note(thresholds);
        tools::ChartSpec left{"Least adversarial share compromising 5% of pulses", "f_C", "min f_A", 0, 1, 0, 1, note};
        tools::ChartSpec right{"Worst-case probability of a skipped pulse", "f_C", "max p_skipped", 0, 1, 0, 1, note};
        write_text(out_dir / "security_min_fa.svg", tools::line_chart(left, values(fa)));
        write_text(out_dir / "security_worst_skip.svg", tools::line_chart(right, values(skip)));
        summary["outputs"].push_back("security_min_fa.svg");
        summary["outputs"].push_back("security_worst_skip.svg");
        if (const auto m = read_meta(thresholds)) summary["security"] = *m;
    }

    if (!storage.empty()) {
        const auto rows = read_csv(storage);
        if (rows.empty()) throw std::runtime_error("storage report has no rows");
        std::vector<tools::Series> series;
        double y_max = 1;
        for (const std::string col : {"header_index", "snapshot", "appdata", "chaintail", "total", "full_chain"}) {
            tools::Series s{col, {}};
            for (const auto& r : rows) {
                const double b = std::stod(r.at(col));
                s.points.emplace_back(std::stod(r.at("node")), b / 1e6);
                y_max = std::max(y_max, b / 1e6);
            }
            series.push_back(std::move(s));
        }
        const double last = std::stod(rows.back().at("node"));
        tools::ChartSpec spec{"Stored bytes per node", "node", "MB", 0, std::max(last, 1.0), 0, y_max * 1.05,
                              seed_note(storage)};
        write_text(out_dir / "storage.svg", tools::line_chart(spec, series));
        summary["outputs"].push_back("storage.svg");
        ordered_json nodes = ordered_json::array();
        for (const auto& r : rows) {
            const double total = std::stod(r.at("total")), full = std::stod(r.at("full_chain"));
            nodes.push_back({{"node", std::stoi(r.at("node"))}, {"role", r.at("role")},
                             {"pruned", r.at("pruned") == "1"}, {"total", static_cast<std::uint64_t>(total)},
                             {"fraction_of_full_chain", full > 0 ? total / full : 0.0}});
        }
        summary["storage"] = nodes;
    }
    write_text(out_dir / "report.json", summary.dump(2) + "\n");
    std::cout << "wrote report to " << out_dir.string() << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"CoinPrune desk-scale toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_dir_flag;
    app.add_option("--out-dir", out_dir_flag, "Output directory (default $COINPRUNE_OUT_DIR or .)");

    auto* chain_cmd = app.add_subcommand("chain", "Synthetic chains");
    chain_cmd->require_subcommand(1);
    ChainGenOpts cg;
    auto* gen = chain_cmd->add_subcommand("gen", "Generate a seeded chain and write a block file");
    gen->add_option("--blocks", cg.blocks, "Number of blocks including genesis")->check(CLI::PositiveNumber);
    gen->add_option("--seed", cg.seed, "Workload seed");
    gen->add_option("--txs-per-block", cg.txs_per_block);
    gen->add_option("--op-return-rate", cg.op_return_rate)->check(CLI::Range(0.0, 1.0));
    gen->add_option("--spend-probability", cg.spend_probability)->check(CLI::Range(0.0, 1.0));
    gen->add_option("-o,--out", cg.out, "Block file");

    auto* snap_cmd = app.add_subcommand("snapshot", "UTXO snapshots");
    snap_cmd->require_subcommand(1);
    SnapshotCreateOpts sc;
    auto* create = snap_cmd->add_subcommand("create", "Replay a block file and write .snap and .manifest");
    create->add_option("--chain", sc.chain, "Block file")->required()->check(CLI::ExistingFile);
    create->add_option("--height", sc.height, "Snapshot height (default: tip)");
    create->add_flag("--obfuscate", sc.obfuscate, "Store obfuscatable outputs obfuscated");
    create->add_flag("--appdata", sc.appdata, "Also write the .appdata object and print the combined tag");
    create->add_option("--chunk-size", sc.chunk_size)->check(CLI::Range(std::size_t{64}, snapshot::kMaxChunkSize));
    create->add_option("-o,--out", sc.out, "Snapshot file");
    std::string snap_file, snap_id_hex, snap_manifest;
    auto* verify = snap_cmd->add_subcommand("verify", "Check a .snap against an expected id");
    verify->add_option("snap", snap_file)->required()->check(CLI::ExistingFile);
    verify->add_option("--id", snap_id_hex, "Expected layered id (hex)")->required();
    verify->add_option("--manifest", snap_manifest, "Reference manifest (default: sibling .manifest)");
    auto* idcmd = snap_cmd->add_subcommand("id", "Print the layered id of a .snap");
    idcmd->add_option("snap", snap_file)->required()->check(CLI::ExistingFile);

    auto* sim_cmd = app.add_subcommand("sim", "Simulations");
    sim_cmd->require_subcommand(1);
    std::string scenario;
    std::optional<std::uint64_t> sim_seed;
    bool trace = false;
    auto* boot = sim_cmd->add_subcommand("bootstrap", "Run a network scenario and write its reports");
    boot->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    boot->add_option("--seed", sim_seed, "Override the scenario seed");
    boot->add_flag("--trace", trace, "Write the full event trace");
    SecurityOpts so;
    auto* secc = sim_cmd->add_subcommand("security", "Monte Carlo sweep over (f_C, f_A)");
    secc->add_option("--delta-r", so.delta_r)->delimiter(',');
    secc->add_option("--k", so.k)->delimiter(',');
    secc->add_option("--trials", so.trials)->check(CLI::PositiveNumber);
    secc->add_option("--seed", so.seed);
    secc->add_option("--jobs", so.jobs, "Worker threads for sweep cells")->check(CLI::PositiveNumber);
    secc->add_option("--n-miners", so.n_miners)->check(CLI::PositiveNumber);
    secc->add_option("--steps", so.steps, "Grid points per axis minus one")->check(CLI::PositiveNumber);
    secc->add_option("--method", so.method)->check(CLI::IsMember({"binomial", "blockwise"}));
    secc->add_option("-o,--out", so.out, "Output prefix");

    std::string rep_thresholds, rep_storage;
    auto* rep = app.add_subcommand("report", "SVG charts and a JSON summary from CSV outputs");
    rep->add_option("--thresholds", rep_thresholds, "Threshold CSV from sim security")->check(CLI::ExistingFile);
    rep->add_option("--storage", rep_storage, "_storage.csv from sim bootstrap")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    const fs::path out_dir = out_dir_flag.empty() ? default_out_dir() : fs::path(out_dir_flag);
    try {
        if (*gen)
            chain_gen(cg, out_dir);
        else if (*create)
            snapshot_create(sc, out_dir);
        else if (*verify)
            snapshot_verify(snap_file, snap_id_hex, snap_manifest);
        else if (*idcmd)
            snapshot_id(snap_file);
        else if (*boot)
            sim_bootstrap(scenario, sim_seed, trace, out_dir);
        else if (*secc)
            sim_security(so, out_dir);
        else if (*rep)
            report(rep_thresholds, rep_storage, out_dir);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const VerificationFailure& e) {
        std::cerr << e.what() << "\n";
        return kExitVerify;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
