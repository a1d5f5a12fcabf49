// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coinprune/appdata.hpp"
#include "coinprune/chain.hpp"
#include "coinprune/netsim.hpp"
#include "coinprune/scripts.hpp"
#include "coinprune/security_sim.hpp"
#include "coinprune/snapshot.hpp"
#include "oracles/oracles.hpp"

using namespace coinprune;
namespace sec = coinprune::security;
namespace ns = coinprune::netsim;

namespace {

// Tolerances and sweep sizes.
constexpr double kMinFaFloor = 0.46;     // min_fA_compromise for f_C >= 31%
constexpr double kFullSupportFa = 0.48;  // min_fA_compromise at f_C = 100%
constexpr double kFullSupportTol = 0.03; // +/- 3 percentage points
constexpr double kSigmas = 3.0;          // Monte Carlo ordering margin
constexpr std::uint32_t kTrials = 1000;
constexpr std::uint64_t kSweepSeed = 7;
constexpr std::uint32_t kLowBandFrom = 10; // f_C grid indices of the low band
constexpr std::uint32_t kLowBandTo = 20;
constexpr std::uint32_t kHighFrom = 31;
constexpr double kStorageRatioMax = 0.20;
constexpr std::size_t kOutputsPerClass = 10000;

struct Line {
    int number;
    bool pass;
    std::string detail;
};
std::vector<Line> g_lines;

void report(int n, bool pass, const std::string& detail)
{
    g_lines.push_back({n, pass, detail});
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", n, detail.c_str());
    std::fflush(stdout);
}

template <class... A> std::string fmt(const char* f, A... a)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const sec::ThresholdRow* threshold(const std::vector<sec::ThresholdRow>& rows, std::uint32_t dr, std::uint32_t k,
                                   std::uint32_t fc)
{
    for (const auto& r : rows)
        if (r.delta_r == dr && r.k == k && r.fc_index == fc) return &r;
    return nullptr;
}

double sd(double p, std::uint32_t n) { return std::sqrt(std::max(p * (1 - p), 0.0) / n); }

// ---------------------------------------------------------------------------
// 1 and 2: security sweep

sec::SweepResult g_sweep;

void criterion_1()
{
    const auto t0 = std::chrono::steady_clock::now();
    sec::SweepConfig cfg;
    cfg.trials = kTrials;
    cfg.seed = kSweepSeed;
    cfg.delta_r = {100, 1000};
    cfg.k = {5, 10, 20};
    g_sweep = sec::sweep(cfg);
    const double took = seconds_since(t0);
    const auto th = g_sweep.thresholds();

    bool ok = true;
    std::string detail;
    for (const std::uint32_t k : cfg.k) {
        double lowest = 1.0;
        std::uint32_t lowest_at = 0;
        for (std::uint32_t fc = kHighFrom; fc <= 100; ++fc) {
            const auto* t = threshold(th, 1000, k, fc);
            if (!t || !t->min_fa_compromise) continue;
            if (*t->min_fa_compromise < lowest) {
                lowest = *t->min_fa_compromise;
                lowest_at = fc;
            }
        }
        const auto* full = threshold(th, 1000, k, 100);
        const double at_full = full && full->min_fa_compromise ? *full->min_fa_compromise : -1;
        const bool floor_ok = lowest >= kMinFaFloor - 1e-9;
        const bool full_ok = std::abs(at_full - kFullSupportFa) <= kFullSupportTol + 1e-9;
        ok = ok && floor_ok && full_ok;
        detail += fmt("k=%u min over f_C>=31%% %.2f (at %u%%), at 100%% %.2f; ", k, lowest, lowest_at, at_full);
    }
    detail += fmt("sweep 2x3x101x101 cells x %u trials in %.1f s", kTrials, took);
    report(1, ok, detail);
}

void criterion_2()
{
    const auto th = threshold;
    const auto rows = g_sweep.thresholds();
    bool ok = true;
    std::string detail;

    // Low band at delta_r = 100: k=5 < k=10 < k=20 by at least 3 sigma.
    double worst_margin = INFINITY;
    for (std::uint32_t fc = kLowBandFrom; fc <= kLowBandTo; ++fc) {
        const double w5 = th(rows, 100, 5, fc)->worst_skip;
        const double w10 = th(rows, 100, 10, fc)->worst_skip;
        const double w20 = th(rows, 100, 20, fc)->worst_skip;
        const double m1 = (w10 - w5) / std::hypot(sd(w5, kTrials), sd(w10, kTrials));
        const double m2 = (w20 - w10) / std::hypot(sd(w10, kTrials), sd(w20, kTrials));
        const double margin = std::min(std::isfinite(m1) ? m1 : (w10 > w5 ? INFINITY : -INFINITY),
                                       std::isfinite(m2) ? m2 : (w20 > w10 ? INFINITY : -INFINITY));
        worst_margin = std::min(worst_margin, margin);
        if (!(w5 < w10 && w10 < w20 && margin > kSigmas)) ok = false;
    }
    detail += fmt("delta_r=100 f_C %u..%u%%: k ordering with min margin %.1f sigma; ", kLowBandFrom, kLowBandTo,
                  worst_margin);

    // High support: delta_r = 1000 lies below the delta_r = 100, k = 20 curve.
    for (const std::uint32_t k : {5u, 10u, 20u}) {
        double sum_hi = 0, sum_lo = 0, var = 0;
        bool pointwise = true;
        int n = 0;
        for (std::uint32_t fc = kHighFrom; fc <= 100; ++fc) {
            const double ref = th(rows, 100, 20, fc)->worst_skip;
            const double w = th(rows, 1000, k, fc)->worst_skip;
            if (!(w < ref)) pointwise = false;
            sum_hi += ref;
            sum_lo += w;
            var += sd(ref, kTrials) * sd(ref, kTrials) + sd(w, kTrials) * sd(w, kTrials);
            ++n;
        }
        const double z = (sum_hi - sum_lo) / std::sqrt(var);
        if (!(pointwise && z > kSigmas)) ok = false;
        detail += fmt("delta_r=1000 k=%u below reference at every f_C>=31%%: %s, mean gap %.4f (%.1f sigma); ", k,
                      pointwise ? "yes" : "no", (sum_hi - sum_lo) / n, z);
    }
    report(2, ok, detail);
}

// ---------------------------------------------------------------------------
// 3: bootstrap equivalence

Bytes library_replay(const std::vector<chain::Block>& blocks, bool obfuscate)
{
    chain::UtxoSet utxos;
    chain::ValidationOptions opts;
    opts.obfuscate_utxos = obfuscate;
    std::optional<chain::PersistedHeaderRecord> parent;
    for (const auto& b : blocks)
        parent = chain::validate_and_apply_block(utxos, b, parent ? &*parent : nullptr, chain::ChainParams::defaults(),
                                                 opts);
    return snapshot::utxo_stream(utxos);
}

Bytes oracle_replay(const std::vector<chain::Block>& blocks, bool obfuscate)
{
    oracle::Replayer rep(obfuscate);
    for (std::uint32_t h = 0; h < blocks.size(); ++h) rep.connect(blocks[h], h);
    return rep.stream();
}

ns::SimResult run_text(const std::string& text) { return ns::run_simulation(ns::SimScenario::parse(text)); }

void criterion_3()
{
    const auto t0 = std::chrono::steady_clock::now();
    int equal = 0, accepted = 0, total = 0;
    std::string failures;
    for (int i = 0; i < 20; ++i) {
        const std::uint32_t dp = i % 2 ? 500 : 200;
        const std::uint32_t dr = (i / 2) % 2 ? 100 : 50;
        const std::uint32_t blocks = 1200 + static_cast<std::uint32_t>((i * 97) % 1801);
        const bool obf = i % 3 == 0;
        const std::string text = fmt("id = eq%d\nseed = %d\nblocks = %u\n"
                                     "params = delta_p:%u, delta_r:%u, delta_d:6, k:5\n"
                                     "workload = txs_per_block:8, op_return_rate:0.05\n"
                                     "nodes = 5xminer+cp, miner, full+cp, joining+cp\n"
                                     "obfuscation = %s\nchunk_size = 16384\n",
                                     i, 100 + i, blocks, dp, dr, obf ? "true" : "false");
        const auto r = run_text(text);
        const auto& b = r.bootstraps.at(7);
        ++total;
        const bool acc = b.kind == ns::BootstrapResult::Kind::Accepted && b.snapshot_height > 0;
        accepted += acc;
        const Bytes got = snapshot::utxo_stream(b.utxos);
        const bool same = got == library_replay(r.chain, obf) && got == oracle_replay(r.chain, obf);
        if (acc && same)
            ++equal;
        else
            failures += fmt(" eq%d(%s,%s)", i, std::string(ns::to_string(b.kind)).c_str(), same ? "equal" : "differs");
    }
    report(3, equal == total,
           fmt("%d/%d scenarios accepted a snapshot and matched both from-genesis replays bitwise (%d accepted)%s; "
               "%.1f s",
               equal, total, accepted, failures.c_str(), seconds_since(t0)));
}

// ---------------------------------------------------------------------------
// 4: tamper rejection

void criterion_4()
{
    const auto t0 = std::chrono::steady_clock::now();
    int violations = 0, accepted = 0, aborted = 0, fullsync = 0, rejected_attempts = 0, mismatches = 0;
    int bogus_pulses = 0;
    std::map<int, int> per_kind;
    for (int i = 0; i < 100; ++i) {
        const int kind = i % 4;
        std::mt19937_64 rng(5000 + i);
        const std::uint32_t blocks = 260 + static_cast<std::uint32_t>(rng() % 141);
        std::string nodes, faults = "none", extra;
        switch (kind) {
        case 0: // corrupted chunk servers among honest nodes
            nodes = "6xminer+cp, 2xfull+cp, joining+cp";
            faults = fmt("bogus_chunks:%u", 1 + static_cast<unsigned>(rng() % 8));
            break;
        case 1: // adversarial servers offering snapshots nobody reaffirmed
            nodes = fmt("6xminer+cp, %uxfull+cp+adv, joining+cp", 1 + static_cast<unsigned>(rng() % 3));
            faults = "joiner_adversarial:true";
            break;
        case 2: { // adversarial miners with a minority of the hash power
            const unsigned m = 1 + static_cast<unsigned>(rng() % 3);
            const double w = 0.3 + 0.1 * static_cast<double>(rng() % 4);
            nodes = fmt("6xminer+cp, %uxminer+cp+adv@%.1f, full+cp, joining+cp", m, w);
            if (rng() % 2) faults = "joiner_adversarial:true";
            break;
        }
        default: // thin support: pulses mostly skipped, adversaries serve anyway
            nodes = "miner+cp, 6xminer, miner+cp+adv@0.5, full+cp+adv, full+cp, joining+cp";
            faults = rng() % 2 ? "joiner_adversarial:true" : "bogus_chunks:1";
            break;
        }
        const std::string text = fmt("id = tamper%d\nseed = %d\nblocks = %u\n"
                                     "params = delta_p:100, delta_r:30, delta_d:6, k:5\n"
                                     "workload = txs_per_block:5, op_return_rate:0.2\n"
                                     "chunk_size = 2048\nobfuscation = %s\n",
                                     i, 9000 + i, blocks, i % 8 < 4 ? "false" : "true") +
                                 "nodes = " + nodes + "\nfaults = " + faults + "\n" + extra;
        const auto r = run_text(text);
        for (const auto& p : r.pulses)
            if (p.outcome.accepted() && p.outcome.tag != p.genuine_tag) ++bogus_pulses;
        for (const auto& [node, b] : r.bootstraps) {
            rejected_attempts += static_cast<int>(b.aborted_attempts.size());
            mismatches += static_cast<int>(b.chunk_mismatches);
            if (b.kind == ns::BootstrapResult::Kind::Aborted) ++aborted;
            if (b.kind == ns::BootstrapResult::Kind::FullSync) ++fullsync;
            if (b.kind != ns::BootstrapResult::Kind::Accepted) continue;
            ++accepted;
            ++per_kind[kind];
            const ns::PulseRecord* pulse = nullptr;
            for (const auto& p : r.pulses)
                if (p.height == b.snapshot_height) pulse = &p;
            const bool ok = pulse && pulse->outcome.accepted() && b.tag && *b.tag == pulse->outcome.tag &&
                            b.snapshot_id &&
                            (!pulse->outcome.accepted() || pulse->outcome.tag != pulse->genuine_tag ||
                             snapshot::utxo_stream(b.utxos) == oracle_replay(r.chain, i % 8 >= 4));
            if (!ok) {
                ++violations;
                std::printf("  tamper%d: accepted snapshot at %u does not match the pulse outcome\n", i,
                            b.snapshot_height);
            }
        }
    }
    report(4, violations == 0,
           fmt("100 scenarios: %d wrong acceptances; outcomes accepted %d (chunks %d, unreaffirmed %d, minority %d, "
               "thin %d), full sync %d, aborted %d; %d attempts rejected, %d bad chunks caught, %d pulses won by "
               "bogus tags; %.1f s",
               violations, accepted, per_kind[0], per_kind[1], per_kind[2], per_kind[3], fullsync, aborted,
               rejected_attempts, mismatches, bogus_pulses, seconds_since(t0)));
}

// ---------------------------------------------------------------------------
// 5: obfuscation equivalence

bool contains(const Bytes& hay, const std::uint8_t* needle, std::size_t n)
{
    return std::search(hay.begin(), hay.end(), needle, needle + n) != hay.end();
}

void criterion_5()
{
    using scripts::ScriptClass;
    std::mt19937_64 rng(424242);
    const auto random_bytes = [&](std::size_t n) {
        Bytes b(n);
        for (auto& x : b) x = static_cast<std::uint8_t>(rng());
        return b;
    };
    const auto random_key = [&] {
        Bytes k = random_bytes(33);
        k[0] = static_cast<std::uint8_t>(2 + (rng() & 1));
        return k;
    };

    bool ok = true;
    std::string detail;
    for (const auto cls : {ScriptClass::P2PKH, ScriptClass::P2SH, ScriptClass::P2WPKH, ScriptClass::P2WSH}) {
        std::size_t agree = 0, checks = 0, leaks = 0, wrong_class = 0;
        std::set<long> deltas;
        for (std::size_t i = 0; i < kOutputsPerClass; ++i) {
            const Bytes key = random_key();
            const Bytes other = random_key();
            scripts::SpendContext ctx{Hash256::from_span(random_bytes(32)), static_cast<std::uint32_t>(rng() % 8)};
            scripts::SpendContext wrong_ctx{ctx.txid, ctx.vout + 1};
            const auto sig = [&](const Bytes& k, const scripts::SpendContext& c) { return scripts::toy_signature(k, c); };

            Bytes script, secret;
            std::vector<Bytes> good;
            std::vector<std::vector<Bytes>> bad;
            switch (cls) {
            case ScriptClass::P2PKH:
            case ScriptClass::P2WPKH: {
                const auto h = hash160(key);
                secret.assign(h.bytes.begin(), h.bytes.end());
                script = cls == ScriptClass::P2PKH ? scripts::p2pkh_script(h) : scripts::p2wpkh_script(h);
                good = {sig(key, ctx), key};
                bad = {{sig(other, ctx), other}, {sig(key, ctx), other}, {sig(key, wrong_ctx), key}, {key}, {}};
                break;
            }
            case ScriptClass::P2SH: {
                const Bytes redeem = scripts::p2pk_script(key);
                const auto h = hash160(redeem);
                secret.assign(h.bytes.begin(), h.bytes.end());
                script = scripts::p2sh_script(h);
                good = {sig(key, ctx), redeem};
                bad = {{sig(other, ctx), redeem}, {sig(key, ctx), scripts::p2pk_script(other)},
                       {sig(key, wrong_ctx), redeem}, {redeem}, {}};
                break;
            }
            default: {
                const Bytes witness = scripts::p2pk_script(key);
                const auto h = sha256(witness);
                secret.assign(h.bytes.begin(), h.bytes.end());
                script = scripts::p2wsh_script(h);
                good = {sig(key, ctx), witness};
                bad = {{sig(other, ctx), witness}, {sig(key, ctx), scripts::p2pk_script(other)},
                       {sig(key, wrong_ctx), witness}, {witness}, {}};
                break;
            }
            }
            if (scripts::classify_script(script) != cls) ++wrong_class;
            const auto plain = scripts::compress(script);
            const auto obf = scripts::obfuscate(plain);

            const auto check = [&](const Bytes& unlock, bool expect) {
                const bool a = scripts::validate_spend(plain, unlock, ctx);
                const bool b = scripts::validate_spend(obf, unlock, ctx);
                ++checks;
                if (a == b && a == expect) ++agree;
            };
            check(scripts::push_sequence(good), true);
            for (const auto& u : bad) check(scripts::push_sequence(u), false);
            Bytes mangled = good[0];
            mangled[rng() % mangled.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
            check(scripts::push_sequence({mangled, good[1]}), false);
            check(random_bytes(1 + rng() % 40), false);

            // Snapshot record of the same output in both forms.
            chain::UtxoEntry e{{ctx.txid, ctx.vout}, rng() % 100000, static_cast<std::uint32_t>(rng() % 5000), false,
                               plain};
            ByteWriter wp, wo;
            snapshot::serialize_record(wp, e);
            e.compressed = obf;
            snapshot::serialize_record(wo, e);
            const Bytes rec_obf = wo.take();
            const Bytes rec_plain = wp.take();
            if (contains(rec_obf, secret.data(), 20)) ++leaks;
            deltas.insert(static_cast<long>(rec_obf.size()) - static_cast<long>(rec_plain.size()));
        }
        const long expected_delta = cls == ScriptClass::P2WPKH ? 10 : cls == ScriptClass::P2WSH ? -2 : 12;
        const bool cls_ok = agree == checks && leaks == 0 && wrong_class == 0 && deltas.size() == 1 &&
                            *deltas.begin() == expected_delta;
        ok = ok && cls_ok;
        detail += fmt("%s %zu/%zu agree, %zu leaks, delta %+ld B; ", std::string(scripts::to_string(cls)).c_str(),
                      agree, checks, leaks, deltas.size() == 1 ? *deltas.begin() : 9999L);
    }
    report(5, ok, detail + fmt("%zu outputs per class", kOutputsPerClass));
}

// ---------------------------------------------------------------------------
// 6 and 7: storage and application data on a pruned node

std::string storage_scenario(std::uint32_t blocks)
{
    return fmt("id = storage%u\nseed = 31\nblocks = %u\n"
               "params = delta_p:300, delta_r:50, delta_d:6, k:5\n"
               "workload = txs_per_block:20, op_return_rate:0.05\n"
               "nodes = 5xminer+cp, full+cp+prune, full, joining+cp\n"
               "chunk_size = 65536\n",
               blocks, blocks);
}
constexpr std::uint32_t kPrunedNode = 5;
constexpr std::uint32_t kJoinerNode = 7;

std::map<std::uint32_t, ns::SimResult> g_storage_runs;

void criterion_6()
{
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    double prev_ratio = 2.0;
    for (const std::uint32_t len : {1500u, 3000u, 6000u}) {
        auto r = run_text(storage_scenario(len));
        const auto& n = r.nodes[kPrunedNode];
        int accepted = 0;
        for (const auto& p : r.pulses) accepted += p.outcome.accepted();
        const double ratio = static_cast<double>(n.storage.total()) / static_cast<double>(r.full_chain_bytes);
        const bool index_ok = n.storage.header_index == 140ull * len;
        if (!index_ok || !n.pruned || !(ratio < prev_ratio)) ok = false;
        if (len == 3000 && !(ratio < kStorageRatioMax && accepted >= 2)) ok = false;
        detail += fmt("%u blocks: %d accepted pulses, pruned %llu B (index %llu, snapshot %llu, appdata %llu, "
                      "chaintail %llu from height %u) vs full %llu B = %.2f%%; ",
                      len, accepted, static_cast<unsigned long long>(n.storage.total()),
                      static_cast<unsigned long long>(n.storage.header_index),
                      static_cast<unsigned long long>(n.storage.snapshot),
                      static_cast<unsigned long long>(n.storage.appdata),
                      static_cast<unsigned long long>(n.storage.blocks), n.lowest_block,
                      static_cast<unsigned long long>(r.full_chain_bytes), 100 * ratio);
        prev_ratio = ratio;
        g_storage_runs.emplace(len, std::move(r));
    }
    report(6, ok, detail + fmt("%.1f s", seconds_since(t0)));
}

// Independent scan: OP_RETURN outputs, payload after one direct or PUSHDATA1 push.
struct Expected {
    Bytes payload;
    Hash256 txid;
    Hash256 block_id;
};

std::vector<Expected> scan_op_returns(const std::vector<chain::Block>& blocks)
{
    std::vector<Expected> out;
    for (const auto& b : blocks)
        for (const auto& tx : b.txs)
            for (const auto& o : tx.outputs) {
                const auto& s = o.script;
                if (s.empty() || s[0] != 0x6a) continue;
                Bytes p;
                if (s.size() >= 2 && s[1] >= 1 && s[1] <= 75 && s.size() == 2u + s[1])
                    p.assign(s.begin() + 2, s.end());
                else if (s.size() >= 3 && s[1] == 0x4c && s.size() == 3u + s[2])
                    p.assign(s.begin() + 3, s.end());
                else if (s.size() > 1)
                    p.assign(s.begin() + 1, s.end());
                out.push_back({p, oracle::txid(tx), b.header.id()});
            }
    return out;
}

std::vector<Hash256> coinbase_tags(const std::vector<chain::Block>& blocks, std::uint32_t from, std::uint32_t to)
{
    const std::string marker = "CoinPrune/";
    std::vector<Hash256> tags;
    for (std::uint32_t h = from; h <= to && h < blocks.size(); ++h) {
        const auto& field = blocks[h].txs[0].inputs[0].unlock;
        const auto it = std::search(field.begin(), field.end(), marker.begin(), marker.end());
        if (it == field.end() || field.end() - it < static_cast<long>(marker.size() + 33)) continue;
        const auto at = it + static_cast<long>(marker.size());
        if (at[32] != '/') continue;
        tags.push_back(Hash256::from_span(ByteSpan(&*at, 32)));
    }
    return tags;
}

void criterion_7()
{
    const auto& r = g_storage_runs.at(3000);
    const auto expected = scan_op_returns(r.chain);
    bool ok = !expected.empty();
    std::string detail;
    for (const std::uint32_t node : {kPrunedNode, kJoinerNode}) {
        const auto& store = node == kJoinerNode ? r.bootstraps.at(kJoinerNode).appdata : r.appdata.at(node);
        std::size_t found = 0;
        for (const auto& e : expected) {
            const auto hits = store.lookup(e.txid);
            if (std::any_of(hits.begin(), hits.end(), [&](const appdata::AppDataEntry& a) {
                    return a.payload == e.payload && a.txid == e.txid && a.block_id == e.block_id;
                }))
                ++found;
        }
        const bool exact = store.size() == expected.size();
        ok = ok && found == expected.size() && exact;
        detail += fmt("node %u: %zu/%zu payloads retrievable with txid and block id%s; ", node, found,
                      expected.size(), exact ? "" : " (entry count differs)");
    }
    if (r.nodes[kPrunedNode].lowest_block == 0) ok = false;

    // Combined tag of the last accepted pulse, rebuilt from a replay.
    const ns::PulseRecord* pulse = nullptr;
    for (const auto& p : r.pulses)
        if (p.outcome.accepted()) pulse = &p;
    bool tag_ok = false;
    if (pulse) {
        const std::uint32_t h = pulse->height;
        const std::vector<chain::Block> prefix(r.chain.begin(), r.chain.begin() + h + 1);
        chain::UtxoSet utxos;
        std::optional<chain::PersistedHeaderRecord> parent;
        appdata::AppDataStore store;
        for (std::uint32_t i = 0; i <= h; ++i) {
            parent = chain::validate_and_apply_block(utxos, prefix[i], parent ? &*parent : nullptr,
                                                     chain::ChainParams::defaults());
            store.append_block(prefix[i], i);
        }
        const Hash256 block_id = prefix[h].header.id();
        const Hash256 snap_id = snapshot::build_snapshot(utxos, h, block_id, false, 65536).compute_id();
        const Hash256 app_id = store.chunked(h, block_id, 65536).compute_id();
        Bytes cat(snap_id.bytes.begin(), snap_id.bytes.end());
        cat.insert(cat.end(), app_id.bytes.begin(), app_id.bytes.end());
        const Hash256 expect = hash256(cat);
        const auto seen = coinbase_tags(r.chain, h + 7, h + 6 + 50);
        const auto votes = std::count(seen.begin(), seen.end(), expect);
        const auto& b = r.bootstraps.at(kJoinerNode);
        tag_ok = pulse->outcome.tag == expect && votes >= 5 && b.tag && *b.tag == expect && b.snapshot_id &&
                 *b.snapshot_id == snap_id;
        detail += fmt("pulse %u tag = hash256(snapshot id || appdata id): %s, %ld coinbase votes",
                      h, tag_ok ? "yes" : "no", static_cast<long>(votes));
    }
    report(7, ok && tag_ok, detail);
}

// ---------------------------------------------------------------------------
// 8: determinism

void criterion_8()
{
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    const std::string text = storage_scenario(1500) + "faults = bogus_chunks:2\n";
    const auto a = run_text(text);
    const auto b = run_text(text);
    const auto& c = g_storage_runs.at(1500);
    const bool trace = a.trace_digest == b.trace_digest && a.trace_events == b.trace_events;
    const bool csv = a.report_csv() == b.report_csv();
    const bool clean_rerun = run_text(storage_scenario(1500)).trace_digest == c.trace_digest;
    ok = ok && trace && csv && clean_rerun;
    detail += fmt("netsim traces %s, report CSVs %s, rerun of storage scenario %s; ", trace ? "equal" : "differ",
                  csv ? "equal" : "differ", clean_rerun ? "equal" : "differs");

    const auto snap_bytes = [](const ns::SimResult& r) {
        chain::UtxoSet utxos;
        std::optional<chain::PersistedHeaderRecord> parent;
        for (const auto& blk : r.chain)
            parent = chain::validate_and_apply_block(utxos, blk, parent ? &*parent : nullptr,
                                                     chain::ChainParams::defaults());
        return snapshot::encode_file(snapshot::build_snapshot(utxos, static_cast<std::uint32_t>(r.chain.size() - 1),
                                                              r.chain.back().header.id(), true, 4096));
    };
    const bool snaps = snap_bytes(a) == snap_bytes(b) && a.served_snapshot_ids == b.served_snapshot_ids;
    ok = ok && snaps;
    detail += fmt("snapshot files %s; ", snaps ? "equal" : "differ");

    sec::SweepConfig cfg;
    cfg.trials = kTrials;
    cfg.seed = kSweepSeed;
    cfg.delta_r = {100};
    cfg.k = {10};
    cfg.jobs = 1;
    const auto s1 = sec::sweep(cfg);
    cfg.jobs = 4;
    const auto s4 = sec::sweep(cfg);
    cfg.jobs = 3;
    cfg.method = sec::Method::Blockwise;
    cfg.steps = 20;
    cfg.trials = 200;
    const auto b3 = sec::sweep(cfg);
    cfg.jobs = 1;
    const auto b1 = sec::sweep(cfg);
    bool subset = true;
    for (const auto& row : s1.rows) {
        const auto& full = g_sweep.at(100, 10, row.fc_index, row.fa_index);
        if (full.correct != row.correct || full.adversary != row.adversary || full.skipped != row.skipped)
            subset = false;
    }
    const bool sweeps = s1.csv() == s4.csv() && s1.thresholds_csv() == s4.thresholds_csv() && b1.csv() == b3.csv();
    ok = ok && sweeps && subset;
    detail += fmt("sweep CSVs jobs 1 vs 4 %s, blockwise jobs 1 vs 3 %s, cells independent of the swept set %s; "
                  "%.1f s",
                  sweeps ? "equal" : "differ", b1.csv() == b3.csv() ? "equal" : "differ", subset ? "yes" : "no",
                  seconds_since(t0));
    report(8, ok, detail);
}

} // namespace

int main()
{
    const std::vector<std::function<void()>> steps = {criterion_1, criterion_2, criterion_3, criterion_4,
                                                      criterion_5, criterion_6, criterion_7, criterion_8};
    for (std::size_t i = 0; i < steps.size(); ++i) {
        try {
            steps[i]();
        } catch (const std::exception& e) {
            report(static_cast<int>(i + 1), false, std::string("exception: ") + e.what());
        }
    }
    const auto failed = std::count_if(g_lines.begin(), g_lines.end(), [](const Line& l) { return !l.pass; });
    std::printf("%zu criteria, %ld failed\n", g_lines.size(), static_cast<long>(failed));
    return failed ? 1 : 0;
}
