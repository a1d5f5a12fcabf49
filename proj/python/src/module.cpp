#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coinprune/appdata.hpp"
#include "coinprune/chain.hpp"
#include "coinprune/chaingen.hpp"
#include "coinprune/coordination.hpp"
#include "coinprune/netsim.hpp"
#include "coinprune/scripts.hpp"
#include "coinprune/security_sim.hpp"
#include "coinprune/snapshot.hpp"

namespace py = pybind11;
using namespace coinprune;

namespace {

Bytes to_bytes(const py::bytes& b)
{
    const std::string_view s = b;
    return Bytes(s.begin(), s.end());
}

py::bytes as_py(ByteSpan b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Hash256 digest(const py::bytes& b) { return Hash256::from_span(to_bytes(b)); }

/// Replays blocks from genesis; the set a full node ends with.
chain::UtxoSet replay(const std::vector<chain::Block>& blocks, std::optional<std::uint32_t> height, bool obfuscate)
{
    chain::UtxoSet utxos;
    chain::ValidationOptions opts;
    opts.obfuscate_utxos = obfuscate;
    std::optional<chain::PersistedHeaderRecord> parent;
    const std::size_t end = height ? std::min<std::size_t>(*height + 1, blocks.size()) : blocks.size();
    for (std::size_t i = 0; i < end; ++i)
        parent = chain::validate_and_apply_block(utxos, blocks[i], parent ? &*parent : nullptr,
                                                 chain::ChainParams::defaults(), opts);
    return utxos;
}

py::dict bootstrap_dict(const netsim::BootstrapResult& b)
{
    py::dict d;
    d["outcome"] = std::string(netsim::to_string(b.kind));
    d["reason"] = b.reason;
    d["attempts"] = b.attempts;
    d["aborted_attempts"] = b.aborted_attempts;
    d["snapshot_height"] = b.snapshot_height;
    d["snapshot_id"] = b.snapshot_id ? py::object(as_py(b.snapshot_id->span())) : py::object(py::none());
    d["tag"] = b.tag ? py::object(as_py(b.tag->span())) : py::object(py::none());
    d["chunk_mismatches"] = b.chunk_mismatches;
    d["utxo_stream"] = as_py(snapshot::utxo_stream(b.utxos));
    d["utxo_count"] = b.utxos.size();
    d["appdata_entries"] = b.appdata.size();
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "CoinPrune desk-scale library";
    py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);

    m.def("sha256", [](const py::bytes& b) { return as_py(sha256(to_bytes(b)).span()); });
    m.def("hash256", [](const py::bytes& b) { return as_py(hash256(to_bytes(b)).span()); });
    m.def("hash160", [](const py::bytes& b) { return as_py(hash160(to_bytes(b)).span()); });

    // scripts
    py::class_<scripts::CompressedTxOut>(m, "CompressedTxOut")
        .def(py::init([](std::uint8_t code, const py::bytes& payload) {
                 return scripts::CompressedTxOut{code, to_bytes(payload)};
             }),
             py::arg("case_code"), py::arg("payload"))
        .def_readwrite("case_code", &scripts::CompressedTxOut::case_code)
        .def_property_readonly("payload", [](const scripts::CompressedTxOut& e) { return as_py(e.payload); })
        .def_property_readonly("is_obfuscated", &scripts::CompressedTxOut::is_obfuscated)
        .def("serialized_size", &scripts::CompressedTxOut::serialized_size)
        .def("__eq__", [](const scripts::CompressedTxOut& a, const scripts::CompressedTxOut& b) { return a == b; })
        .def("__repr__", [](const scripts::CompressedTxOut& e) {
            return "CompressedTxOut(case_code=" + std::to_string(e.case_code) + ", payload=" + to_hex(e.payload) + ")";
        });
    m.def("classify_script", [](const py::bytes& s) { return std::string(scripts::to_string(scripts::classify_script(to_bytes(s)))); });
    m.def("compress", [](const py::bytes& s) { return scripts::compress(to_bytes(s)); });
    m.def("obfuscate", &scripts::obfuscate);
    m.def("decompress", [](const scripts::CompressedTxOut& e) { return as_py(scripts::decompress(e)); });
    m.def(
        "validate_spend",
        [](const scripts::CompressedTxOut& e, const py::bytes& unlock, const py::bytes& txid, std::uint32_t vout) {
            return scripts::validate_spend(e, to_bytes(unlock), {digest(txid), vout});
        },
        py::arg("entry"), py::arg("unlock"), py::arg("txid"), py::arg("vout"));
    m.def("toy_signature", [](const py::bytes& key, const py::bytes& txid, std::uint32_t vout) {
        return as_py(scripts::toy_signature(to_bytes(key), {digest(txid), vout}));
    });
    m.def("push_sequence", [](const std::vector<py::bytes>& items) {
        std::vector<Bytes> v;
        for (const auto& i : items) v.push_back(to_bytes(i));
        return as_py(scripts::push_sequence(v));
    });
    m.def("p2pkh_script", [](const py::bytes& h) { return as_py(scripts::p2pkh_script(Hash160::from_span(to_bytes(h)))); });
    m.def("p2sh_script", [](const py::bytes& h) { return as_py(scripts::p2sh_script(Hash160::from_span(to_bytes(h)))); });
    m.def("p2wpkh_script", [](const py::bytes& h) { return as_py(scripts::p2wpkh_script(Hash160::from_span(to_bytes(h)))); });
    m.def("p2wsh_script", [](const py::bytes& h) { return as_py(scripts::p2wsh_script(digest(h))); });
    m.def("p2pk_script", [](const py::bytes& k) { return as_py(scripts::p2pk_script(to_bytes(k))); });
    m.def("op_return_script", [](const py::bytes& p) { return as_py(scripts::op_return_script(to_bytes(p))); });

    // chain
    py::class_<chain::Block>(m, "Block")
        .def_property_readonly("id", [](const chain::Block& b) { return as_py(b.id().span()); })
        .def_property_readonly("tx_count", [](const chain::Block& b) { return b.txs.size(); })
        .def("serialized", [](const chain::Block& b) { return as_py(b.serialized()); })
        .def_static("parse", [](const py::bytes& raw) {
            const Bytes data = to_bytes(raw);
            ByteReader r(data);
            return chain::Block::parse(r);
        });
    m.def(
        "generate_chain",
        [](std::uint32_t length, std::uint64_t seed, std::uint32_t txs_per_block, double op_return_rate) {
            chaingen::WorkloadProfile w;
            w.seed = seed;
            w.txs_per_block = txs_per_block;
            w.op_return_rate = op_return_rate;
            return chaingen::generate_chain(w, length);
        },
        py::arg("length"), py::arg("seed") = 1, py::arg("txs_per_block") = 50, py::arg("op_return_rate") = 0.05);
    m.def("write_block_file", [](const std::string& path, const std::vector<chain::Block>& blocks) {
        chain::write_block_file(path, blocks);
    });
    m.def("read_block_file", [](const std::string& path) { return chain::read_block_file(path); });
    m.def(
        "utxo_stream",
        [](const std::vector<chain::Block>& blocks, std::optional<std::uint32_t> height, bool obfuscate) {
            return as_py(snapshot::utxo_stream(replay(blocks, height, obfuscate)));
        },
        py::arg("blocks"), py::arg("height") = py::none(), py::arg("obfuscate") = false,
        "Canonical record stream of the UTXO set after replaying from genesis.");

    // snapshots
    py::class_<snapshot::ChunkedObject>(m, "ChunkedObject")
        .def_property_readonly("id", [](const snapshot::ChunkedObject& o) { return as_py(o.compute_id().span()); })
        .def_property_readonly("chunk_count", [](const snapshot::ChunkedObject& o) { return o.chunks.size(); })
        .def("encode", [](const snapshot::ChunkedObject& o) { return as_py(snapshot::encode_file(o)); })
        .def_static("decode", [](const py::bytes& raw) { return snapshot::decode_file(to_bytes(raw)); })
        .def(
            "verify",
            [](const snapshot::ChunkedObject& o, const py::bytes& id) {
                const auto v = snapshot::verify_snapshot(o, digest(id));
                return py::make_tuple(v.ok, v.reason);
            },
            py::arg("expected_id"));
    m.def(
        "build_snapshot",
        [](const std::vector<chain::Block>& blocks, std::uint32_t height, bool obfuscate, std::size_t chunk_size) {
            if (height >= blocks.size()) throw py::index_error("height beyond the chain tip");
            const auto utxos = replay(blocks, height, obfuscate);
            snapshot::ChunkedObject obj =
                snapshot::build_snapshot(utxos, height, blocks[height].id(), obfuscate, chunk_size);
            return obj;
        },
        py::arg("blocks"), py::arg("height"), py::arg("obfuscate") = false,
        py::arg("chunk_size") = snapshot::kMaxChunkSize);
    m.def("apply_snapshot", [](const snapshot::ChunkedObject& o) {
        return as_py(snapshot::utxo_stream(snapshot::apply_snapshot(o)));
    });
    m.def("combined_tag", [](const py::bytes& snap_id, const py::bytes& app_id) {
        return as_py(appdata::combined_tag(digest(snap_id), digest(app_id)).span());
    });

    // coordination
    py::class_<coordination::PulseParams>(m, "PulseParams")
        .def(py::init([](std::uint32_t dp, std::uint32_t dr, std::uint32_t dd, std::uint32_t k) {
                 coordination::PulseParams p{dp, dr, dd, k};
                 p.validate();
                 return p;
             }),
             py::arg("delta_p"), py::arg("delta_r"), py::arg("delta_d") = 6, py::arg("k") = 5)
        .def_readwrite("delta_p", &coordination::PulseParams::delta_p)
        .def_readwrite("delta_r", &coordination::PulseParams::delta_r)
        .def_readwrite("delta_d", &coordination::PulseParams::delta_d)
        .def_readwrite("k", &coordination::PulseParams::k);
    m.def("reaffirmation_window", [](std::uint32_t i, const coordination::PulseParams& p) {
        const auto w = coordination::reaffirmation_window(i, p);
        return py::make_tuple(w.first, w.last);
    });
    m.def(
        "tally_window",
        [](const std::vector<std::optional<py::bytes>>& tags, const coordination::PulseParams& p) {
            std::vector<std::optional<Hash256>> t;
            for (const auto& x : tags) t.push_back(x ? std::optional(digest(*x)) : std::nullopt);
            const auto out = coordination::tally_window(t, p);
            return out.accepted() ? py::object(py::make_tuple(as_py(out.tag.span()), out.count)) : py::object(py::none());
        },
        "Returns (tag, count) for an accepted pulse and None for a skipped one.");
    m.def("encode_coinbase_tag", [](const py::bytes& t) { return as_py(coordination::encode_coinbase_tag(digest(t))); });

    // security sweep
    m.def(
        "security_sweep",
        [](std::vector<std::uint32_t> delta_r, std::vector<std::uint32_t> k, std::uint32_t trials, std::uint64_t seed,
           unsigned jobs, std::uint32_t steps, std::uint32_t n_miners, const std::string& method) {
            security::SweepConfig cfg;
            cfg.delta_r = std::move(delta_r);
            cfg.k = std::move(k);
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.jobs = jobs;
            cfg.steps = steps;
            cfg.n_miners = n_miners;
            if (method == "blockwise")
                cfg.method = security::Method::Blockwise;
            else if (method != "binomial")
                throw py::value_error("method must be 'binomial' or 'blockwise'");
            security::SweepResult res;
            {
                py::gil_scoped_release release;
                res = security::sweep(cfg);
            }
            return py::make_tuple(res.csv(), res.thresholds_csv());
        },
        py::arg("delta_r") = std::vector<std::uint32_t>{100, 1000}, py::arg("k") = std::vector<std::uint32_t>{5, 10, 20},
        py::arg("trials") = 1000, py::arg("seed") = 1, py::arg("jobs") = 1, py::arg("steps") = 100,
        py::arg("n_miners") = 1000, py::arg("method") = "binomial",
        "Returns the cell CSV and the threshold CSV.");

    // network simulation
    m.def(
        "run_scenario",
        [](const std::string& text) {
            const auto sc = netsim::SimScenario::parse(text);
            netsim::SimResult r;
            {
                py::gil_scoped_release release;
                r = netsim::run_simulation(sc);
            }
            py::dict d;
            d["id"] = r.scenario_id;
            d["seed"] = r.seed;
            d["trace_digest"] = r.trace_digest.hex();
            d["trace_events"] = r.trace_events;
            d["report_csv"] = r.report_csv();
            d["full_chain_bytes"] = r.full_chain_bytes;
            d["full_replay_stream"] = as_py(snapshot::utxo_stream(replay(r.chain, std::nullopt, sc.obfuscation)));
            py::list pulses;
            for (const auto& p : r.pulses) {
                py::dict pd;
                pd["height"] = p.height;
                pd["accepted"] = p.outcome.accepted();
                pd["count"] = p.outcome.count;
                pd["tag"] = as_py(p.outcome.tag.span());
                pd["genuine"] = p.outcome.accepted() && p.outcome.tag == p.genuine_tag;
                pulses.append(pd);
            }
            d["pulses"] = pulses;
            py::dict boots;
            for (const auto& [node, b] : r.bootstraps) boots[py::int_(node)] = bootstrap_dict(b);
            d["bootstraps"] = boots;
            py::list nodes;
            for (const auto& n : r.nodes) {
                py::dict nd;
                nd["node"] = n.node;
                nd["role"] = std::string(netsim::to_string(n.role));
                nd["pruned"] = n.pruned;
                nd["header_index"] = n.storage.header_index;
                nd["snapshot"] = n.storage.snapshot;
                nd["appdata"] = n.storage.appdata;
                nd["blocks"] = n.storage.blocks;
                nd["total"] = n.storage.total();
                nd["bytes_rx"] = n.bytes_rx;
                nd["bytes_tx"] = n.bytes_tx;
                nodes.append(nd);
            }
            d["nodes"] = nodes;
            return d;
        },
        py::arg("scenario_text"), "Parses a scenario (key = value lines) and runs it.");
}
