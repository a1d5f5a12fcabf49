#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coinprune/netsim.hpp"

namespace coinprune::netsim {

std::string_view to_string(Role r) noexcept
{
    switch (r) {
    case Role::Miner: return "miner";
    case Role::Full: return "full";
    case Role::Joining: return "joining";
    }
    return "?";
}

std::string_view to_string(BootstrapResult::Kind k) noexcept
{
    switch (k) {
    case BootstrapResult::Kind::Accepted: return "accepted";
    case BootstrapResult::Kind::FullSync: return "full_sync";
    case BootstrapResult::Kind::Aborted: return "aborted";
    }
    return "?";
}

void SimScenario::validate() const
{
    pulse.validate();
    if (blocks < 1) throw std::invalid_argument("scenario needs at least the genesis block");
    if (latency < 1) throw std::invalid_argument("latency must be at least one tick");
    if (chunk_size < 64 || chunk_size > snapshot::kMaxChunkSize)
        throw std::invalid_argument("chunk_size must lie in [64, 1 MiB]");
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be at least 1");
    workload.validate();
    bool miner = false;
    for (const auto& n : nodes) {
        if (n.adversarial && !n.coinprune) throw std::invalid_argument("adversarial nodes must run CoinPrune");
        if (n.role == Role::Miner) {
            if (!(n.hash_power > 0.0)) throw std::invalid_argument("miner hash power must be positive");
            miner = true;
        }
    }
    if (!miner) throw std::invalid_argument("scenario needs at least one miner");
    for (const auto p : joiner_peers)
        if (p >= nodes.size() || nodes[p].role == Role::Joining)
            throw std::invalid_argument("joiner_peers must name established nodes");
}

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    while (true) {
        const auto at = s.find(sep);
        const auto part = trim(s.substr(0, at));
        if (!part.empty()) out.push_back(part);
        if (at == std::string_view::npos) break;
        s.remove_prefix(at + 1);
    }
    return out;
}

template <class T> T parse_int(std::string_view v, std::string_view key)
{
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw std::invalid_argument("bad integer for " + std::string(key) + ": " + std::string(v));
    return out;
}

double parse_double(std::string_view v, std::string_view key)
{
    try {
        std::size_t used = 0;
        const std::string s(v);
        const double d = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad number for " + std::string(key) + ": " + std::string(v));
    }
}

bool parse_bool(std::string_view v, std::string_view key)
{
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::invalid_argument("bad boolean for " + std::string(key) + ": " + std::string(v));
}

// "6xminer+cp", "2xminer+cp+adv@2.5", "joining+cp"
void parse_nodes(std::string_view spec, std::vector<NodeConfig>& out)
{
    for (auto item : split(spec, ',')) {
        std::uint32_t count = 1;
        if (const auto x = item.find('x'); x != std::string_view::npos && x > 0 &&
                                           item.substr(0, x).find_first_not_of("0123456789") == std::string_view::npos) {
            count = parse_int<std::uint32_t>(item.substr(0, x), "nodes");
            item.remove_prefix(x + 1);
        }
        NodeConfig cfg;
        if (const auto at = item.find('@'); at != std::string_view::npos) {
            cfg.hash_power = parse_double(item.substr(at + 1), "hash power");
            item = item.substr(0, at);
        }
        const auto parts = split(item, '+');
        if (parts.empty()) throw std::invalid_argument("empty node entry");
        const auto role = parts[0];
        if (role == "miner")
            cfg.role = Role::Miner;
        else if (role == "full")
            cfg.role = Role::Full;
        else if (role == "joining" || role == "joiner")
            cfg.role = Role::Joining;
        else
            throw std::invalid_argument("unknown role: " + std::string(role));
        for (std::size_t i = 1; i < parts.size(); ++i) {
            const auto f = parts[i];
            if (f == "cp")
                cfg.coinprune = true;
            else if (f == "adv")
                cfg.adversarial = true;
            else if (f == "prune")
                cfg.prune = true;
            else if (f == "badchunks")
                cfg.bogus_chunks = true;
            else
                throw std::invalid_argument("unknown node flag: " + std::string(f));
        }
        out.insert(out.end(), count, cfg);
    }
}

template <class F> void each_pair(std::string_view list, std::string_view key, F&& f)
{
    for (auto kv : split(list, ',')) {
        const auto c = kv.find(':');
        if (c == std::string_view::npos) {
            f(kv, std::string_view{});
            continue;
        }
        f(trim(kv.substr(0, c)), trim(kv.substr(c + 1)));
    }
    (void)key;
}

} // namespace

SimScenario SimScenario::parse(std::string_view text)
{
    SimScenario s;
    std::optional<std::uint32_t> neighbors;
    std::optional<std::uint32_t> joiner_neighbors;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));

        const auto set_pulse = [&](std::string_view k, std::string_view v) {
            if (k == "delta_p")
                s.pulse.delta_p = parse_int<std::uint32_t>(v, k);
            else if (k == "delta_r")
                s.pulse.delta_r = parse_int<std::uint32_t>(v, k);
            else if (k == "delta_d")
                s.pulse.delta_d = parse_int<std::uint32_t>(v, k);
            else if (k == "k")
                s.pulse.k = parse_int<std::uint32_t>(v, k);
            else
                return false;
            return true;
        };
        const auto set_workload = [&](std::string_view k, std::string_view v) {
            auto& w = s.workload;
            if (k == "txs_per_block")
                w.txs_per_block = parse_int<std::uint32_t>(v, k);
            else if (k == "max_inputs")
                w.max_inputs = parse_int<std::uint32_t>(v, k);
            else if (k == "min_outputs")
                w.min_outputs = parse_int<std::uint32_t>(v, k);
            else if (k == "max_outputs")
                w.max_outputs = parse_int<std::uint32_t>(v, k);
            else if (k == "op_return_rate")
                w.op_return_rate = parse_double(v, k);
            else if (k == "spend_probability")
                w.spend_probability = parse_double(v, k);
            else if (k == "fee")
                w.fee = parse_int<std::uint64_t>(v, k);
            else
                return false;
            return true;
        };

        if (key == "id")
            s.id = std::string(value);
        else if (key == "seed")
            s.seed = parse_int<std::uint64_t>(value, key);
        else if (key == "blocks")
            s.blocks = parse_int<std::uint32_t>(value, key);
        else if (key == "nodes" || key == "roles")
            parse_nodes(value, s.nodes);
        else if (key == "params")
            each_pair(value, key, [&](auto k, auto v) {
                if (!set_pulse(k, v)) throw std::invalid_argument("unknown param: " + std::string(k));
            });
        else if (key == "workload")
            each_pair(value, key, [&](auto k, auto v) {
                if (!set_workload(k, v)) throw std::invalid_argument("unknown workload key: " + std::string(k));
            });
        else if (key == "faults")
            each_pair(value, key, [&](auto k, auto v) {
                if (k == "bogus_chunks")
                    s.faults.bogus_chunk_servers = parse_int<std::uint32_t>(v, k);
                else if (k == "joiner_adversarial")
                    s.faults.joiner_adversarial_neighbors = v.empty() || parse_bool(v, k);
                else if (k != "none")
                    throw std::invalid_argument("unknown fault: " + std::string(k));
            });
        else if (key == "neighbors")
            neighbors = parse_int<std::uint32_t>(value, key);
        else if (key == "joiner_neighbors")
            joiner_neighbors = parse_int<std::uint32_t>(value, key);
        else if (key == "joiner_peers")
            for (auto v : split(value, ' ')) s.joiner_peers.push_back(parse_int<std::uint32_t>(v, key));
        else if (key == "latency")
            s.latency = parse_int<std::uint32_t>(value, key);
        else if (key == "obfuscation")
            s.obfuscation = parse_bool(value, key);
        else if (key == "appdata")
            s.appdata = parse_bool(value, key);
        else if (key == "chunk_size")
            s.chunk_size = parse_int<std::size_t>(value, key);
        else if (key == "chunk_retries")
            s.chunk_retries = parse_int<std::uint32_t>(value, key);
        else if (key == "max_attempts")
            s.max_attempts = parse_int<std::uint32_t>(value, key);
        else if (key == "trace")
            s.keep_trace_lines = parse_bool(value, key);
        else if (!set_pulse(key, value) && !set_workload(key, value))
            throw std::invalid_argument("line " + std::to_string(line_no) + ": unknown key " + std::string(key));
    }
    for (auto& n : s.nodes) {
        if (neighbors) n.neighbor_count = *neighbors;
        if (joiner_neighbors && n.role == Role::Joining) n.neighbor_count = *joiner_neighbors;
    }
    s.workload.seed = s.seed;
    s.validate();
    return s;
}

SimScenario SimScenario::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto s = parse(ss.str());
    if (s.id == "scenario") s.id = path.stem().string();
    return s;
}

} // namespace coinprune::netsim
