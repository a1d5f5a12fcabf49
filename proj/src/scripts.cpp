#include "coinprune/scripts.hpp"

#include <algorithm>

namespace coinprune::scripts {

std::string_view to_string(ScriptClass c) noexcept
{
    switch (c) {
    case ScriptClass::P2PKH: return "P2PKH";
    case ScriptClass::P2SH: return "P2SH";
    case ScriptClass::P2WPKH: return "P2WPKH";
    case ScriptClass::P2WSH: return "P2WSH";
    case ScriptClass::P2PKCompressedEven: return "P2PK_compressed_even";
    case ScriptClass::P2PKCompressedOdd: return "P2PK_compressed_odd";
    case ScriptClass::P2PKUncompressedEven: return "P2PK_uncompressed_even";
    case ScriptClass::P2PKUncompressedOdd: return "P2PK_uncompressed_odd";
    case ScriptClass::P2MS: return "P2MS";
    case ScriptClass::OpReturn: return "OpReturn";
    case ScriptClass::NonStandard: return "NonStandard";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Toy key model

namespace {

Hash256 derive_y(const Hash256& x, bool odd)
{
    Bytes seed = to_bytes("toy-curve-y");
    seed.insert(seed.end(), x.bytes.begin(), x.bytes.end());
    auto y = sha256(seed);
    y.bytes[31] = static_cast<std::uint8_t>((y.bytes[31] & 0xfe) | (odd ? 1 : 0));
    return y;
}

} // namespace

Bytes toy_signature(ByteSpan pubkey, const SpendContext& ctx)
{
    ByteWriter w(pubkey.size() + 36);
    w.raw(pubkey);
    w.raw(ctx.txid.span());
    w.u32(ctx.vout);
    const auto sig = hash256(w.view());
    return Bytes(sig.bytes.begin(), sig.bytes.end());
}

Bytes toy_uncompressed_pubkey(const Hash256& x, bool odd_y)
{
    Bytes key;
    key.reserve(65);
    key.push_back(0x04);
    key.insert(key.end(), x.bytes.begin(), x.bytes.end());
    const auto y = derive_y(x, odd_y);
    key.insert(key.end(), y.bytes.begin(), y.bytes.end());
    return key;
}

bool is_valid_uncompressed_pubkey(ByteSpan pubkey) noexcept
{
    if (pubkey.size() != 65 || pubkey[0] != 0x04) return false;
    Hash256 x;
    std::copy_n(pubkey.begin() + 1, 32, x.bytes.begin());
    const bool odd = (pubkey[64] & 1) != 0;
    const auto y = derive_y(x, odd);
    return std::equal(y.bytes.begin(), y.bytes.end(), pubkey.begin() + 33);
}

// ---------------------------------------------------------------------------
// Templates

void append_push(Bytes& script, ByteSpan data)
{
    if (data.empty()) {
        script.push_back(op::OP_0);
    } else if (data.size() < op::PUSHDATA1) {
        script.push_back(static_cast<std::uint8_t>(data.size()));
    } else if (data.size() <= 0xff) {
        script.push_back(op::PUSHDATA1);
        script.push_back(static_cast<std::uint8_t>(data.size()));
    } else {
        throw ScriptError("push larger than 255 bytes is not supported");
    }
    script.insert(script.end(), data.begin(), data.end());
}

Bytes push_sequence(const std::vector<Bytes>& items)
{
    Bytes out;
    for (const auto& item : items) append_push(out, item);
    return out;
}

std::optional<std::vector<Bytes>> parse_pushes(ByteSpan script)
{
    std::vector<Bytes> items;
    std::size_t i = 0;
    while (i < script.size()) {
        const std::uint8_t opcode = script[i++];
        std::size_t len = 0;
        if (opcode == op::OP_0) {
            len = 0;
        } else if (opcode < op::PUSHDATA1) {
            len = opcode;
        } else if (opcode == op::PUSHDATA1) {
            if (i >= script.size()) return std::nullopt;
            len = script[i++];
        } else {
            return std::nullopt;
        }
        if (script.size() - i < len) return std::nullopt;
        items.emplace_back(script.begin() + static_cast<std::ptrdiff_t>(i),
                           script.begin() + static_cast<std::ptrdiff_t>(i + len));
        i += len;
    }
    return items;
}

Bytes p2pkh_script(const Hash160& key_hash)
{
    Bytes s{op::DUP, op::HASH160, 0x14};
    s.insert(s.end(), key_hash.bytes.begin(), key_hash.bytes.end());
    s.push_back(op::EQUALVERIFY);
    s.push_back(op::CHECKSIG);
    return s;
}

Bytes p2sh_script(const Hash160& script_hash)
{
    Bytes s{op::HASH160, 0x14};
    s.insert(s.end(), script_hash.bytes.begin(), script_hash.bytes.end());
    s.push_back(op::EQUAL);
    return s;
}

Bytes p2wpkh_script(const Hash160& key_hash)
{
    Bytes s{op::OP_0, 0x14};
    s.insert(s.end(), key_hash.bytes.begin(), key_hash.bytes.end());
    return s;
}

Bytes p2wsh_script(const Hash256& script_hash)
{
    Bytes s{op::OP_0, 0x20};
    s.insert(s.end(), script_hash.bytes.begin(), script_hash.bytes.end());
    return s;
}

Bytes p2pk_script(ByteSpan pubkey)
{
    Bytes s;
    append_push(s, pubkey);
    s.push_back(op::CHECKSIG);
    return s;
}

Bytes p2ms_script(int required, const std::vector<Bytes>& pubkeys)
{
    if (required < 1 || required > static_cast<int>(pubkeys.size()) || pubkeys.size() > 16)
        throw ScriptError("invalid multisig parameters");
    Bytes s{static_cast<std::uint8_t>(op::OP_1 + required - 1)};
    for (const auto& k : pubkeys) append_push(s, k);
    s.push_back(static_cast<std::uint8_t>(op::OP_1 + pubkeys.size() - 1));
    s.push_back(op::CHECKMULTISIG);
    return s;
}

Bytes op_return_script(ByteSpan payload)
{
    Bytes s{op::RETURN};
    if (!payload.empty()) append_push(s, payload);
    return s;
}

// ---------------------------------------------------------------------------
// Classification and compression

namespace {

bool is_p2ms(ByteSpan s) noexcept
{
    if (s.size() < 3 || s.back() != op::CHECKMULTISIG) return false;
    const std::uint8_t m_op = s[0];
    const std::uint8_t n_op = s[s.size() - 2];
    if (m_op < op::OP_1 || m_op > op::OP_16 || n_op < op::OP_1 || n_op > op::OP_16) return false;
    const int m = m_op - op::OP_1 + 1;
    const int n = n_op - op::OP_1 + 1;
    if (m > n) return false;
    std::size_t i = 1;
    int keys = 0;
    while (i < s.size() - 2) {
        const std::uint8_t len = s[i];
        if (len == 33) {
            if (i + 34 > s.size() - 2 || (s[i + 1] != 0x02 && s[i + 1] != 0x03)) return false;
        } else if (len == 65) {
            if (i + 66 > s.size() - 2 || s[i + 1] != 0x04) return false;
        } else {
            return false;
        }
        i += 1 + len;
        ++keys;
    }
    return keys == n;
}

} // namespace

ScriptClass classify_script(ByteSpan s) noexcept
{
    if (s.empty()) return ScriptClass::NonStandard;
    if (s[0] == op::RETURN) return ScriptClass::OpReturn;
    if (s.size() == 25 && s[0] == op::DUP && s[1] == op::HASH160 && s[2] == 0x14 &&
        s[23] == op::EQUALVERIFY && s[24] == op::CHECKSIG)
        return ScriptClass::P2PKH;
    if (s.size() == 23 && s[0] == op::HASH160 && s[1] == 0x14 && s[22] == op::EQUAL) return ScriptClass::P2SH;
    if (s.size() == 22 && s[0] == op::OP_0 && s[1] == 0x14) return ScriptClass::P2WPKH;
    if (s.size() == 34 && s[0] == op::OP_0 && s[1] == 0x20) return ScriptClass::P2WSH;
    if (s.size() == 35 && s[0] == 33 && s[34] == op::CHECKSIG) {
        if (s[1] == 0x02) return ScriptClass::P2PKCompressedEven;
        if (s[1] == 0x03) return ScriptClass::P2PKCompressedOdd;
    }
    if (s.size() == 67 && s[0] == 65 && s[66] == op::CHECKSIG && is_valid_uncompressed_pubkey(s.subspan(1, 65)))
        return (s[65] & 1) ? ScriptClass::P2PKUncompressedOdd : ScriptClass::P2PKUncompressedEven;
    if (is_p2ms(s)) return ScriptClass::P2MS;
    return ScriptClass::NonStandard;
}

std::size_t payload_size_for(std::uint8_t case_code) noexcept
{
    if (case_code <= cases::P2SH) return 20;
    if (case_code < cases::UncompressedOffset) return 32;
    return static_cast<std::size_t>(case_code - cases::UncompressedOffset);
}

void CompressedTxOut::serialize(ByteWriter& w) const
{
    w.u8(case_code);
    w.raw(payload);
}

CompressedTxOut CompressedTxOut::parse(ByteReader& r)
{
    CompressedTxOut out;
    out.case_code = r.u8();
    const auto body = r.raw(payload_size_for(out.case_code));
    out.payload.assign(body.begin(), body.end());
    return out;
}

CompressedTxOut compress(ByteSpan script)
{
    const auto slice = [&](std::size_t from, std::size_t len) {
        return Bytes(script.begin() + static_cast<std::ptrdiff_t>(from),
                     script.begin() + static_cast<std::ptrdiff_t>(from + len));
    };
    switch (classify_script(script)) {
    case ScriptClass::P2PKH: return {cases::P2PKH, slice(3, 20)};
    case ScriptClass::P2SH: return {cases::P2SH, slice(2, 20)};
    case ScriptClass::P2PKCompressedEven: return {cases::P2PKCompressedEven, slice(2, 32)};
    case ScriptClass::P2PKCompressedOdd: return {cases::P2PKCompressedOdd, slice(2, 32)};
    case ScriptClass::P2PKUncompressedEven: return {cases::P2PKUncompressedEven, slice(2, 32)};
    case ScriptClass::P2PKUncompressedOdd: return {cases::P2PKUncompressedOdd, slice(2, 32)};
    default: break;
    }
    if (script.size() > kMaxUncompressedScript)
        throw ScriptError("script of " + std::to_string(script.size()) + " bytes exceeds the uncompressed maximum");
    return {static_cast<std::uint8_t>(script.size() + cases::UncompressedOffset), Bytes(script.begin(), script.end())};
}

bool is_obfuscatable(const CompressedTxOut& entry) noexcept
{
    if (entry.case_code == cases::P2PKH || entry.case_code == cases::P2SH) return true;
    if (entry.case_code < cases::UncompressedOffset) return false;
    const auto cls = classify_script(entry.payload);
    return cls == ScriptClass::P2WPKH || cls == ScriptClass::P2WSH;
}

CompressedTxOut obfuscate(const CompressedTxOut& entry)
{
    const auto commit = [](ByteSpan value) {
        const auto h = hash256(value);
        return Bytes(h.bytes.begin(), h.bytes.end());
    };
    if (entry.payload.size() != payload_size_for(entry.case_code)) return entry;
    switch (entry.case_code) {
    case cases::P2PKH: return {cases::ObfuscatedP2PKH, commit(entry.payload)};
    case cases::P2SH: return {cases::ObfuscatedP2SH, commit(entry.payload)};
    default: break;
    }
    if (entry.case_code >= cases::UncompressedOffset) {
        const ByteSpan raw(entry.payload);
        switch (classify_script(raw)) {
        case ScriptClass::P2WPKH: return {cases::ObfuscatedP2WPKH, commit(raw.subspan(2, 20))};
        case ScriptClass::P2WSH: return {cases::ObfuscatedP2WSH, commit(raw.subspan(2, 32))};
        default: break;
        }
    }
    return entry;
}

Bytes decompress(const CompressedTxOut& entry)
{
    const auto& p = entry.payload;
    if (p.size() != payload_size_for(entry.case_code))
        throw ScriptError("payload of " + std::to_string(p.size()) + " bytes does not match case 0x" +
                          to_hex(ByteSpan(&entry.case_code, 1)));
    const auto with = [&](std::initializer_list<std::uint8_t> head, std::initializer_list<std::uint8_t> tail) {
        Bytes s(head);
        s.insert(s.end(), p.begin(), p.end());
        s.insert(s.end(), tail);
        return s;
    };
    switch (entry.case_code) {
    case cases::P2PKH: return with({op::DUP, op::HASH160, 0x14}, {op::EQUALVERIFY, op::CHECKSIG});
    case cases::P2SH: return with({op::HASH160, 0x14}, {op::EQUAL});
    case cases::P2PKCompressedEven: return with({33, 0x02}, {op::CHECKSIG});
    case cases::P2PKCompressedOdd: return with({33, 0x03}, {op::CHECKSIG});
    case cases::P2PKUncompressedEven:
    case cases::P2PKUncompressedOdd: {
        const auto x = Hash256::from_span(p);
        return p2pk_script(toy_uncompressed_pubkey(x, entry.case_code == cases::P2PKUncompressedOdd));
    }
    case cases::ObfuscatedP2PKH:
        return with({op::DUP, op::HASH160, op::HASH256, 0x20}, {op::EQUALVERIFY, op::CHECKSIG});
    case cases::ObfuscatedP2SH: return with({op::HASH160, op::HASH256, 0x20}, {op::EQUAL});
    case cases::ObfuscatedP2WPKH: return with({op::OP_0, op::HASH160, op::HASH256, 0x20}, {});
    case cases::ObfuscatedP2WSH: return with({op::OP_0, op::SHA256, op::HASH256, 0x20}, {});
    default: return p;
    }
}

// ---------------------------------------------------------------------------
// Spend validation: a small stack machine over the template subset.

namespace {

using Stack = std::vector<Bytes>;

bool truthy(const Bytes& v)
{
    return std::any_of(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; });
}

Bytes digest_bytes(ByteSpan d) { return Bytes(d.begin(), d.end()); }

bool check_sig(const Bytes& sig, const Bytes& pubkey, const SpendContext& ctx)
{
    return !pubkey.empty() && sig == toy_signature(pubkey, ctx);
}

bool execute(ByteSpan script, Stack& stack, const SpendContext& ctx)
{
    std::size_t i = 0;
    const auto pop = [&stack](Bytes& out) {
        if (stack.empty()) return false;
        out = std::move(stack.back());
        stack.pop_back();
        return true;
    };
    while (i < script.size()) {
        const std::uint8_t opcode = script[i++];
        if (opcode == op::OP_0) {
            stack.emplace_back();
        } else if (opcode < op::PUSHDATA1 || opcode == op::PUSHDATA1) {
            std::size_t len = opcode;
            if (opcode == op::PUSHDATA1) {
                if (i >= script.size()) return false;
                len = script[i++];
            }
            if (script.size() - i < len) return false;
            stack.emplace_back(script.begin() + static_cast<std::ptrdiff_t>(i),
                               script.begin() + static_cast<std::ptrdiff_t>(i + len));
            i += len;
        } else if (opcode >= op::OP_1 && opcode <= op::OP_16) {
            stack.push_back(Bytes{static_cast<std::uint8_t>(opcode - op::OP_1 + 1)});
        } else {
            Bytes a;
            Bytes b;
            switch (opcode) {
            case op::DUP:
                if (stack.empty()) return false;
                stack.push_back(stack.back());
                break;
            case op::HASH160:
                if (!pop(a)) return false;
                stack.push_back(digest_bytes(hash160(a).span()));
                break;
            case op::HASH256:
                if (!pop(a)) return false;
                stack.push_back(digest_bytes(hash256(a).span()));
                break;
            case op::SHA256:
                if (!pop(a)) return false;
                stack.push_back(digest_bytes(sha256(a).span()));
                break;
            case op::EQUAL:
            case op::EQUALVERIFY:
                if (!pop(a) || !pop(b)) return false;
                if (opcode == op::EQUALVERIFY) {
                    if (a != b) return false;
                } else {
                    stack.push_back(a == b ? Bytes{1} : Bytes{});
                }
                break;
            case op::CHECKSIG:
                if (!pop(a) || !pop(b)) return false;
                stack.push_back(check_sig(b, a, ctx) ? Bytes{1} : Bytes{});
                break;
            case op::CHECKMULTISIG: {
                if (!pop(a) || a.size() != 1) return false;
                const std::size_t n = a[0];
                if (stack.size() < n + 1) return false;
                std::vector<Bytes> keys(n);
                for (std::size_t k = n; k-- > 0;) pop(keys[k]);
                if (!pop(a) || a.size() != 1) return false;
                const std::size_t m = a[0];
                if (m > n || stack.size() < m) return false;
                std::vector<Bytes> sigs(m);
                for (std::size_t k = m; k-- > 0;) pop(sigs[k]);
                std::size_t key = 0;
                bool ok = true;
                for (const auto& sig : sigs) {
                    while (key < n && !check_sig(sig, keys[key], ctx)) ++key;
                    if (key == n) {
                        ok = false;
                        break;
                    }
                    ++key;
                }
                stack.push_back(ok ? Bytes{1} : Bytes{});
                break;
            }
            default:
                // OP_RETURN and everything outside the template subset.
                return false;
            }
        }
    }
    return true;
}

bool run_to_success(ByteSpan script, Stack stack, const SpendContext& ctx)
{
    return execute(script, stack, ctx) && !stack.empty() && truthy(stack.back());
}

// Script-hash rule: the last unlock element is the redeem script; it must
// satisfy the commitment check, then runs against the remaining elements.
bool run_script_hash(ByteSpan commitment_check, Stack stack, const SpendContext& ctx)
{
    if (stack.empty()) return false;
    if (!run_to_success(commitment_check, stack, ctx)) return false;
    const Bytes redeem = std::move(stack.back());
    stack.pop_back();
    return run_to_success(redeem, std::move(stack), ctx);
}

Bytes make(std::initializer_list<std::uint8_t> head, ByteSpan body, std::initializer_list<std::uint8_t> tail)
{
    Bytes s(head);
    s.insert(s.end(), body.begin(), body.end());
    s.insert(s.end(), tail);
    return s;
}

} // namespace

bool validate_spend(const CompressedTxOut& entry, ByteSpan unlock, const SpendContext& ctx)
{
    auto pushes = parse_pushes(unlock);
    if (!pushes) return false;
    Bytes script;
    try {
        script = decompress(entry);
    } catch (const ScriptError&) {
        return false;
    }
    Stack stack = std::move(*pushes);
    const ByteSpan p(entry.payload);

    switch (entry.case_code) {
    case cases::P2SH:
    case cases::ObfuscatedP2SH:
        return run_script_hash(script, std::move(stack), ctx);
    case cases::ObfuscatedP2WPKH:
        return run_to_success(make({op::DUP, op::HASH160, op::HASH256, 0x20}, p, {op::EQUALVERIFY, op::CHECKSIG}),
                              std::move(stack), ctx);
    case cases::ObfuscatedP2WSH:
        return run_script_hash(make({op::SHA256, op::HASH256, 0x20}, p, {op::EQUAL}), std::move(stack), ctx);
    default:
        break;
    }
    if (entry.case_code >= cases::UncompressedOffset) {
        switch (classify_script(script)) {
        case ScriptClass::OpReturn: return false;
        case ScriptClass::P2SH: return run_script_hash(script, std::move(stack), ctx);
        case ScriptClass::P2WPKH:
            return run_to_success(make({op::DUP, op::HASH160, 0x14}, p.subspan(2, 20), {op::EQUALVERIFY, op::CHECKSIG}),
                                  std::move(stack), ctx);
        case ScriptClass::P2WSH:
            return run_script_hash(make({op::SHA256, 0x20}, p.subspan(2, 32), {op::EQUAL}), std::move(stack), ctx);
        default: break;
        }
    }
    return run_to_success(script, std::move(stack), ctx);
}

} // namespace coinprune::scripts
