#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "coinprune/bytes.hpp"
#include "coinprune/hash.hpp"

namespace coinprune::scripts {

enum class ScriptClass : std::uint8_t {
    P2PKH,
    P2SH,
    P2WPKH,
    P2WSH,
    P2PKCompressedEven,
    P2PKCompressedOdd,
    P2PKUncompressedEven,
    P2PKUncompressedOdd,
    P2MS,
    OpReturn,
    NonStandard,
};

std::string_view to_string(ScriptClass c) noexcept;

namespace op {
inline constexpr std::uint8_t OP_0 = 0x00;
inline constexpr std::uint8_t PUSHDATA1 = 0x4c;
inline constexpr std::uint8_t OP_1 = 0x51;
inline constexpr std::uint8_t OP_16 = 0x60;
inline constexpr std::uint8_t RETURN = 0x6a;
inline constexpr std::uint8_t DUP = 0x76;
inline constexpr std::uint8_t EQUAL = 0x87;
inline constexpr std::uint8_t EQUALVERIFY = 0x88;
inline constexpr std::uint8_t SHA256 = 0xa8;
inline constexpr std::uint8_t HASH160 = 0xa9;
inline constexpr std::uint8_t HASH256 = 0xaa;
inline constexpr std::uint8_t CHECKSIG = 0xac;
inline constexpr std::uint8_t CHECKMULTISIG = 0xae;
} // namespace op

/// One-byte compression case codes. Codes at or above kUncompressedOffset
/// carry a raw script of length (code - kUncompressedOffset).
namespace cases {
inline constexpr std::uint8_t P2PKH = 0x00;
inline constexpr std::uint8_t P2SH = 0x01;
inline constexpr std::uint8_t P2PKCompressedEven = 0x02;
inline constexpr std::uint8_t P2PKCompressedOdd = 0x03;
inline constexpr std::uint8_t P2PKUncompressedEven = 0x04;
inline constexpr std::uint8_t P2PKUncompressedOdd = 0x05;
inline constexpr std::uint8_t ObfuscatedP2PKH = 0x06;
inline constexpr std::uint8_t ObfuscatedP2SH = 0x07;
inline constexpr std::uint8_t ObfuscatedP2WPKH = 0x08;
inline constexpr std::uint8_t ObfuscatedP2WSH = 0x09;
inline constexpr std::uint8_t UncompressedOffset = 0x0a;
} // namespace cases

inline constexpr std::size_t kMaxUncompressedScript = 0xff - cases::UncompressedOffset;

class ScriptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// UTXO script in its stored form: case byte followed by payload.
struct CompressedTxOut {
    std::uint8_t case_code = 0;
    Bytes payload;

    bool is_obfuscated() const noexcept
    {
        return case_code >= cases::ObfuscatedP2PKH && case_code <= cases::ObfuscatedP2WSH;
    }

    std::size_t serialized_size() const noexcept { return 1 + payload.size(); }
    void serialize(ByteWriter& w) const;
    /// Reads a case byte and the payload length it implies.
    static CompressedTxOut parse(ByteReader& r);

    bool operator==(const CompressedTxOut&) const = default;
};

/// Payload length implied by a case code.
std::size_t payload_size_for(std::uint8_t case_code) noexcept;

ScriptClass classify_script(ByteSpan script) noexcept;

/// Throws ScriptError when an uncompressible script exceeds kMaxUncompressedScript.
CompressedTxOut compress(ByteSpan script);

/// Replaces the mutable commitment of P2PKH/P2SH/P2WPKH/P2WSH entries with its
/// hash256. Every other entry, including already obfuscated ones, is returned
/// unchanged.
CompressedTxOut obfuscate(const CompressedTxOut& entry);

bool is_obfuscatable(const CompressedTxOut& entry) noexcept;

/// Executable script for an entry. Obfuscated cases get an OP_HASH256 inserted
/// after the original hashing step. Throws ScriptError on a payload whose
/// length does not match the case.
Bytes decompress(const CompressedTxOut& entry);

/// Identifies the output being spent; the toy signature commits to it.
struct SpendContext {
    Hash256 txid;
    std::uint32_t vout = 0;
};

/// Whether `unlock` (a push-only data sequence) satisfies the entry's spending
/// condition. Malformed unlock data yields false.
bool validate_spend(const CompressedTxOut& entry, ByteSpan unlock, const SpendContext& ctx);

// Template builders.
Bytes p2pkh_script(const Hash160& key_hash);
Bytes p2sh_script(const Hash160& script_hash);
Bytes p2wpkh_script(const Hash160& key_hash);
Bytes p2wsh_script(const Hash256& script_hash);
Bytes p2pk_script(ByteSpan pubkey);
Bytes p2ms_script(int required, const std::vector<Bytes>& pubkeys);
Bytes op_return_script(ByteSpan payload);

/// Minimal push encoding of one data element.
void append_push(Bytes& script, ByteSpan data);
Bytes push_sequence(const std::vector<Bytes>& items);
/// Decodes a push-only script into its data elements; nullopt if any opcode is
/// not a data push.
std::optional<std::vector<Bytes>> parse_pushes(ByteSpan script);

// Toy key model: public keys are opaque byte strings and a signature over an
// output is hash256(pubkey || txid || vout).
Bytes toy_signature(ByteSpan pubkey, const SpendContext& ctx);

/// Uncompressed toy key 04 || x || y where y is a deterministic function of x
/// and the requested parity, so that x plus parity suffices to rebuild it.
Bytes toy_uncompressed_pubkey(const Hash256& x, bool odd_y);
bool is_valid_uncompressed_pubkey(ByteSpan pubkey) noexcept;

} // namespace coinprune::scripts
