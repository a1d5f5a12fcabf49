#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "coinprune/bytes.hpp"
#include "coinprune/hash.hpp"

namespace coinprune::coordination {

struct PulseParams {
    std::uint32_t delta_p = 10000; // blocks between pulses
    std::uint32_t delta_r = 1000;  // reaffirmation window length
    std::uint32_t delta_d = 6;     // delay before the window opens
    std::uint32_t k = 5;           // acceptance threshold

    /// Throws std::invalid_argument unless 1 <= delta_r <= delta_p,
    /// delta_d < delta_p and k >= 1. Windows of consecutive pulses are then
    /// disjoint.
    void validate() const;

    bool operator==(const PulseParams&) const = default;
};

/// Height of pulse block i, i.e. i * delta_p. Throws for i == 0.
std::uint32_t pulse_height(std::uint32_t index, const PulseParams& params);

/// Reaffirmation window of a pulse: heights in (first - 1, last].
struct Window {
    std::uint32_t first = 0;
    std::uint32_t last = 0;
    bool contains(std::uint32_t height) const noexcept { return height >= first && height <= last; }
};

/// (pulse_height + delta_d, pulse_height + delta_d + delta_r]
Window reaffirmation_window(std::uint32_t index, const PulseParams& params);

/// Index of the pulse whose window contains `height`, if any.
std::optional<std::uint32_t> window_pulse(std::uint32_t height, const PulseParams& params);

/// Index of the most recent pulse whose window is fully closed at `tip`.
std::optional<std::uint32_t> last_closed_pulse(std::uint32_t tip, const PulseParams& params);

inline constexpr std::string_view kTagPrefix = "CoinPrune/";
inline constexpr std::size_t kEncodedTagSize = 43;

/// "CoinPrune/" || tag || "/"
Bytes encode_coinbase_tag(const Hash256& tag);
/// Throws std::invalid_argument unless `tag` is 32 bytes.
Bytes encode_coinbase_tag(ByteSpan tag);

/// First well-formed frame anywhere in the coinbase field; foreign data around
/// it is ignored.
std::optional<Hash256> parse_coinbase_tag(ByteSpan coinbase_data);

struct PulseOutcome {
    enum class Kind { Accepted, Skipped };
    Kind kind = Kind::Skipped;
    Hash256 tag;
    std::uint32_t count = 0;

    bool accepted() const noexcept { return kind == Kind::Accepted; }
    static PulseOutcome skipped() { return {}; }

    bool operator==(const PulseOutcome&) const = default;
};

/// Accepted(t, c) iff tag t has the unique maximum count c and c >= k.
/// Ties and maxima below k are Skipped.
PulseOutcome tally_counts(const std::map<Hash256, std::uint32_t>& counts, std::uint32_t k);

/// One entry per window block; std::nullopt for blocks without a frame.
/// Throws std::invalid_argument when the list length differs from delta_r.
PulseOutcome tally_window(std::span<const std::optional<Hash256>> tags, const PulseParams& params);

/// Fraction of window blocks that carry any CoinPrune frame.
double estimate_support(std::span<const std::optional<Hash256>> tags);

inline constexpr double kLowSupportThreshold = 0.10;

/// Low support (< 10%) retries aggressively with delta_p = delta_r = 100;
/// otherwise delta_r = 1000, delta_p = 10000. delta_d is 6 and k is kept.
PulseParams dynamic_params(double observed_support, std::uint32_t k = 5);

} // namespace coinprune::coordination
