#include "coinprune/coordination.hpp"

#include <algorithm>
#include <string>

namespace coinprune::coordination {

void PulseParams::validate() const
{
    if (delta_p == 0 || delta_r == 0) throw std::invalid_argument("delta_p and delta_r must be positive");
    if (k < 1) throw std::invalid_argument("acceptance threshold k must be at least 1");
    if (delta_r > delta_p) throw std::invalid_argument("delta_r must not exceed delta_p");
    if (delta_d >= delta_p) throw std::invalid_argument("delta_d must be smaller than delta_p");
}

std::uint32_t pulse_height(std::uint32_t index, const PulseParams& params)
{
    if (index == 0) throw std::invalid_argument("pulse indices start at 1; genesis is not a pulse");
    const auto h = static_cast<std::uint64_t>(index) * params.delta_p;
    if (h > UINT32_MAX) throw std::out_of_range("pulse height overflows 32 bits");
    return static_cast<std::uint32_t>(h);
}

Window reaffirmation_window(std::uint32_t index, const PulseParams& params)
{
    const auto h = pulse_height(index, params);
    return Window{h + params.delta_d + 1, h + params.delta_d + params.delta_r};
}

std::optional<std::uint32_t> window_pulse(std::uint32_t height, const PulseParams& params)
{
    if (height <= params.delta_d) return std::nullopt;
    // With delta_r <= delta_p only floor((h - 1 - d) / p) can match.
    const std::uint32_t index = (height - params.delta_d - 1) / params.delta_p;
    if (index == 0) return std::nullopt;
    if (reaffirmation_window(index, params).contains(height)) return index;
    return std::nullopt;
}

std::optional<std::uint32_t> last_closed_pulse(std::uint32_t tip, const PulseParams& params)
{
    if (tip < params.delta_p + params.delta_d + params.delta_r) return std::nullopt;
    return (tip - params.delta_d - params.delta_r) / params.delta_p;
}

Bytes encode_coinbase_tag(const Hash256& tag)
{
    Bytes out(kTagPrefix.begin(), kTagPrefix.end());
    out.insert(out.end(), tag.bytes.begin(), tag.bytes.end());
    out.push_back('/');
    return out;
}

Bytes encode_coinbase_tag(ByteSpan tag)
{
    if (tag.size() != 32) throw std::invalid_argument("reaffirmation tag must be 32 bytes");
    return encode_coinbase_tag(Hash256::from_span(tag));
}

std::optional<Hash256> parse_coinbase_tag(ByteSpan data)
{
    if (data.size() < kEncodedTagSize) return std::nullopt;
    const auto prefix = ByteSpan(reinterpret_cast<const std::uint8_t*>(kTagPrefix.data()), kTagPrefix.size());
    for (std::size_t i = 0; i + kEncodedTagSize <= data.size(); ++i) {
        if (!std::equal(prefix.begin(), prefix.end(), data.begin() + static_cast<std::ptrdiff_t>(i))) continue;
        if (data[i + kEncodedTagSize - 1] != '/') continue;
        return Hash256::from_span(data.subspan(i + kTagPrefix.size(), 32));
    }
    return std::nullopt;
}

PulseOutcome tally_counts(const std::map<Hash256, std::uint32_t>& counts, std::uint32_t k)
{
    PulseOutcome best;
    bool tie = false;
    for (const auto& [tag, c] : counts) {
        if (c > best.count) {
            best.count = c;
            best.tag = tag;
            tie = false;
        } else if (c == best.count && c > 0) {
            tie = true;
        }
    }
    if (tie || best.count < k || best.count == 0) return PulseOutcome::skipped();
    best.kind = PulseOutcome::Kind::Accepted;
    return best;
}

PulseOutcome tally_window(std::span<const std::optional<Hash256>> tags, const PulseParams& params)
{
    if (tags.size() != params.delta_r)
        throw std::invalid_argument("window holds " + std::to_string(tags.size()) + " blocks, expected " +
                                    std::to_string(params.delta_r));
    std::map<Hash256, std::uint32_t> counts;
    for (const auto& t : tags)
        if (t) ++counts[*t];
    return tally_counts(counts, params.k);
}

double estimate_support(std::span<const std::optional<Hash256>> tags)
{
    if (tags.empty()) return 0.0;
    const auto n = std::count_if(tags.begin(), tags.end(), [](const auto& t) { return t.has_value(); });
    return static_cast<double>(n) / static_cast<double>(tags.size());
}

PulseParams dynamic_params(double observed_support, std::uint32_t k)
{
    if (!(observed_support >= 0.0 && observed_support <= 1.0))
        throw std::invalid_argument("support must lie in [0, 1]");
    PulseParams p;
    p.delta_d = 6;
    p.k = k;
    if (observed_support < kLowSupportThreshold) {
        p.delta_p = 100;
        p.delta_r = 100;
    } else {
        p.delta_p = 10000;
        p.delta_r = 1000;
    }
    return p;
}

} // namespace coinprune::coordination
