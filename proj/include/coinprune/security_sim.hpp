#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace coinprune::security {

enum class TrialOutcome { CorrectAccepted, AdversaryAccepted, SkippedPulse };

/// Integer miner population of one grid cell. `supporters` = floor(f_C * n)
/// and `adversaries` = floor(f_A * supporters), computed from integer grid
/// indices so no floating point rounding enters.
struct Population {
    std::uint32_t n_miners = 1000;
    std::uint32_t supporters = 0;
    std::uint32_t adversaries = 0;

    static Population from_grid(std::uint32_t n_miners, std::uint32_t fc_index, std::uint32_t fa_index,
                                std::uint32_t steps = 100);
    double f_c() const noexcept { return static_cast<double>(supporters) / n_miners; }
    /// Fraction of supporters that are adversarial (0 when there are none).
    double f_a() const noexcept { return supporters ? static_cast<double>(adversaries) / supporters : 0.0; }
};

/// Per-block miner draw, tallied by coordination::tally_window.
TrialOutcome run_trial_blockwise(const Population& pop, std::uint32_t delta_r, std::uint32_t k, std::mt19937_64& rng);

/// n ~ Bin(delta_r, f_C), a ~ Bin(n, f_A), h = n - a.
TrialOutcome run_trial_binomial(const Population& pop, std::uint32_t delta_r, std::uint32_t k, std::mt19937_64& rng);

/// Pure outcome rule shared by the fast path: strict majority and at least k.
TrialOutcome classify_counts(std::uint32_t adversarial, std::uint32_t honest, std::uint32_t k) noexcept;

enum class Method { Binomial, Blockwise };

struct SweepConfig {
    std::uint32_t n_miners = 1000;
    std::uint32_t steps = 100; // grid points 0..steps inclusive on both axes
    std::vector<std::uint32_t> delta_r = {100, 1000};
    std::vector<std::uint32_t> k = {5, 10, 20};
    std::uint32_t trials = 1000;
    std::uint64_t seed = 1;
    Method method = Method::Binomial;
    unsigned jobs = 1;

    void validate() const;
};

struct SweepRow {
    std::uint32_t fc_index = 0;
    std::uint32_t fa_index = 0;
    double f_c = 0;
    double f_a = 0;
    std::uint32_t delta_r = 0;
    std::uint32_t k = 0;
    std::uint32_t correct = 0;
    std::uint32_t adversary = 0;
    std::uint32_t skipped = 0;
    std::uint32_t trials = 0;

    double p_correct() const noexcept { return static_cast<double>(correct) / trials; }
    double p_adversary() const noexcept { return static_cast<double>(adversary) / trials; }
    double p_skipped() const noexcept { return static_cast<double>(skipped) / trials; }
};

struct ThresholdRow {
    double f_c = 0;
    std::uint32_t fc_index = 0;
    std::uint32_t delta_r = 0;
    std::uint32_t k = 0;
    /// Least f_A with p_adversary >= 0.05; empty when no cell reaches it.
    std::optional<double> min_fa_compromise;
    double worst_skip = 0;
};

inline constexpr double kCompromiseLevel = 0.05;

struct SweepResult {
    SweepConfig config;
    /// Ordered by (delta_r, k, f_C, f_A) following the config's lists.
    std::vector<SweepRow> rows;

    std::vector<ThresholdRow> thresholds() const;
    const SweepRow& at(std::uint32_t delta_r, std::uint32_t k, std::uint32_t fc_index, std::uint32_t fa_index) const;

    std::string csv() const;
    std::string thresholds_csv() const;
};

/// RNG stream of one cell; independent of evaluation order and thread count.
std::mt19937_64 cell_rng(std::uint64_t seed, std::uint32_t fc_index, std::uint32_t fa_index, std::uint32_t delta_r,
                         std::uint32_t k);

SweepRow run_cell(const SweepConfig& cfg, std::uint32_t delta_r, std::uint32_t k, std::uint32_t fc_index,
                  std::uint32_t fa_index);

SweepResult sweep(const SweepConfig& cfg);

} // namespace coinprune::security
