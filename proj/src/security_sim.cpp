#include "coinprune/security_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "coinprune/coordination.hpp"

namespace coinprune::security {

Population Population::from_grid(std::uint32_t n_miners, std::uint32_t fc_index, std::uint32_t fa_index,
                                 std::uint32_t steps)
{
    if (steps == 0 || fc_index > steps || fa_index > steps) throw std::invalid_argument("grid index out of range");
    Population p;
    p.n_miners = n_miners;
    p.supporters = static_cast<std::uint32_t>(static_cast<std::uint64_t>(fc_index) * n_miners / steps);
    p.adversaries = static_cast<std::uint32_t>(static_cast<std::uint64_t>(fa_index) * p.supporters / steps);
    return p;
}

TrialOutcome classify_counts(std::uint32_t adversarial, std::uint32_t honest, std::uint32_t k) noexcept
{
    if (adversarial > honest && adversarial >= k) return TrialOutcome::AdversaryAccepted;
    if (honest > adversarial && honest >= k) return TrialOutcome::CorrectAccepted;
    return TrialOutcome::SkippedPulse;
}

namespace {

const Hash256& honest_tag()
{
    static const Hash256 t = hash256(to_bytes("honest snapshot"));
    return t;
}

const Hash256& bogus_tag()
{
    static const Hash256 t = hash256(to_bytes("bogus snapshot"));
    return t;
}

} // namespace

TrialOutcome run_trial_blockwise(const Population& pop, std::uint32_t delta_r, std::uint32_t k, std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::uint32_t> miner(0, pop.n_miners - 1);
    std::vector<std::optional<Hash256>> tags(delta_r);
    for (auto& t : tags) {
        const auto m = miner(rng);
        if (m < pop.adversaries)
            t = bogus_tag();
        else if (m < pop.supporters)
            t = honest_tag();
    }
    coordination::PulseParams params;
    params.delta_r = delta_r;
    params.k = k;
    const auto out = coordination::tally_window(tags, params);
    if (!out.accepted()) return TrialOutcome::SkippedPulse;
    return out.tag == honest_tag() ? TrialOutcome::CorrectAccepted : TrialOutcome::AdversaryAccepted;
}

TrialOutcome run_trial_binomial(const Population& pop, std::uint32_t delta_r, std::uint32_t k, std::mt19937_64& rng)
{
    std::uint32_t n = 0;
    if (pop.supporters > 0) {
        std::binomial_distribution<std::uint32_t> blocks(delta_r, pop.f_c());
        n = blocks(rng);
    }
    std::uint32_t a = 0;
    if (pop.adversaries > 0 && n > 0) {
        std::binomial_distribution<std::uint32_t> adv(n, pop.f_a());
        a = adv(rng);
    }
    return classify_counts(a, n - a, k);
}

void SweepConfig::validate() const
{
    if (n_miners == 0) throw std::invalid_argument("n_miners must be positive");
    if (steps == 0) throw std::invalid_argument("grid steps must be positive");
    if (trials == 0) throw std::invalid_argument("trials must be positive");
    if (delta_r.empty() || k.empty()) throw std::invalid_argument("delta_r and k lists must not be empty");
    for (auto d : delta_r)
        if (d == 0) throw std::invalid_argument("delta_r must be positive");
    for (auto v : k)
        if (v == 0) throw std::invalid_argument("k must be positive");
}

std::mt19937_64 cell_rng(std::uint64_t seed, std::uint32_t fc_index, std::uint32_t fa_index, std::uint32_t delta_r,
                         std::uint32_t k)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), fc_index, fa_index,
                      delta_r, k};
    return std::mt19937_64(seq);
}

SweepRow run_cell(const SweepConfig& cfg, std::uint32_t delta_r, std::uint32_t k, std::uint32_t fc_index,
                  std::uint32_t fa_index)
{
    const auto pop = Population::from_grid(cfg.n_miners, fc_index, fa_index, cfg.steps);
    auto rng = cell_rng(cfg.seed, fc_index, fa_index, delta_r, k);
    SweepRow row;
    row.fc_index = fc_index;
    row.fa_index = fa_index;
    row.f_c = static_cast<double>(fc_index) / cfg.steps;
    row.f_a = static_cast<double>(fa_index) / cfg.steps;
    row.delta_r = delta_r;
    row.k = k;
    row.trials = cfg.trials;
    for (std::uint32_t t = 0; t < cfg.trials; ++t) {
        const auto o = cfg.method == Method::Binomial ? run_trial_binomial(pop, delta_r, k, rng)
                                                      : run_trial_blockwise(pop, delta_r, k, rng);
        switch (o) {
        case TrialOutcome::CorrectAccepted: ++row.correct; break;
        case TrialOutcome::AdversaryAccepted: ++row.adversary; break;
        case TrialOutcome::SkippedPulse: ++row.skipped; break;
        }
    }
    return row;
}

SweepResult sweep(const SweepConfig& cfg)
{
    cfg.validate();
    const std::size_t side = cfg.steps + 1;
    const std::size_t per_pair = side * side;
    const std::size_t total = cfg.delta_r.size() * cfg.k.size() * per_pair;

    SweepResult result;
    result.config = cfg;
    result.rows.resize(total);

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < total; i = next++) {
            const auto pair = i / per_pair;
            const auto cell = i % per_pair;
            const auto dr = cfg.delta_r[pair / cfg.k.size()];
            const auto k = cfg.k[pair % cfg.k.size()];
            result.rows[i] = run_cell(cfg, dr, k, static_cast<std::uint32_t>(cell / side),
                                      static_cast<std::uint32_t>(cell % side));
        }
    };
    const unsigned jobs = std::max(1u, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    return result;
}

const SweepRow& SweepResult::at(std::uint32_t delta_r, std::uint32_t k, std::uint32_t fc_index,
                                std::uint32_t fa_index) const
{
    const auto dr_it = std::find(config.delta_r.begin(), config.delta_r.end(), delta_r);
    const auto k_it = std::find(config.k.begin(), config.k.end(), k);
    if (dr_it == config.delta_r.end() || k_it == config.k.end() || fc_index > config.steps || fa_index > config.steps)
        throw std::out_of_range("cell not part of the sweep");
    const std::size_t side = config.steps + 1;
    const std::size_t pair = static_cast<std::size_t>(dr_it - config.delta_r.begin()) * config.k.size() +
                             static_cast<std::size_t>(k_it - config.k.begin());
    return rows[pair * side * side + fc_index * side + fa_index];
}

std::vector<ThresholdRow> SweepResult::thresholds() const
{
    std::vector<ThresholdRow> out;
    for (auto dr : config.delta_r)
        for (auto k : config.k)
            for (std::uint32_t i = 0; i <= config.steps; ++i) {
                ThresholdRow t;
                t.fc_index = i;
                t.f_c = static_cast<double>(i) / config.steps;
                t.delta_r = dr;
                t.k = k;
                for (std::uint32_t j = 0; j <= config.steps; ++j) {
                    const auto& r = at(dr, k, i, j);
                    if (!t.min_fa_compromise && r.p_adversary() >= kCompromiseLevel) t.min_fa_compromise = r.f_a;
                    t.worst_skip = std::max(t.worst_skip, r.p_skipped());
                }
                out.push_back(t);
            }
    return out;
}

std::string SweepResult::csv() const
{
    std::string s = "f_C,f_A,delta_r,k,p_correct,p_adversary,p_skipped\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f,%u,%u,%.6f,%.6f,%.6f\n", r.f_c, r.f_a, r.delta_r, r.k,
                      r.p_correct(), r.p_adversary(), r.p_skipped());
        s += buf;
    }
    return s;
}

std::string SweepResult::thresholds_csv() const
{
    std::string s = "f_C,delta_r,k,min_fA_compromise,worst_skip\n";
    char buf[160];
    for (const auto& t : thresholds()) {
        char fa[32] = "";
        if (t.min_fa_compromise) std::snprintf(fa, sizeof fa, "%.2f", *t.min_fa_compromise);
        std::snprintf(buf, sizeof buf, "%.2f,%u,%u,%s,%.6f\n", t.f_c, t.delta_r, t.k, fa, t.worst_skip);
        s += buf;
    }
    return s;
}

} // namespace coinprune::security
