#pragma once

// Extended compact GA: a marginal product model (MPM) is learned greedily
// under the combined-complexity criterion from a tournament-selected copy
// of the population, then sampled to create offspring.

#include "core.hpp"
#include "engine.hpp"
#include "ga.hpp"
#include "problems.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace aeasim
{

struct MarginalProductModel
{
    Partition partition;
    // Per subset: (sub-genotype value, count) for every value observed in the
    // selected population. Values pack the subset's bits, first most
    // significant.
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> tables;
    std::size_t sample_size = 0;
    std::size_t uses_left = 0;
};

namespace detail
{
inline std::vector<std::uint32_t> subset_values(std::span<const Genotype> genotypes,
                                                const std::vector<std::size_t> &subset)
{
    std::vector<std::uint32_t> v(genotypes.size(), 0);
    for (std::size_t m = 0; m < genotypes.size(); ++m)
    {
        std::uint32_t x = 0;
        for (std::size_t pos : subset)
            x = (x << 1) | genotypes[m][pos];
        v[m] = x;
    }
    return v;
}

// Base-2 entropy of the empirical distribution of `values`, each < 2^bits.
inline double packed_entropy(const std::vector<std::uint32_t> &values, std::size_t bits,
                             std::vector<std::uint32_t> &scratch)
{
    scratch.assign(std::size_t{1} << bits, 0);
    for (auto v : values)
        ++scratch[v];
    const double n = static_cast<double>(values.size());
    double h = 0.0;
    for (auto c : scratch)
        if (c > 0)
        {
            double p = static_cast<double>(c) / n;
            h -= p * std::log2(p);
        }
    return h;
}
} // namespace detail

// Greedy MDL merging starting from the univariate partition. Combined
// complexity C = log2(N + 1) * sum(2^|S| - 1) + N * sum(H(S)). At each step
// the pair with the most negative change in C is merged (lowest index pair
// on ties); merging stops once no pair lowers C. Merged subsets never exceed
// `max_subset_size` variables.
inline MarginalProductModel learn_mpm_from(std::span<const Genotype> selected, std::size_t max_subset_size = 12)
{
    if (selected.empty())
        throw UsageError("learn_mpm: empty selection");
    const std::size_t l = selected.front().size();
    const double n = static_cast<double>(selected.size());
    const double w_model = std::log2(n + 1.0);
    max_subset_size = std::min({max_subset_size, l, std::size_t{24}});

    struct Group
    {
        std::vector<std::size_t> vars;
        std::vector<std::uint32_t> values;
        double entropy = 0.0;
    };
    std::vector<std::uint32_t> scratch;
    std::vector<Group> groups(l);
    for (std::size_t i = 0; i < l; ++i)
    {
        groups[i].vars = {i};
        groups[i].values = detail::subset_values(selected, groups[i].vars);
        groups[i].entropy = detail::packed_entropy(groups[i].values, 1, scratch);
    }

    auto model_cost = [](std::size_t size) { return std::ldexp(1.0, static_cast<int>(size)) - 1.0; };
    auto merged_values = [](const Group &a, const Group &b) {
        std::vector<std::uint32_t> v(a.values.size());
        for (std::size_t m = 0; m < v.size(); ++m)
            v[m] = (a.values[m] << b.vars.size()) | b.values[m];
        return v;
    };
    auto delta = [&](const Group &a, const Group &b) {
        auto v = merged_values(a, b);
        double h = detail::packed_entropy(v, a.vars.size() + b.vars.size(), scratch);
        double d_model = model_cost(a.vars.size() + b.vars.size()) - model_cost(a.vars.size()) -
                         model_cost(b.vars.size());
        double d_pop = h - a.entropy - b.entropy;
        return w_model * d_model + n * d_pop;
    };
    constexpr double no_merge = std::numeric_limits<double>::infinity();

    // Pairwise merge deltas, upper triangle.
    std::vector<std::vector<double>> deltas(l, std::vector<double>(l, no_merge));
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (std::size_t j = i + 1; j < groups.size(); ++j)
            if (groups[i].vars.size() + groups[j].vars.size() <= max_subset_size)
                deltas[i][j] = delta(groups[i], groups[j]);

    for (;;)
    {
        double best = 0.0;
        std::size_t bi = 0, bj = 0;
        bool found = false;
        for (std::size_t i = 0; i < groups.size(); ++i)
            for (std::size_t j = i + 1; j < groups.size(); ++j)
                if (deltas[i][j] < best)
                {
                    best = deltas[i][j];
                    bi = i;
                    bj = j;
                    found = true;
                }
        if (!found)
            break;

        Group merged;
        merged.vars = groups[bi].vars;
        merged.vars.insert(merged.vars.end(), groups[bj].vars.begin(), groups[bj].vars.end());
        merged.values = merged_values(groups[bi], groups[bj]);
        merged.entropy = detail::packed_entropy(merged.values, merged.vars.size(), scratch);
        groups[bi] = std::move(merged);
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bj));
        deltas.erase(deltas.begin() + static_cast<std::ptrdiff_t>(bj));
        for (auto &row : deltas)
            row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));

        for (std::size_t k = 0; k < groups.size(); ++k)
        {
            if (k == bi)
                continue;
            std::size_t a = std::min(k, bi), b = std::max(k, bi);
            deltas[a][b] = groups[a].vars.size() + groups[b].vars.size() <= max_subset_size
                               ? delta(groups[a], groups[b])
                               : no_merge;
        }
    }

    MarginalProductModel model;
    model.sample_size = selected.size();
    model.uses_left = selected.size();
    for (auto &g : groups)
    {
        scratch.assign(std::size_t{1} << g.vars.size(), 0);
        for (auto v : g.values)
            ++scratch[v];
        std::vector<std::pair<std::uint32_t, std::uint32_t>> table;
        for (std::size_t v = 0; v < scratch.size(); ++v)
            if (scratch[v] > 0)
                table.emplace_back(static_cast<std::uint32_t>(v), scratch[v]);
        model.partition.push_back(std::move(g.vars));
        model.tables.push_back(std::move(table));
    }
    return model;
}

// Combined complexity of a partition against a sample, as minimized above.
inline double mpm_combined_complexity(const Partition &partition, std::span<const Genotype> sample)
{
    std::vector<std::uint32_t> scratch;
    const double n = static_cast<double>(sample.size());
    double model = 0.0, pop = 0.0;
    for (const auto &subset : partition)
    {
        model += std::ldexp(1.0, static_cast<int>(subset.size())) - 1.0;
        pop += detail::packed_entropy(detail::subset_values(sample, subset), subset.size(), scratch);
    }
    return std::log2(n + 1.0) * model + n * pop;
}

// Tournament selection (size 4, |P| winners) over the filled members, then
// greedy model learning on the winners.
inline MarginalProductModel learn_mpm(const Population &pop, RandomSource &rng, std::size_t max_subset_size = 12)
{
    if (pop.filled_count() == 0)
        throw UsageError("learn_mpm: empty population");
    std::vector<Individual> candidates;
    candidates.reserve(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i)
        if (pop.is_filled(i))
            candidates.push_back(pop[i]);
    auto selected = tournament_select(candidates, pop.size(), 4, rng);
    std::vector<Genotype> genotypes;
    genotypes.reserve(selected.size());
    for (auto &s : selected)
        genotypes.push_back(std::move(s.genotype));
    return learn_mpm_from(genotypes, max_subset_size);
}

// Draws each subset's bits independently, proportional to the observed
// counts. Consumes one use of the model.
inline Genotype sample_mpm(MarginalProductModel &model, RandomSource &rng)
{
    if (model.uses_left == 0)
        throw std::logic_error("sample_mpm: model has no uses left; learn a new model first");
    std::size_t l = 0;
    for (const auto &subset : model.partition)
        l += subset.size();
    Genotype g(l);
    for (std::size_t s = 0; s < model.partition.size(); ++s)
    {
        const auto &subset = model.partition[s];
        const auto &table = model.tables[s];
        auto r = rng.below(model.sample_size);
        std::uint32_t value = table.back().first;
        for (const auto &[v, count] : table)
        {
            if (r < count)
            {
                value = v;
                break;
            }
            r -= count;
        }
        for (std::size_t k = 0; k < subset.size(); ++k)
            g.set(subset[k], static_cast<std::uint8_t>((value >> (subset.size() - 1 - k)) & 1U));
    }
    --model.uses_left;
    return g;
}

struct EcgaConfig
{
    Scheme scheme = Scheme::asynchronous;
    SelectionScheme selection = SelectionScheme::steady_state;
    std::size_t population_size = 8;
    std::uint64_t seed = 0;
    bool record_models = false;
};

class Ecga : public Algorithm
{
  public:
    Ecga(const ProblemInstance &problem, const EcgaConfig &config) :
        problem_(problem), config_(config), pop_(config.population_size, problem.length()),
        streams_(config.seed, 0x45434741ULL),
        selection_(config.selection, RandomSource(config.seed, 0x45434741ULL).derive(2),
                   config.scheme == Scheme::synchronous)
    {
        if (config.population_size < 4 || config.population_size % 2 != 0)
            throw UsageError("ECGA: population size must be even and at least 4");
    }

    std::size_t population_size() const override
    {
        return config_.population_size;
    }
    const Population &population() const override
    {
        return pop_;
    }
    // Number of models learned so far.
    std::uint64_t refreshes() const
    {
        return refreshes_;
    }
    std::uint64_t samples_drawn() const
    {
        return samples_;
    }
    const MarginalProductModel &model() const
    {
        return model_;
    }
    // Partition of every learned model, in order (when record_models is set).
    const std::vector<Partition> &model_history() const
    {
        return history_;
    }

    Task make_task(TaskContext ctx) override
    {
        if (ctx.info.is_init)
            return initialize_slot(std::move(ctx), pop_, problem_.length());
        return step(std::move(ctx));
    }

    void end_generation(Simulator &) override
    {
        selection_.commit(pop_);
    }

  private:
    Task step(TaskContext ctx)
    {
        if (model_.uses_left == 0)
        {
            RandomSource learn_rng = streams_.derive(1, refreshes_);
            model_ = learn_mpm(pop_, learn_rng);
            model_.uses_left = config_.population_size;
            ++refreshes_;
            if (config_.record_models)
                history_.push_back(model_.partition);
        }
        Individual s{sample_mpm(model_, ctx.rng)};
        ++samples_;
        co_await ctx.evaluate(s);
        selection_.apply(pop_, std::move(s), ctx.info.id, ctx.rng);
    }

    const ProblemInstance &problem_;
    EcgaConfig config_;
    Population pop_;
    RandomSource streams_;
    SurvivalSelection selection_;
    MarginalProductModel model_;
    std::uint64_t refreshes_ = 0;
    std::uint64_t samples_ = 0;
    std::vector<Partition> history_;
};

} // namespace aeasim
