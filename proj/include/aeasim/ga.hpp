#pragma once

// Simple GA: crossover operators, steady-state and pooled generational
// survival selection, and the GA task used by both execution schemes.

#include "core.hpp"
#include "engine.hpp"
#include "problems.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace aeasim
{

enum class Scheme
{
    synchronous,
    asynchronous
};

// ---------------------------------------------------------------------------
// Crossover
// ---------------------------------------------------------------------------

enum class CrossoverKind
{
    uniform,
    two_point,
    subfunction
};

inline void validate_partition(const Partition &partition, std::size_t length)
{
    std::vector<bool> seen(length, false);
    std::size_t covered = 0;
    for (const auto &block : partition)
        for (std::size_t pos : block)
        {
            if (pos >= length || seen[pos])
                throw UsageError("partition must cover every position exactly once");
            seen[pos] = true;
            ++covered;
        }
    if (covered != length)
        throw UsageError("partition must cover every position exactly once");
}

struct CrossoverOp
{
    CrossoverKind kind = CrossoverKind::uniform;
    // Only used by subfunction crossover.
    Partition partition;

    static CrossoverOp uniform()
    {
        return {CrossoverKind::uniform, {}};
    }
    static CrossoverOp two_point()
    {
        return {CrossoverKind::two_point, {}};
    }
    static CrossoverOp subfunction(Partition partition)
    {
        return {CrossoverKind::subfunction, std::move(partition)};
    }
};

// Produces one offspring. UX takes each position from either parent with
// p = 0.5; TPX copies p1's segment between two uniform cut points into p0;
// SFX takes each partition block wholesale from either parent.
inline Genotype crossover(const CrossoverOp &op, const Genotype &p0, const Genotype &p1, RandomSource &rng)
{
    if (p0.size() != p1.size())
        throw UsageError("crossover: parent lengths differ");
    const std::size_t l = p0.size();
    Genotype child = p0;
    switch (op.kind)
    {
    case CrossoverKind::uniform:
        for (std::size_t i = 0; i < l; i += 64)
        {
            std::uint64_t word = rng();
            for (std::size_t j = i; j < std::min(l, i + 64); ++j, word >>= 1)
                if (word & 1U)
                    child.set(j, p1[j]);
        }
        break;
    case CrossoverKind::two_point: {
        auto a = static_cast<std::size_t>(rng.below(l + 1));
        auto b = static_cast<std::size_t>(rng.below(l + 1));
        if (a > b)
            std::swap(a, b);
        for (std::size_t j = a; j < b; ++j)
            child.set(j, p1[j]);
        break;
    }
    case CrossoverKind::subfunction:
        validate_partition(op.partition, l);
        for (const auto &block : op.partition)
            if (rng.coin())
                for (std::size_t pos : block)
                    child.set(pos, p1[pos]);
        break;
    }
    return child;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

// Replaces a uniformly chosen filled slot if it is strictly worse than s.
// Returns the replaced slot, or -1 if s was discarded.
inline long select_steady_state(Population &pop, Individual s, RandomSource &rng)
{
    auto j = static_cast<std::size_t>(rng.below(pop.filled_count()));
    if (pop[j].fitness < s.fitness)
    {
        pop.set(j, std::move(s));
        return static_cast<long>(j);
    }
    return -1;
}

// Shuffle-and-split tournaments: each round shuffles the candidates, splits
// them into consecutive blocks of `tournament_size` (a trailing partial block
// is dropped) and keeps each block's fittest member (first on ties). Rounds
// repeat until `count` winners are collected.
inline std::vector<Individual> tournament_select(const std::vector<Individual> &candidates, std::size_t count,
                                                 std::size_t tournament_size, RandomSource &rng)
{
    if (candidates.empty())
        throw UsageError("tournament_select: no candidates");
    const std::size_t block = std::min(tournament_size, candidates.size());
    std::vector<std::size_t> order(candidates.size());
    std::vector<Individual> winners;
    winners.reserve(count);
    while (winners.size() < count)
    {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        for (std::size_t start = 0; start + block <= order.size() && winners.size() < count; start += block)
        {
            std::size_t best = order[start];
            for (std::size_t k = start + 1; k < start + block; ++k)
                if (candidates[order[k]].fitness > candidates[best].fitness)
                    best = order[k];
            winners.push_back(candidates[best]);
        }
    }
    return winners;
}

// Offspring collected for pooled generational selection. Entries carry an
// ordering key (the producing task's id) so the candidate multiset is laid
// out independently of completion order.
struct OffspringPool
{
    std::vector<std::pair<std::uint64_t, Individual>> entries;

    std::size_t size() const
    {
        return entries.size();
    }
};

// Adds s to the pool; once the pool holds |P| offspring, runs a P+O
// tournament (size 4) over parents and offspring, replaces the population
// with the winners and clears the pool. Returns true when it flushed.
inline bool select_generational_pool(Population &pop, OffspringPool &pool, std::uint64_t order_key, Individual s,
                                     RandomSource &rng)
{
    pool.entries.emplace_back(order_key, std::move(s));
    if (pool.size() < pop.size())
        return false;

    std::stable_sort(pool.entries.begin(), pool.entries.end(),
                     [](const auto &x, const auto &y) { return x.first < y.first; });
    std::vector<Individual> candidates;
    candidates.reserve(pop.size() + pool.size());
    for (std::size_t i = 0; i < pop.size(); ++i)
        if (pop.is_filled(i))
            candidates.push_back(pop[i]);
    for (auto &e : pool.entries)
        candidates.push_back(std::move(e.second));
    pool.entries.clear();

    auto winners = tournament_select(candidates, pop.size(), 4, rng);
    for (std::size_t i = 0; i < winners.size(); ++i)
        pop.set(i, std::move(winners[i]));
    return true;
}

enum class SelectionScheme
{
    steady_state,
    generational
};

// Survival selection shared by the GA and ECGA tasks. With `deferred` set,
// steady-state replacements are buffered and applied in task order by
// commit(), so a synchronous batch does not depend on completion order.
class SurvivalSelection
{
  public:
    SurvivalSelection(SelectionScheme scheme, RandomSource flush_stream, bool deferred = false) :
        scheme_(scheme), flush_stream_(flush_stream), deferred_(deferred)
    {
    }

    void apply(Population &pop, Individual s, std::uint64_t order_key, RandomSource &task_rng)
    {
        if (scheme_ == SelectionScheme::steady_state)
        {
            if (!deferred_)
            {
                select_steady_state(pop, std::move(s), task_rng);
                return;
            }
            auto slot = static_cast<std::size_t>(task_rng.below(pop.filled_count()));
            pending_.push_back({order_key, slot, std::move(s)});
            return;
        }
        RandomSource flush_rng = flush_stream_.derive(flushes_);
        if (select_generational_pool(pop, pool_, order_key, std::move(s), flush_rng))
            ++flushes_;
    }

    // Applies buffered steady-state replacements in task order.
    void commit(Population &pop)
    {
        std::stable_sort(pending_.begin(), pending_.end(),
                         [](const Pending &x, const Pending &y) { return x.key < y.key; });
        for (auto &p : pending_)
            if (pop[p.slot].fitness < p.individual.fitness)
                pop.set(p.slot, std::move(p.individual));
        pending_.clear();
    }

    SelectionScheme scheme() const
    {
        return scheme_;
    }
    std::uint64_t flushes() const
    {
        return flushes_;
    }
    const OffspringPool &pool() const
    {
        return pool_;
    }

  private:
    struct Pending
    {
        std::uint64_t key;
        std::size_t slot;
        Individual individual;
    };

    SelectionScheme scheme_;
    RandomSource flush_stream_;
    bool deferred_;
    OffspringPool pool_;
    std::vector<Pending> pending_;
    std::uint64_t flushes_ = 0;
};

// ---------------------------------------------------------------------------
// Initialization task (shared by all algorithms)
// ---------------------------------------------------------------------------

// Writes a random genotype into its slot, evaluates it, and writes it back
// only if it beats whatever occupies the slot by then (another task may have
// replaced the unevaluated placeholder in the meantime).
inline Task initialize_slot(TaskContext ctx, Population &pop, std::size_t length)
{
    const std::size_t i = ctx.info.slot;
    Individual s{Genotype::random(length, ctx.rng)};
    pop.set(i, s);
    co_await ctx.evaluate(s);
    if (s.fitness > pop[i].fitness)
    {
        if (pop[i].genotype == s.genotype)
            pop.set_fitness(i, s.fitness, s.eval_time);
        else
            pop.set(i, std::move(s));
    }
}

// ---------------------------------------------------------------------------
// GA
// ---------------------------------------------------------------------------

struct GaConfig
{
    Scheme scheme = Scheme::asynchronous;
    SelectionScheme selection = SelectionScheme::steady_state;
    CrossoverKind crossover = CrossoverKind::uniform;
    std::size_t population_size = 8;
    std::uint64_t seed = 0;
};

class GeneticAlgorithm : public Algorithm
{
  public:
    GeneticAlgorithm(const ProblemInstance &problem, const GaConfig &config) :
        problem_(problem), config_(config), pop_(config.population_size, problem.length()),
        selection_(config.selection, RandomSource(config.seed, 0x4741ULL).derive(2),
                   config.scheme == Scheme::synchronous)
    {
        if (config.population_size < 2)
            throw UsageError("GA: population size must be at least 2");
        if (config.selection == SelectionScheme::generational && config.population_size % 2 != 0)
            throw UsageError("GA: generational P+O selection requires an even population size");
        op_.kind = config.crossover;
        if (config.crossover == CrossoverKind::subfunction)
        {
            op_.partition = problem.subfunction_partition();
            validate_partition(op_.partition, problem.length());
        }
    }

    std::size_t population_size() const override
    {
        return config_.population_size;
    }
    const Population &population() const override
    {
        return pop_;
    }
    Population &population_mut()
    {
        return pop_;
    }
    const SurvivalSelection &selection() const
    {
        return selection_;
    }

    Task make_task(TaskContext ctx) override
    {
        if (ctx.info.is_init)
            return initialize_slot(std::move(ctx), pop_, problem_.length());
        return step(std::move(ctx));
    }

    // Synchronous batches draw all parents from the population as it was at
    // generation start.
    void begin_generation(Simulator &) override
    {
        parents_ = pop_;
    }
    void end_generation(Simulator &) override
    {
        selection_.commit(pop_);
    }

  private:
    Task step(TaskContext ctx)
    {
        const Population &source = config_.scheme == Scheme::synchronous ? parents_ : pop_;
        const std::uint64_t n = source.filled_count();
        const Genotype &p0 = source[ctx.rng.below(n)].genotype;
        const Genotype &p1 = source[ctx.rng.below(n)].genotype;
        Individual s{crossover(op_, p0, p1, ctx.rng)};
        co_await ctx.evaluate(s);
        selection_.apply(pop_, std::move(s), ctx.info.id, ctx.rng);
    }

    const ProblemInstance &problem_;
    GaConfig config_;
    CrossoverOp op_;
    Population pop_;
    Population parents_;
    SurvivalSelection selection_;
};

} // namespace aeasim
