#pragma once

// GOMEA: linkage tree learned by UPGMA over normalized mutual information,
// gene-pool optimal mixing (GOM), forced improvements (FI), and the three
// parallel variants (synchronous, asynchronous-end, asynchronous-intermediate).

#include "core.hpp"
#include "engine.hpp"
#include "ga.hpp"
#include "problems.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

namespace aeasim
{

// Dense symmetric matrix, row-major.
struct SquareMatrix
{
    std::size_t n = 0;
    std::vector<double> data;

    explicit SquareMatrix(std::size_t size = 0, double fill = 0.0) : n(size), data(size * size, fill)
    {
    }
    double &operator()(std::size_t i, std::size_t j)
    {
        return data[i * n + j];
    }
    double operator()(std::size_t i, std::size_t j) const
    {
        return data[i * n + j];
    }
};

// NMI(i, j) = 2 I(X_i; X_j) / (H(X_i) + H(X_j)) over the filled members, base-2
// entropies. Two constant columns have NMI 1; the diagonal is 1.
inline SquareMatrix nmi_matrix(const Population &pop)
{
    const std::size_t l = pop.length();
    std::vector<std::size_t> members;
    for (std::size_t m = 0; m < pop.size(); ++m)
        if (pop.is_filled(m))
            members.push_back(m);
    if (members.size() < 2)
        throw UsageError("nmi_matrix: need at least two members");
    const double n = static_cast<double>(members.size());

    auto plogp = [n](double count) {
        if (count <= 0.0)
            return 0.0;
        double p = count / n;
        return -p * std::log2(p);
    };

    std::vector<double> ones(l, 0.0);
    for (auto m : members)
        for (std::size_t i = 0; i < l; ++i)
            ones[i] += pop[m].genotype[i];
    std::vector<double> h(l);
    for (std::size_t i = 0; i < l; ++i)
        h[i] = plogp(ones[i]) + plogp(n - ones[i]);

    SquareMatrix nmi(l, 1.0);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = i + 1; j < l; ++j)
        {
            double c11 = 0.0;
            for (auto m : members)
                c11 += pop[m].genotype[i] & pop[m].genotype[j];
            double c10 = ones[i] - c11;
            double c01 = ones[j] - c11;
            double c00 = n - c11 - c10 - c01;
            double h_joint = plogp(c00) + plogp(c01) + plogp(c10) + plogp(c11);
            double denom = h[i] + h[j];
            double value = 1.0;
            if (denom > 0.0)
            {
                double mi = h[i] + h[j] - h_joint;
                value = std::clamp(2.0 * mi / denom, 0.0, 1.0);
            }
            nmi(i, j) = value;
            nmi(j, i) = value;
        }
    return nmi;
}

struct FamilyOfSubsets
{
    std::vector<std::vector<std::size_t>> subsets;

    std::size_t size() const
    {
        return subsets.size();
    }
    const std::vector<std::size_t> &operator[](std::size_t i) const
    {
        return subsets[i];
    }
};

// UPGMA over a similarity matrix. Emits the singletons followed by every
// merged cluster except the root, in merge order. Ties go to the smallest
// (i, j) pair of positions in the active cluster list; a merged cluster takes
// the position of its first constituent.
inline FamilyOfSubsets upgma_linkage_tree(const SquareMatrix &similarity)
{
    const std::size_t l = similarity.n;
    FamilyOfSubsets fos;
    for (std::size_t i = 0; i < l; ++i)
        fos.subsets.push_back({i});
    if (l < 2)
        return fos;

    std::vector<std::vector<std::size_t>> active = fos.subsets;
    std::vector<std::vector<double>> sim(l, std::vector<double>(l, 0.0));
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j)
            sim[i][j] = similarity(i, j);

    while (active.size() > 2)
    {
        std::size_t bi = 0, bj = 1;
        double best = sim[0][1];
        for (std::size_t i = 0; i < active.size(); ++i)
            for (std::size_t j = i + 1; j < active.size(); ++j)
                if (sim[i][j] > best)
                {
                    best = sim[i][j];
                    bi = i;
                    bj = j;
                }

        const double wi = static_cast<double>(active[bi].size());
        const double wj = static_cast<double>(active[bj].size());
        for (std::size_t k = 0; k < active.size(); ++k)
        {
            if (k == bi || k == bj)
                continue;
            double v = (wi * sim[bi][k] + wj * sim[bj][k]) / (wi + wj);
            sim[bi][k] = v;
            sim[k][bi] = v;
        }
        active[bi].insert(active[bi].end(), active[bj].begin(), active[bj].end());
        fos.subsets.push_back(active[bi]);

        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        sim.erase(sim.begin() + static_cast<std::ptrdiff_t>(bj));
        for (auto &row : sim)
            row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    // The last merge would produce the root, which is not part of the FOS.
    return fos;
}

inline FamilyOfSubsets learn_linkage_tree(const Population &pop)
{
    return upgma_linkage_tree(nmi_matrix(pop));
}

// 1 + floor(log2 |P|).
inline std::size_t stretch_threshold(std::size_t population_size)
{
    std::size_t t = 1;
    while (population_size > 1)
    {
        population_size >>= 1;
        ++t;
    }
    return t;
}

struct GomOptions
{
    // Charge an evaluation even when a step leaves the genotype unchanged.
    bool charge_noop_evals = false;
};

struct GomOutcome
{
    // Some accepted step altered the genotype.
    bool changed = false;
    // Final fitness strictly above the starting fitness.
    bool improved = false;
    std::uint64_t evaluations = 0;
};

namespace detail
{
inline std::vector<std::size_t> shuffled_order(std::size_t n, RandomSource &rng)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    return order;
}

inline bool copy_positions(Genotype &target, const Genotype &source, const std::vector<std::size_t> &positions)
{
    bool differs = false;
    for (std::size_t pos : positions)
        if (target[pos] != source[pos])
        {
            target.set(pos, source[pos]);
            differs = true;
        }
    return differs;
}
} // namespace detail

// Gene-pool optimal mixing of `s` (evaluated). FOS elements are visited in
// random order; each copies a random donor's bits for that element and keeps
// the change iff the fitness did not decrease. When `write_through` is set,
// every accepted change is written to write_through[idx] immediately.
inline Task gom(TaskContext &ctx, Individual &s, std::size_t idx, const FamilyOfSubsets &fos,
                const Population &donors, Population *write_through, GomOptions options, GomOutcome &out)
{
    const double initial = s.fitness;
    const auto n_donors = donors.filled_count();
    for (std::size_t k : detail::shuffled_order(fos.size(), ctx.rng))
    {
        const Genotype &donor = donors[ctx.rng.below(n_donors)].genotype;
        Individual trial = s;
        bool differs = detail::copy_positions(trial.genotype, donor, fos[k]);
        if (!differs && !options.charge_noop_evals)
            continue;
        co_await ctx.evaluate(trial);
        ++out.evaluations;
        if (trial.fitness >= s.fitness)
        {
            s = std::move(trial);
            if (differs)
            {
                out.changed = true;
                if (write_through)
                    write_through->set(idx, s);
            }
        }
    }
    out.improved = s.fitness > initial;
}

// GOM with the elitist as the only donor, accepting only strict improvement
// over the starting fitness and stopping at the first one. Without an
// improvement, s becomes a copy of the elitist. A solution already fitter
// than the given elitist is left alone.
inline Task forced_improvement(TaskContext &ctx, Individual &s, std::size_t idx, const FamilyOfSubsets &fos,
                               const Individual &elitist, Population *write_through, GomOptions options,
                               GomOutcome &out)
{
    const double initial = s.fitness;
    if (initial > elitist.fitness)
        co_return;
    for (std::size_t k : detail::shuffled_order(fos.size(), ctx.rng))
    {
        Individual trial = s;
        bool differs = detail::copy_positions(trial.genotype, elitist.genotype, fos[k]);
        if (!differs && !options.charge_noop_evals)
            continue;
        co_await ctx.evaluate(trial);
        ++out.evaluations;
        if (trial.fitness > initial)
        {
            s = std::move(trial);
            out.changed = true;
            out.improved = true;
            if (write_through)
                write_through->set(idx, s);
            co_return;
        }
    }
    if (s.genotype != elitist.genotype)
        out.changed = true;
    s = elitist;
    out.improved = s.fitness > initial;
}

enum class GomeaVariant
{
    synchronous,
    async_end,
    async_intermediate
};

struct GomeaConfig
{
    GomeaVariant variant = GomeaVariant::synchronous;
    std::size_t population_size = 8;
    std::uint64_t seed = 0;
    GomOptions gom;
    bool record_models = false;
};

class Gomea : public Algorithm
{
  public:
    Gomea(const ProblemInstance &problem, const GomeaConfig &config) :
        problem_(problem), config_(config), pop_(config.population_size, problem.length()),
        stretch_(config.population_size, 0), threshold_(stretch_threshold(config.population_size))
    {
        if (config.population_size < 2)
            throw UsageError("GOMEA: population size must be at least 2");
    }

    std::size_t population_size() const override
    {
        return config_.population_size;
    }
    const Population &population() const override
    {
        return pop_;
    }
    std::uint64_t learns() const
    {
        return learns_;
    }
    std::size_t threshold() const
    {
        return threshold_;
    }
    const std::vector<FamilyOfSubsets> &model_history() const
    {
        return history_;
    }

    // Observers for property checks: called after every GOM application
    // with (fitness before, fitness after GOM, fitness after FI).
    using GomObserver = std::function<void(double, double, double)>;
    void set_gom_observer(GomObserver fn)
    {
        observer_ = std::move(fn);
    }

    Task make_task(TaskContext ctx) override
    {
        if (ctx.info.is_init)
            return initialize_slot(std::move(ctx), pop_, problem_.length());
        return step(std::move(ctx));
    }

    // Offspring start as copies of the population; donors are drawn from the
    // unchanged population and FI uses the elitist as of generation start.
    void begin_generation(Simulator &sim) override
    {
        offspring_.assign(pop_.members().begin(), pop_.members().end());
        if (const Individual *best = sim.best())
            generation_elitist_ = *best;
    }

    void end_generation(Simulator &) override
    {
        for (std::size_t i = 0; i < offspring_.size(); ++i)
            pop_.set(i, std::move(offspring_[i]));
        offspring_.clear();
    }

  private:
    bool synchronous() const
    {
        return config_.variant == GomeaVariant::synchronous;
    }

    Task step(TaskContext ctx)
    {
        const std::size_t idx = ctx.info.slot;
        if (uses_left_ == 0)
        {
            fos_ = std::make_shared<const FamilyOfSubsets>(learn_linkage_tree(pop_));
            uses_left_ = config_.population_size;
            ++learns_;
            if (config_.record_models)
                history_.push_back(*fos_);
        }
        --uses_left_;
        std::shared_ptr<const FamilyOfSubsets> fos = fos_;

        std::unique_ptr<Population> snapshot;
        const Population *donors = &pop_;
        if (!synchronous())
        {
            snapshot = std::make_unique<Population>(pop_);
            donors = snapshot.get();
        }
        Population *write_through = config_.variant == GomeaVariant::async_intermediate ? &pop_ : nullptr;

        Individual s = synchronous() ? offspring_[idx] : pop_[idx];
        const double before = s.fitness;

        GomOutcome outcome;
        co_await gom(ctx, s, idx, *fos, *donors, write_through, config_.gom, outcome);
        const double after_gom = s.fitness;
        stretch_[idx] = outcome.improved ? 0 : stretch_[idx] + 1;

        if (!outcome.changed || stretch_[idx] >= threshold_)
        {
            Individual elitist = synchronous() ? generation_elitist_ : *ctx.sim->best();
            GomOutcome fi;
            co_await forced_improvement(ctx, s, idx, *fos, elitist, write_through, config_.gom, fi);
            if (s.fitness > before)
                stretch_[idx] = 0;
        }
        if (observer_)
            observer_(before, after_gom, s.fitness);

        if (synchronous())
            offspring_[idx] = std::move(s);
        else
            pop_.set(idx, std::move(s));
    }

    const ProblemInstance &problem_;
    GomeaConfig config_;
    Population pop_;
    std::vector<Individual> offspring_;
    Individual generation_elitist_;
    std::vector<std::size_t> stretch_;
    std::size_t threshold_;
    std::shared_ptr<const FamilyOfSubsets> fos_;
    std::size_t uses_left_ = 0;
    std::uint64_t learns_ = 0;
    std::vector<FamilyOfSubsets> history_;
    GomObserver observer_;
};

} // namespace aeasim
