#pragma once

// Population-size searches over an integer lattice: doubling followed by
// bisection for the minimal successful size, and doubling followed by a
// modified golden-section search for the size with minimal simulated time.

#include "core.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace aeasim
{

struct ProbeOutcome
{
    bool success = false;
    double simulated_time = 0.0;
    std::uint64_t evaluations = 0;
};

struct ProbeRecord
{
    std::size_t population_size = 0;
    ProbeOutcome outcome;
};

using Probe = std::function<ProbeOutcome(std::size_t)>;

struct SearchBudget
{
    // Evaluations summed over every probe of one search.
    std::uint64_t max_total_evaluations = std::numeric_limits<std::uint64_t>::max();
    // Real-time safety valve.
    double wall_seconds = std::numeric_limits<double>::infinity();
};

namespace detail
{
class BudgetTracker
{
  public:
    explicit BudgetTracker(const SearchBudget &budget) :
        budget_(budget), start_(std::chrono::steady_clock::now())
    {
    }
    bool exhausted() const
    {
        if (spent_ >= budget_.max_total_evaluations)
            return true;
        std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
        return elapsed.count() > budget_.wall_seconds;
    }
    void charge(std::uint64_t evaluations)
    {
        spent_ += evaluations;
    }

  private:
    SearchBudget budget_;
    std::chrono::steady_clock::time_point start_;
    std::uint64_t spent_ = 0;
};
} // namespace detail

// ---------------------------------------------------------------------------
// Bisection
// ---------------------------------------------------------------------------

struct BisectionOptions
{
    std::size_t base = 8;
    std::size_t max_pop = 4096;
    // Probes are multiples of `step`.
    std::size_t step = 2;
    SearchBudget budget;
};

struct BisectionResult
{
    // Empty when no probed size succeeded (FAILED).
    std::optional<std::size_t> minimal;
    std::vector<ProbeRecord> trace;
    // The budget ran out before the search completed.
    bool truncated = false;

    bool failed() const
    {
        return !minimal.has_value();
    }
    std::size_t max_probed() const
    {
        std::size_t m = 0;
        for (const auto &r : trace)
            m = std::max(m, r.population_size);
        return m;
    }
    const ProbeRecord *record_for(std::size_t population_size) const
    {
        for (const auto &r : trace)
            if (r.population_size == population_size)
                return &r;
        return nullptr;
    }
};

// Doubles from `base` until a probe succeeds, then bisects between the
// largest failure and the smallest success. If the budget runs out, the
// smallest success found so far is reported.
inline BisectionResult bisect_min_popsize(const Probe &probe, const BisectionOptions &options)
{
    if (options.step == 0 || options.base == 0 || options.base % options.step != 0)
        throw UsageError("bisection: base must be a positive multiple of step");
    BisectionResult result;
    detail::BudgetTracker budget(options.budget);

    auto run = [&](std::size_t p) {
        ProbeOutcome o = probe(p);
        budget.charge(o.evaluations);
        result.trace.push_back({p, o});
        return o.success;
    };

    std::optional<std::size_t> last_failure;
    std::size_t p = options.base;
    for (; p <= options.max_pop; p *= 2)
    {
        if (budget.exhausted())
        {
            result.truncated = true;
            return result;
        }
        if (run(p))
        {
            result.minimal = p;
            break;
        }
        last_failure = p;
    }
    if (!result.minimal || !last_failure)
        return result;

    std::size_t lo = *last_failure, hi = *result.minimal;
    const std::size_t step = options.step;
    while (hi - lo > step)
    {
        if (budget.exhausted())
        {
            result.truncated = true;
            break;
        }
        std::size_t mid = lo + step * ((hi - lo) / (2 * step));
        if (run(mid))
            hi = mid;
        else
            lo = mid;
    }
    result.minimal = hi;
    return result;
}

// ---------------------------------------------------------------------------
// Golden-section
// ---------------------------------------------------------------------------

struct GoldenOptions
{
    std::size_t base = 8;
    // Smallest size that may be probed.
    std::size_t min_pop = 4;
    std::size_t max_pop = 4096;
    std::size_t step = 2;
    SearchBudget budget;
};

struct GoldenResult
{
    std::optional<std::size_t> best_population;
    double best_time = std::numeric_limits<double>::infinity();
    std::vector<ProbeRecord> trace;
    bool truncated = false;

    bool failed() const
    {
        return !best_population.has_value();
    }
};

// Finds a solving P1 by doubling, keeps doubling while t(2 P1) <= t(P1), and
// then refines the bracketing triplet (P0, P1, P2): P3 is placed at 1/3 or 2/3
// of [P0, P2] inside the longer of the two segments (rounded to the nearest
// unevaluated lattice point), and the triplet shrinks around whichever of P1
// and P3 is faster. Unsolved sizes count as infinitely slow. Stops once every
// lattice point strictly inside (P0, P2) has been evaluated, and returns the
// fastest probed size (smallest size on ties).
inline GoldenResult golden_min_time(const Probe &probe, const GoldenOptions &options)
{
    if (options.step == 0 || options.base == 0 || options.base % options.step != 0)
        throw UsageError("golden-section: base must be a positive multiple of step");
    constexpr double inf = std::numeric_limits<double>::infinity();
    GoldenResult result;
    detail::BudgetTracker budget(options.budget);
    std::map<std::size_t, double> times;

    auto probe_able = [&](std::size_t p) {
        return p >= options.min_pop && p <= options.max_pop && p % options.step == 0;
    };
    auto evaluated = [&](std::size_t p) { return !probe_able(p) || times.contains(p); };
    // Throws nothing; returns inf for sizes outside the lattice.
    auto time_of = [&](std::size_t p) -> double {
        if (!probe_able(p))
            return inf;
        if (auto it = times.find(p); it != times.end())
            return it->second;
        if (budget.exhausted())
        {
            result.truncated = true;
            return inf;
        }
        ProbeOutcome o = probe(p);
        budget.charge(o.evaluations);
        result.trace.push_back({p, o});
        double t = o.success ? o.simulated_time : inf;
        times[p] = t;
        return t;
    };

    std::size_t p1 = options.base;
    while (p1 <= options.max_pop && std::isinf(time_of(p1)) && !result.truncated)
        p1 *= 2;
    if (p1 > options.max_pop || result.truncated)
        return result;

    // Below the base size nothing has been probed yet, so the bracket opens
    // just under the lattice floor; otherwise P1 / 2 is a probed failure.
    std::size_t p0 = p1 / 2, p2 = 2 * p1;
    if (p1 == options.base)
        p0 = options.min_pop >= options.step ? std::min(p0, options.min_pop - options.step) : 0;
    while (!result.truncated && time_of(p2) <= time_of(p1))
    {
        p0 = p1;
        p1 = p2;
        p2 *= 2;
    }

    auto nearest_unevaluated = [&](double target, std::size_t lo, std::size_t hi) -> std::optional<std::size_t> {
        // Lattice points strictly inside (lo, hi), nearest to target, smaller on ties.
        std::optional<std::size_t> best;
        double best_dist = inf;
        std::size_t first = (lo / options.step + 1) * options.step;
        for (std::size_t p = first; p < hi; p += options.step)
        {
            if (evaluated(p))
                continue;
            double d = std::abs(static_cast<double>(p) - target);
            if (d < best_dist)
            {
                best_dist = d;
                best = p;
            }
        }
        return best;
    };

    while (!result.truncated)
    {
        const double span = static_cast<double>(p2 - p0);
        const bool left_longer = (p1 - p0) >= (p2 - p1);
        std::optional<std::size_t> p3;
        if (left_longer)
        {
            p3 = nearest_unevaluated(static_cast<double>(p0) + span / 3.0, p0, p1);
            if (!p3)
                p3 = nearest_unevaluated(static_cast<double>(p0) + 2.0 * span / 3.0, p1, p2);
        }
        else
        {
            p3 = nearest_unevaluated(static_cast<double>(p0) + 2.0 * span / 3.0, p1, p2);
            if (!p3)
                p3 = nearest_unevaluated(static_cast<double>(p0) + span / 3.0, p0, p1);
        }
        if (!p3)
            break;
        const double t1 = time_of(p1);
        const double t3 = time_of(*p3);
        if (result.truncated)
            break;
        if (*p3 > p1)
        {
            if (t3 > t1)
                p2 = *p3;
            else
            {
                p0 = p1;
                p1 = *p3;
            }
        }
        else
        {
            if (t3 > t1)
                p0 = *p3;
            else
            {
                p2 = p1;
                p1 = *p3;
            }
        }
    }

    for (const auto &[p, t] : times)
        if (t < result.best_time)
        {
            result.best_time = t;
            result.best_population = p;
        }
    return result;
}

} // namespace aeasim
