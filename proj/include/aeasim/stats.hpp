#pragma once

// Rank statistics for comparing per-seed outcomes: Mann-Whitney U with an
// exact null distribution for small tie-free samples, Holm-Bonferroni step-down
// correction, and interpolated quantiles.

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace aeasim
{

enum class Alternative
{
    two_sided,
    // Sample a tends to be smaller than sample b.
    less,
    // Sample a tends to be larger than sample b.
    greater
};

struct MannWhitneyResult
{
    // U of sample a: number of (a, b) pairs with a > b, ties counting 1/2.
    double u = 0.0;
    double p = 1.0;
    bool exact = false;
};

// Midranks (1-based) of the pooled values.
inline std::vector<double> midranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();)
    {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]])
            ++j;
        double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Number of arrangements giving each U = 0..m*n under the null hypothesis:
// the coefficients of the Gaussian binomial [m+n choose m]_q.
inline std::vector<long double> mann_whitney_null_counts(std::size_t m, std::size_t n)
{
    if (m > n)
        std::swap(m, n);
    const std::size_t degree = m * n;
    std::vector<long double> c(degree + 1, 0.0L);
    c[0] = 1.0L;
    for (std::size_t i = 1; i <= m; ++i)
    {
        // Multiply by (1 - q^(n+i)), then divide by (1 - q^i).
        const std::size_t up = n + i;
        for (std::size_t d = degree; d >= up; --d)
            c[d] -= c[d - up];
        for (std::size_t d = i; d <= degree; ++d)
            c[d] += c[d - i];
    }
    for (auto &v : c)
        v = std::round(v);
    return c;
}

inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                        Alternative alternative = Alternative::two_sided)
{
    if (a.empty() || b.empty())
        throw UsageError("mann_whitney_u: both samples must be nonempty");
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    auto ranks = midranks(pooled);

    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < na; ++i)
        rank_sum_a += ranks[i];
    MannWhitneyResult result;
    result.u = rank_sum_a - static_cast<double>(na) * static_cast<double>(na + 1) / 2.0;

    // Tie groups.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    bool ties = false;
    for (std::size_t i = 0; i < n;)
    {
        std::size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i])
            ++j;
        double t = static_cast<double>(j - i + 1);
        if (t > 1.0)
        {
            ties = true;
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }

    if (!ties && std::min(na, nb) <= 8)
    {
        auto counts = mann_whitney_null_counts(na, nb);
        long double total = 0.0L, below = 0.0L, above = 0.0L;
        auto u = static_cast<std::size_t>(std::llround(result.u));
        for (std::size_t v = 0; v < counts.size(); ++v)
        {
            total += counts[v];
            if (v <= u)
                below += counts[v];
            if (v >= u)
                above += counts[v];
        }
        double p_le = static_cast<double>(below / total);
        double p_ge = static_cast<double>(above / total);
        result.exact = true;
        switch (alternative)
        {
        case Alternative::less:
            result.p = p_le;
            break;
        case Alternative::greater:
            result.p = p_ge;
            break;
        case Alternative::two_sided:
            result.p = std::min(1.0, 2.0 * std::min(p_le, p_ge));
            break;
        }
        return result;
    }

    const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(n);
    const double mean = dna * dnb / 2.0;
    const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (!(var > 0.0))
    {
        result.p = 1.0;
        return result;
    }
    const double sd = std::sqrt(var);
    const double diff = result.u - mean;
    switch (alternative)
    {
    case Alternative::two_sided: {
        double z = std::max(0.0, std::abs(diff) - 0.5) / sd;
        result.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        break;
    }
    case Alternative::greater: {
        double z = (diff - 0.5) / sd;
        result.p = 0.5 * std::erfc(z / std::sqrt(2.0));
        break;
    }
    case Alternative::less: {
        double z = (diff + 0.5) / sd;
        result.p = 0.5 * std::erfc(-z / std::sqrt(2.0));
        break;
    }
    }
    return result;
}

// Holm-Bonferroni step-down: sorted ascending, p_(i) is rejected while
// p_(i) <= alpha / (m - i + 1). Decisions are returned in input order.
inline std::vector<bool> holm_bonferroni(std::span<const double> pvalues, double alpha)
{
    const std::size_t m = pvalues.size();
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0))
            throw UsageError("holm_bonferroni: p-values must lie in [0,1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pvalues[x] < pvalues[y]; });
    std::vector<bool> reject(m, false);
    for (std::size_t rank = 0; rank < m; ++rank)
    {
        if (pvalues[order[rank]] > alpha / static_cast<double>(m - rank))
            break;
        reject[order[rank]] = true;
    }
    return reject;
}

// Linear interpolation between order statistics; the median of an even
// count is the midpoint of the two central values.
inline double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw UsageError("quantile: empty sample");
    std::sort(values.begin(), values.end());
    double h = (static_cast<double>(values.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values)
{
    return quantile(std::move(values), 0.5);
}

} // namespace aeasim
