#include "aeasim/stats.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace aeasim;

namespace
{
double u_statistic(const std::vector<double> &a, const std::vector<double> &b)
{
    double u = 0.0;
    for (double x : a)
        for (double y : b)
            u += x > y ? 1.0 : x == y ? 0.5 : 0.0;
    return u;
}

// Exact two-sided p by enumerating every split of the pooled sample.
double permutation_p(const std::vector<double> &a, const std::vector<double> &b)
{
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size(), na = a.size();
    const double u0 = u_statistic(a, b);
    double le = 0, ge = 0, total = 0;
    for (unsigned mask = 0; mask < (1U << n); ++mask)
    {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != na)
            continue;
        std::vector<double> x, y;
        for (std::size_t i = 0; i < n; ++i)
            ((mask >> i) & 1U ? x : y).push_back(pooled[i]);
        double u = u_statistic(x, y);
        total += 1;
        le += u <= u0 + 1e-9;
        ge += u >= u0 - 1e-9;
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / total);
}
} // namespace

TEST_CASE("Mann-Whitney U statistic counts pairwise wins")
{
    RandomSource rng(31);
    for (int trial = 0; trial < 100; ++trial)
    {
        std::vector<double> a(1 + rng.below(10)), b(1 + rng.below(10));
        for (auto &v : a)
            v = static_cast<double>(rng.below(6));
        for (auto &v : b)
            v = static_cast<double>(rng.below(6));
        CHECK(mann_whitney_u(a, b).u == Catch::Approx(u_statistic(a, b)));
    }
}

TEST_CASE("exact Mann-Whitney p matches permutation enumeration")
{
    RandomSource rng(32);
    for (int trial = 0; trial < 60; ++trial)
    {
        std::size_t na = 1 + rng.below(6), nb = 1 + rng.below(6);
        std::vector<double> values(na + nb);
        for (std::size_t i = 0; i < values.size(); ++i)
            values[i] = static_cast<double>(i);
        rng.shuffle(values);
        std::vector<double> a(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(na));
        std::vector<double> b(values.begin() + static_cast<std::ptrdiff_t>(na), values.end());
        auto r = mann_whitney_u(a, b);
        CHECK(r.exact);
        CHECK(r.p == Catch::Approx(permutation_p(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("Mann-Whitney examples")
{
    std::vector<double> x{1, 2, 3}, y{4, 5, 6};
    auto same = mann_whitney_u(x, x);
    CHECK(same.u == 4.5);
    CHECK(same.p == Catch::Approx(1.0));

    auto separated = mann_whitney_u(x, y);
    CHECK(separated.u == 0.0);
    CHECK(separated.p == Catch::Approx(0.1));
    CHECK(mann_whitney_u(x, y, Alternative::less).p == Catch::Approx(0.05));
    CHECK(mann_whitney_u(x, y, Alternative::greater).p == Catch::Approx(1.0));

    // Ranks 1..40; sample a has rank sum 434, so U = 434 - 210 = 224.
    std::vector<double> a, b;
    for (int r = 1; r <= 40; ++r)
        ((r <= 8 || r == 13 || r >= 30) ? a : b).push_back(r);
    REQUIRE(a.size() == 20);
    auto large = mann_whitney_u(a, b);
    CHECK(large.u == 224.0);
    CHECK_FALSE(large.exact);
    const double sd = std::sqrt(20.0 * 20.0 * 41.0 / 12.0);
    CHECK(large.p == Catch::Approx(std::erfc((24.0 - 0.5) / sd / std::sqrt(2.0))).epsilon(1e-12));
    CHECK(large.p == Catch::Approx(0.52).margin(0.01));

    CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{}, x), UsageError);
}

TEST_CASE("Mann-Whitney null counts are symmetric and sum to the binomial")
{
    for (std::size_t m = 1; m <= 8; ++m)
        for (std::size_t n = 1; n <= 8; ++n)
        {
            auto c = mann_whitney_null_counts(m, n);
            long double total = 0;
            for (std::size_t i = 0; i < c.size(); ++i)
            {
                total += c[i];
                CHECK(c[i] == c[c.size() - 1 - i]);
            }
            double binom = std::round(std::tgamma(static_cast<double>(m + n + 1)) /
                                      (std::tgamma(static_cast<double>(m + 1)) * std::tgamma(static_cast<double>(n + 1))));
            CHECK(static_cast<double>(total) == binom);
        }
}

TEST_CASE("Holm-Bonferroni step-down")
{
    std::vector<double> p{0.01, 0.04, 0.03, 0.005};
    CHECK(holm_bonferroni(p, 0.05) == std::vector<bool>{true, false, false, true});
    std::vector<double> all{0.01, 0.01, 0.01};
    CHECK(holm_bonferroni(all, 0.05) == std::vector<bool>{true, true, true});
    std::vector<double> none{0.2, 0.001};
    CHECK(holm_bonferroni(none, 0.05) == std::vector<bool>{false, true});
    // Step-down stops at the first acceptance even if a later bound is loose.
    std::vector<double> stop{0.03, 0.04};
    CHECK(holm_bonferroni(stop, 0.05) == std::vector<bool>{false, false});
    std::vector<double> bad{0.5, 1.5};
    CHECK_THROWS_AS(holm_bonferroni(bad, 0.05), UsageError);
    CHECK(holm_bonferroni(std::vector<double>{}, 0.05).empty());
}

TEST_CASE("quantiles interpolate between order statistics")
{
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK(median({5, 1, 3}) == 3.0);
    CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
    CHECK(quantile({1, 2, 3, 4, 5}, 0.75) == 4.0);
    CHECK(quantile({10, 20}, 0.25) == 12.5);
    CHECK(quantile({7}, 0.9) == 7.0);
    CHECK_THROWS_AS(quantile({}, 0.5), UsageError);
}

TEST_CASE("midranks average tied positions")
{
    std::vector<double> v{3, 1, 3, 2};
    CHECK(midranks(v) == std::vector<double>{3.5, 1, 3.5, 2});
}
