#include "aeasim/algorithms.hpp"
#include "aeasim/gomea.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

using namespace aeasim;

namespace
{
double entropy_of(const std::map<std::string, double> &counts, double n)
{
    double h = 0.0;
    for (const auto &[key, c] : counts)
        h -= (c / n) * std::log2(c / n);
    return h;
}

double oracle_nmi(const Population &pop, std::size_t i, std::size_t j)
{
    std::map<std::string, double> ci, cj, cij;
    const double n = static_cast<double>(pop.size());
    for (const auto &m : pop.members())
    {
        std::string a(1, static_cast<char>('0' + m.genotype[i]));
        std::string b(1, static_cast<char>('0' + m.genotype[j]));
        ci[a] += 1;
        cj[b] += 1;
        cij[a + b] += 1;
    }
    double hi = entropy_of(ci, n), hj = entropy_of(cj, n), hij = entropy_of(cij, n);
    if (hi + hj == 0.0)
        return 1.0;
    return 2.0 * (hi + hj - hij) / (hi + hj);
}

Population random_population(std::size_t n, std::size_t l, RandomSource &rng)
{
    std::vector<Individual> m;
    for (std::size_t i = 0; i < n; ++i)
        m.push_back(Individual{Genotype::random(l, rng)});
    return Population(std::move(m));
}

struct GomHarness
{
    ProblemInstance problem;
    Simulator sim;
    explicit GomHarness(ProblemInstance p) : problem(std::move(p)), sim(problem, 1, 0)
    {
    }
};

Task evaluate_then_gom(TaskContext ctx, Individual *s, const FamilyOfSubsets *fos, const Population *donors,
                       GomOutcome *out)
{
    co_await ctx.evaluate(*s);
    co_await gom(ctx, *s, 0, *fos, *donors, nullptr, GomOptions{}, *out);
}

Task evaluate_then_fi(TaskContext ctx, Individual *s, const FamilyOfSubsets *fos, Individual *elitist,
                      GomOutcome *out)
{
    co_await ctx.evaluate(*s);
    co_await ctx.evaluate(*elitist);
    co_await forced_improvement(ctx, *s, 0, *fos, *elitist, nullptr, GomOptions{}, *out);
}

template <class Coroutine, class... Args>
void run_single(Simulator &sim, Coroutine coroutine, Args... args)
{
    auto ctx = sim.new_context(0, false, 0);
    auto info = ctx.info;
    sim.enqueue(coroutine(std::move(ctx), args...), info);
    sim.run([] { return StopReason::none; });
}
} // namespace

TEST_CASE("NMI matches a brute-force entropy oracle")
{
    RandomSource rng(21);
    for (int trial = 0; trial < 60; ++trial)
    {
        std::size_t n = 2 + rng.below(31), l = 2 + rng.below(7);
        Population pop = random_population(n, l, rng);
        // Add some structure: copy or complement columns.
        if (trial % 3 == 0)
            for (std::size_t m = 0; m < n; ++m)
            {
                Individual ind = pop[m];
                ind.genotype.set(1, ind.genotype[0] ^ 1U);
                pop.set(m, ind);
            }
        auto nmi = nmi_matrix(pop);
        for (std::size_t i = 0; i < l; ++i)
        {
            CHECK(nmi(i, i) == 1.0);
            for (std::size_t j = 0; j < l; ++j)
            {
                CHECK(nmi(i, j) == nmi(j, i));
                CHECK(nmi(i, j) >= 0.0);
                CHECK(nmi(i, j) <= 1.0);
                if (i != j)
                    CHECK(std::abs(nmi(i, j) - oracle_nmi(pop, i, j)) < 1e-12);
            }
        }
    }
}

TEST_CASE("NMI examples")
{
    auto independent = Population::from_genotypes({"00", "01", "10", "11"});
    CHECK(nmi_matrix(independent)(0, 1) == Catch::Approx(0.0).margin(1e-15));
    auto identical = Population::from_genotypes({"00", "11", "11", "00", "11"});
    CHECK(nmi_matrix(identical)(0, 1) == Catch::Approx(1.0));
    RandomSource rng(22);
    Population large = random_population(10000, 2, rng);
    CHECK(nmi_matrix(large)(0, 1) <= 0.05);
}

TEST_CASE("linkage tree structure")
{
    auto two = Population::from_genotypes({"00", "01", "10", "11"});
    auto fos2 = learn_linkage_tree(two);
    CHECK(fos2.subsets == std::vector<std::vector<std::size_t>>{{0}, {1}});

    auto corr = Population::from_genotypes({"000", "001", "110", "111", "000", "111", "001", "110"});
    auto fos3 = learn_linkage_tree(corr);
    REQUIRE(fos3.size() == 4);
    auto merged = fos3[3];
    std::sort(merged.begin(), merged.end());
    CHECK(merged == std::vector<std::size_t>{0, 1});

    RandomSource rng(23);
    for (int trial = 0; trial < 40; ++trial)
    {
        std::size_t l = 2 + rng.below(14);
        auto fos = learn_linkage_tree(random_population(20, l, rng));
        REQUIRE(fos.size() == 2 * l - 2);
        for (std::size_t i = 0; i < l; ++i)
            CHECK(fos[i] == std::vector<std::size_t>{i});
        // Each merged element is the disjoint union of two earlier elements.
        for (std::size_t k = l; k < fos.size(); ++k)
        {
            std::set<std::size_t> target(fos[k].begin(), fos[k].end());
            bool found = false;
            for (std::size_t a = 0; a < k && !found; ++a)
                for (std::size_t b = a + 1; b < k && !found; ++b)
                {
                    std::set<std::size_t> u(fos[a].begin(), fos[a].end());
                    std::size_t before = u.size();
                    u.insert(fos[b].begin(), fos[b].end());
                    found = u.size() == before + fos[b].size() && u == target;
                }
            CHECK(found);
        }
    }
}

TEST_CASE("UPGMA averages similarities by cluster size")
{
    // 0 and 1 merge first; then {0,1} vs 2 averages 0.2 and 0.6 to 0.4,
    // which beats 2 vs 3 at 0.3.
    SquareMatrix s(4, 1.0);
    auto put = [&](std::size_t i, std::size_t j, double v) {
        s(i, j) = v;
        s(j, i) = v;
    };
    put(0, 1, 0.9);
    put(0, 2, 0.2);
    put(1, 2, 0.6);
    put(2, 3, 0.3);
    put(0, 3, 0.1);
    put(1, 3, 0.1);
    auto fos = upgma_linkage_tree(s);
    REQUIRE(fos.size() == 6);
    CHECK(fos[4] == std::vector<std::size_t>{0, 1});
    CHECK(fos[5] == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("stretch threshold")
{
    CHECK(stretch_threshold(16) == 5);
    CHECK(stretch_threshold(17) == 5);
    CHECK(stretch_threshold(32) == 6);
    CHECK(stretch_threshold(2) == 2);
}

TEST_CASE("GOM with identical donors changes nothing")
{
    GomHarness h(ProblemInstance(DeceptiveTrap(2, 5), TimeRatio{1, 1}));
    auto donors = Population::from_genotypes({"1100011000", "1100011000"});
    FamilyOfSubsets fos{{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}, {0}, {9}}};
    Individual s{Genotype::from_string("1100011000")};
    GomOutcome out;
    run_single(h.sim, evaluate_then_gom, &s, &fos, &donors, &out);
    CHECK(out.evaluations == 0);
    CHECK_FALSE(out.changed);
    CHECK(h.sim.stats().evaluations_completed == 1);
}

TEST_CASE("GOM accepts a donor block that raises fitness")
{
    GomHarness h(ProblemInstance(DeceptiveTrap(2, 5), TimeRatio{1, 1}));
    auto donors = Population::from_genotypes({"1111100000"});
    FamilyOfSubsets fos{{{0, 1, 2, 3, 4}}};
    Individual s{Genotype::from_string("0000000000")};
    GomOutcome out;
    run_single(h.sim, evaluate_then_gom, &s, &fos, &donors, &out);
    CHECK(s.fitness == 9.0);
    CHECK(s.genotype.to_string() == "1111100000");
    CHECK(out.changed);
    CHECK(out.improved);
    CHECK(out.evaluations == 1);
}

TEST_CASE("GOM accepts equal-fitness exchanges")
{
    GomHarness h(ProblemInstance(DeceptiveTrap(2, 5), TimeRatio{1, 1}));
    auto donors = Population::from_genotypes({"0011000000"});
    FamilyOfSubsets fos{{{0, 1, 2, 3, 4}}};
    Individual s{Genotype::from_string("1100000000")};
    GomOutcome out;
    run_single(h.sim, evaluate_then_gom, &s, &fos, &donors, &out);
    CHECK(s.fitness == 6.0);
    CHECK(s.genotype.to_string() == "0011000000");
    CHECK(out.changed);
    CHECK_FALSE(out.improved);
}

TEST_CASE("GOM rejects worse donor blocks")
{
    GomHarness h(ProblemInstance(DeceptiveTrap(2, 5), TimeRatio{1, 1}));
    auto donors = Population::from_genotypes({"1000000000"});
    FamilyOfSubsets fos{{{0, 1, 2, 3, 4}}};
    Individual s{Genotype::from_string("0000000000")};
    GomOutcome out;
    run_single(h.sim, evaluate_then_gom, &s, &fos, &donors, &out);
    CHECK(s.genotype.to_string() == "0000000000");
    CHECK(s.fitness == 8.0);
    CHECK(out.evaluations == 1);
    CHECK_FALSE(out.changed);
}

TEST_CASE("forced improvement")
{
    // k = 1 traps reduce to one-max.
    GomHarness h(ProblemInstance(DeceptiveTrap(2, 1), TimeRatio{1, 1}));
    FamilyOfSubsets fos{{{0}, {1}}};
    SECTION("a single improving element is accepted and FI stops")
    {
        Individual s{Genotype::from_string("10")}, elitist{Genotype::from_string("11")};
        GomOutcome out;
        run_single(h.sim, evaluate_then_fi, &s, &fos, &elitist, &out);
        CHECK(s.genotype.to_string() == "11");
        CHECK(out.improved);
        CHECK(out.evaluations == 1);
    }
    SECTION("a copy of the elitist is the result when nothing changes")
    {
        Individual s{Genotype::from_string("11")}, elitist{Genotype::from_string("11")};
        GomOutcome out;
        run_single(h.sim, evaluate_then_fi, &s, &fos, &elitist, &out);
        CHECK(s.genotype.to_string() == "11");
        CHECK(out.evaluations == 0);
        CHECK_FALSE(out.improved);
    }
    SECTION("a solution fitter than the elitist is left alone")
    {
        Individual s{Genotype::from_string("11")}, elitist{Genotype::from_string("01")};
        GomOutcome out;
        run_single(h.sim, evaluate_then_fi, &s, &fos, &elitist, &out);
        CHECK(s.genotype.to_string() == "11");
        CHECK(out.evaluations == 0);
    }
}

TEST_CASE("synchronous GOMEA learns one model per generation")
{
    ProblemInstance problem(DeceptiveTrap(4, 5), TimeRatio{5, 1});
    Gomea gomea(problem, GomeaConfig{GomeaVariant::synchronous, 16, 2, GomOptions{}});
    Simulator sim(problem, 16, 2);
    TerminationConfig term;
    term.max_time = 2000;
    term.stop_on_convergence = false;
    term.target = problem.target_value();
    RunStats stats = run_synchronous(gomea, sim, term);
    CHECK((gomea.learns() == stats.generations || gomea.learns() == stats.generations + 1));
}

TEST_CASE("GOM never lowers fitness within a run")
{
    ProblemInstance problem(AnklProblem::generate(8, 4, 2, 3), TimeRatio{10, 1});
    for (auto variant : {GomeaVariant::synchronous, GomeaVariant::async_end, GomeaVariant::async_intermediate})
    {
        Gomea gomea(problem, GomeaConfig{variant, 16, 4, GomOptions{}});
        int violations = 0, calls = 0;
        gomea.set_gom_observer([&](double before, double after_gom, double) {
            ++calls;
            violations += after_gom < before;
        });
        Simulator sim(problem, 16, 4);
        TerminationConfig term;
        term.max_evaluations = 20000;
        term.target = problem.target_value();
        if (variant == GomeaVariant::synchronous)
            run_synchronous(gomea, sim, term);
        else
            run_asynchronous(gomea, sim, term);
        CHECK(calls > 0);
        CHECK(violations == 0);
    }
}

TEST_CASE("GOMEA variants solve an easy trap instance")
{
    ProblemInstance problem(DeceptiveTrap(4, 5), TimeRatio{1, 1});
    for (const auto *id : {"gomea.sync", "gomea.ae", "gomea.ai"})
    {
        int successes = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed)
        {
            RunConfig rc;
            rc.algorithm = AlgorithmSpec::parse(id);
            rc.population_size = 64;
            rc.seed = seed;
            rc.termination.max_evaluations = 100000;
            successes += run_once(problem, rc).success;
        }
        INFO(id);
        CHECK(successes >= 9);
    }
}

namespace
{
Task gom_task(TaskContext ctx, Individual s, const FamilyOfSubsets *fos, const Population *donors,
              Population *write_through, GomOutcome *out)
{
    co_await gom(ctx, s, 0, *fos, *donors, write_through, GomOptions{}, *out);
}

Task observe_task(TaskContext ctx, const Population *pop, double at, double *seen)
{
    Individual dummy{Genotype(10)};
    co_await ctx.evaluate(dummy, Evaluation{0.0, at});
    *seen = (*pop)[0].fitness;
}
} // namespace

TEST_CASE("write-through exposes accepted changes to concurrent observers")
{
    ProblemInstance problem(DeceptiveTrap(2, 5), TimeRatio{1, 1});
    auto donors = Population::from_genotypes({"1111111111"});
    FamilyOfSubsets fos{{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}}};
    for (bool intermediate : {false, true})
    {
        Population pop = Population::from_genotypes({"0000000000"});
        pop.set_fitness(0, 8.0, 1.0);
        Simulator sim(problem, 2, 0);
        GomOutcome out;
        double seen = -1.0;
        auto c0 = sim.new_context(0, false, 1);
        auto i0 = c0.info;
        sim.enqueue(gom_task(std::move(c0), pop[0], &fos, &donors, intermediate ? &pop : nullptr, &out), i0);
        auto c1 = sim.new_context(1, false, 1);
        auto i1 = c1.info;
        sim.enqueue(observe_task(std::move(c1), &pop, 1.5, &seen), i1);
        sim.run([] { return StopReason::none; });
        // The first accepted block lands at t = 1, the observer looks at 1.5.
        CHECK(out.evaluations == 2);
        CHECK(seen == (intermediate ? 9.0 : 8.0));
    }
}
