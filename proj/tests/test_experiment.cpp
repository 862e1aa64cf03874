#include "aeasim/experiment.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace aeasim;

namespace
{
ExperimentConfig small_config()
{
    ExperimentConfig c;
    c.algorithms = {"gomea.ae"};
    c.problems = {"dt:l=10,k=5"};
    c.ratios = {TimeRatio{1, 1}};
    c.seeds = {1, 2, 3};
    c.max_pop = 256;
    return c;
}

std::string cells_csv(const ExperimentResult &r)
{
    std::ostringstream os;
    write_cells_csv(os, r.cells);
    return os.str();
}

std::size_t line_count(const std::string &s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}
} // namespace

TEST_CASE("a one-cell matrix with three seeds")
{
    auto r = run_experiment_matrix(small_config());
    REQUIRE(r.cells.size() == 3);
    REQUIRE(r.aggregates.size() == 1);
    CHECK(line_count(cells_csv(r)) == 4);
    const auto &agg = r.aggregates[0];
    CHECK(agg.seeds == 3);
    CHECK(agg.failures == 0);
    REQUIRE(agg.pop_excluding_failures);
    CHECK(agg.pop_excluding_failures->q25 <= agg.pop_excluding_failures->median);
    CHECK(agg.pop_excluding_failures->median <= agg.pop_excluding_failures->q75);
    for (const auto &c : r.cells)
    {
        REQUIRE_FALSE(c.failed());
        const auto *rec = &c.trace.back();
        CHECK(c.simulated_time > 0.0);
        CHECK(rec->population_size > 0);
    }
    std::ostringstream agg_csv;
    write_aggregates_csv(agg_csv, r.aggregates);
    CHECK(line_count(agg_csv.str()) == 2);
}

TEST_CASE("cells that never succeed are reported as FAILED")
{
    auto c = small_config();
    c.algorithms = {"ga.async.ss.ux"};
    c.problems = {"dt:l=30,k=5"};
    c.seeds = {1};
    c.max_pop = 32;
    auto r = run_experiment_matrix(c);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].failed());
    CHECK(r.cells[0].max_probed == 32);
    CHECK(ranked_population(r.cells[0]) == 32.0);
    CHECK(cells_csv(r).find(",FAILED,0,,\n") != std::string::npos);
    CHECK(r.aggregates[0].failures == 1);
    CHECK_FALSE(r.aggregates[0].pop_excluding_failures);
    REQUIRE(r.aggregates[0].pop_failures_at_max);
    CHECK(r.aggregates[0].pop_failures_at_max->median == 32.0);
}

TEST_CASE("matrix output is deterministic and independent of worker count")
{
    auto c = small_config();
    c.algorithms = {"gomea.ae", "ga.async.gen.sfx"};
    c.ratios = {TimeRatio{10, 1}, TimeRatio{1, 10}};
    auto a = run_experiment_matrix(c);
    auto b = run_experiment_matrix(c);
    c.jobs = 3;
    auto d = run_experiment_matrix(c);
    CHECK(cells_csv(a) == cells_csv(b));
    CHECK(cells_csv(a) == cells_csv(d));
    CHECK(a.cells.size() == 12);
    CHECK(a.comparisons.size() == 2);
}

TEST_CASE("golden-section cells report the fastest size")
{
    auto c = small_config();
    c.mode = SearchMode::golden;
    c.seeds = {4};
    auto r = run_experiment_matrix(c);
    REQUIRE_FALSE(r.cells[0].failed());
    double best = INFINITY;
    for (const auto &p : r.cells[0].trace)
        if (p.outcome.success)
            best = std::min(best, p.outcome.simulated_time);
    CHECK(r.cells[0].simulated_time == best);
}

TEST_CASE("errors inside a cell are captured")
{
    auto c = small_config();
    c.problems = {"dt:l=10,k=5"};
    c.base = 8;
    c.step = 3;
    c.seeds = {1};
    auto r = run_experiment_matrix(c);
    CHECK(r.cells[0].failed());
    CHECK_FALSE(r.cells[0].error.empty());
}

TEST_CASE("ratio comparisons apply Holm correction per group")
{
    std::vector<CellResult> cells;
    for (int s = 0; s < 10; ++s)
        for (auto [ratio, pop] : {std::pair{TimeRatio{10, 1}, 20}, {TimeRatio{1, 1}, 40}, {TimeRatio{1, 10}, 80}})
        {
            CellResult c;
            c.algorithm = "x";
            c.problem = "p";
            c.ratio = ratio;
            c.seed = static_cast<std::uint64_t>(s);
            c.population_size = static_cast<std::size_t>(pop + s);
            c.max_probed = 4096;
            cells.push_back(c);
        }
    auto cmp = compare_ratios(cells, 0.05);
    REQUIRE(cmp.size() == 3);
    for (const auto &x : cmp)
        CHECK(x.reject);
    auto agg = aggregate_cells(cells);
    REQUIRE(agg.size() == 3);
    CHECK(agg[0].pop_excluding_failures->median == 24.5);
}

TEST_CASE("experiment config JSON round trip")
{
    auto c = small_config();
    c.mode = SearchMode::golden;
    c.jobs = 2;
    c.evaluation_factor = 10;
    auto j = config_to_json(c);
    auto back = config_from_json(j);
    CHECK(back.algorithms == c.algorithms);
    CHECK(back.problems == c.problems);
    CHECK(back.ratios == c.ratios);
    CHECK(back.seeds == c.seeds);
    CHECK(back.mode == SearchMode::golden);
    CHECK(back.jobs == 2);
    CHECK(back.evaluation_factor == 10);
    CHECK(config_to_json(back) == j);
}

TEST_CASE("experiment config parsing")
{
    auto c = config_from_json(nlohmann::json::parse(R"({"algorithms":["gomea.ai"],"problems":["dt:l=20,k=5"],
        "ratios":"paper","seeds":{"first":5,"count":3}})"));
    CHECK(c.ratios.size() == 7);
    CHECK(c.seeds == std::vector<std::uint64_t>{5, 6, 7});
    CHECK_THROWS_WITH(config_from_json(nlohmann::json::parse(R"({"algorithmz":[]})")),
                      Catch::Matchers::ContainsSubstring("algorithms"));
    CHECK_THROWS_AS(parse_search_mode("ternary"), UsageError);
    CHECK(parse_ratio_list("10:1,1:10") == std::vector<TimeRatio>{{10, 1}, {1, 10}});
    CHECK_THROWS_AS(parse_ratio_list("10:1,,1:10"), UsageError);
    ExperimentConfig empty;
    CHECK_THROWS_AS(empty.validate(), UsageError);
}

TEST_CASE("run termination uses the scaled evaluation cap")
{
    auto c = small_config();
    auto t = run_termination(c, 16, 10);
    CHECK(t.max_evaluations == 50 * 16 * 10);
    CHECK_FALSE(t.stagnation);
    c.max_evaluations = 100;
    CHECK(run_termination(c, 16, 10).max_evaluations == 100);
    c.evaluation_factor = 0;
    c.max_evaluations = std::numeric_limits<std::uint64_t>::max();
    CHECK(run_termination(c, 16, 10).max_evaluations == std::numeric_limits<std::uint64_t>::max());
}
