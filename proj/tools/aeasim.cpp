// Command-line front end: single runs, population-size searches, experiment
// matrices and ANKL instance generation.
//
// Exit codes: 0 success, 1 configuration error, 2 search FAILED.

#include "aeasim/aeasim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

namespace
{

using namespace aeasim;

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_failed = 2;

// Options shared by every subcommand that runs simulations.
struct RunOptions
{
    std::string algorithm;
    std::string problem;
    std::string ratio = "1:1";
    std::uint64_t seed = 0;
    std::size_t processors = 0;
    double max_time = std::numeric_limits<double>::infinity();
    std::uint64_t max_evaluations = std::numeric_limits<std::uint64_t>::max();
    double evaluation_factor = 50.0;
    bool stagnation = false;
    std::optional<double> target;
    bool charge_noop = false;
};

void add_run_options(CLI::App *cmd, RunOptions &o, bool single_run)
{
    cmd->add_option("--algo", o.algorithm, "Algorithm id, e.g. gomea.ai or ga.async.ss.ux")->required();
    cmd->add_option("--problem", o.problem, "dt:l=..,k=.. | ankl:l=..,k=..,stride=..,seed=.. | instance JSON path")
        ->required();
    cmd->add_option("--ratio", o.ratio, "Evaluation-time ratio a:b")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    cmd->add_option("--processors", o.processors, "Simulated processors (0 = population size)")
        ->capture_default_str();
    cmd->add_option("--max-time", o.max_time, "Simulated-time cap per run");
    cmd->add_option("--max-evals", o.max_evaluations, "Issued-evaluation cap per run");
    if (!single_run)
        cmd->add_option("--eval-factor", o.evaluation_factor,
                        "Per-run evaluation cap as a multiple of |P| * l (0 disables)")
            ->capture_default_str();
    cmd->add_flag("--stagnation", o.stagnation, "Stop runs without an improvement in 2e + 10|P| evaluations");
    cmd->add_option("--target", o.target, "Target fitness (default: the optimum)");
    cmd->add_flag("--charge-noop", o.charge_noop, "Charge GOM evaluations that leave the genotype unchanged");
}

struct SearchOptions
{
    std::size_t base = 8;
    std::size_t min_pop = 4;
    std::size_t max_pop = 4096;
    std::uint64_t max_search_evaluations = std::numeric_limits<std::uint64_t>::max();
    double wall_seconds = std::numeric_limits<double>::infinity();
};

void add_search_options(CLI::App *cmd, SearchOptions &o, bool golden)
{
    cmd->add_option("--base", o.base, "First population size probed")->capture_default_str();
    if (golden)
        cmd->add_option("--min-pop", o.min_pop, "Smallest population size probed")->capture_default_str();
    cmd->add_option("--max-pop", o.max_pop, "Largest population size probed")->capture_default_str();
    cmd->add_option("--max-search-evals", o.max_search_evaluations, "Evaluation budget for the whole search");
    cmd->add_option("--wall-seconds", o.wall_seconds, "Real-time budget for the whole search");
}

ExperimentConfig single_cell_config(const RunOptions &r, const SearchOptions &s, SearchMode mode)
{
    ExperimentConfig c;
    c.algorithms = {r.algorithm};
    c.problems = {r.problem};
    c.ratios = {TimeRatio::parse(r.ratio)};
    c.seeds = {r.seed};
    c.processors = r.processors;
    c.max_time = r.max_time;
    c.max_evaluations = r.max_evaluations;
    c.evaluation_factor = r.evaluation_factor;
    c.stagnation = r.stagnation;
    c.target = r.target;
    c.charge_noop_evals = r.charge_noop;
    c.mode = mode;
    c.base = s.base;
    c.min_pop = s.min_pop;
    c.max_pop = s.max_pop;
    c.budget.max_total_evaluations = s.max_search_evaluations;
    c.budget.wall_seconds = s.wall_seconds;
    return c;
}

std::unique_ptr<std::ostream> open_output(const std::string &path)
{
    auto out = std::make_unique<std::ofstream>(path);
    if (!*out)
        throw UsageError("cannot open output file '" + path + "'");
    return out;
}

int cmd_run(const RunOptions &o, std::size_t population_size, const std::string &event_log)
{
    ProblemInstance problem(parse_problem(o.problem), TimeRatio::parse(o.ratio));
    RunConfig rc;
    rc.algorithm = AlgorithmSpec::parse(o.algorithm);
    rc.population_size = population_size;
    rc.processors = o.processors;
    rc.seed = o.seed;
    rc.termination.target = o.target;
    rc.termination.max_time = o.max_time;
    rc.termination.max_evaluations = o.max_evaluations;
    rc.termination.stagnation = o.stagnation;
    rc.record_events = !event_log.empty();
    rc.charge_noop_evals = o.charge_noop;
    RunResult r = run_once(problem, rc);

    if (!event_log.empty())
    {
        auto out = open_output(event_log);
        write_event_log_csv(*out, r.events);
    }
    std::cout << "algorithm,problem,ratio,seed,pop_size,success,simulated_time,evaluations,stop_reason,"
                 "best_fitness,generations,total_idle_time\n";
    std::cout << rc.algorithm.id() << ",\"" << problem.name() << "\"," << problem.ratio().to_string() << ','
              << o.seed << ',' << population_size << ',' << (r.success ? 1 : 0) << ','
              << format_number(r.stats.simulated_time) << ',' << r.stats.evaluations_issued << ','
              << to_string(r.stats.stop_reason) << ',' << format_number(r.stats.best_fitness) << ','
              << r.stats.generations << ',' << format_number(r.stats.total_idle_time()) << '\n';
    return exit_ok;
}

int cmd_search(const RunOptions &r, const SearchOptions &s, SearchMode mode, bool show_trace)
{
    ExperimentConfig config = single_cell_config(r, s, mode);
    config.validate();
    ProblemInstance problem(parse_problem(r.problem), config.ratios.front());
    CellResult cell = run_cell(problem, r.algorithm, r.seed, config);
    if (!cell.error.empty())
        throw UsageError(cell.error);
    write_cells_csv(std::cout, {cell});
    if (show_trace)
    {
        std::cout << "\nprobe_pop_size,success,simulated_time,evaluations\n";
        for (const auto &t : cell.trace)
            std::cout << t.population_size << ',' << (t.outcome.success ? 1 : 0) << ','
                      << format_number(t.outcome.simulated_time) << ',' << t.outcome.evaluations << '\n';
    }
    return cell.failed() ? exit_failed : exit_ok;
}

std::vector<std::uint64_t> parse_seed_list(const std::string &text)
{
    std::vector<std::uint64_t> seeds;
    auto colon = text.find(':');
    try
    {
        if (colon != std::string::npos)
        {
            auto first = std::stoull(text.substr(0, colon));
            auto count = std::stoull(text.substr(colon + 1));
            for (std::uint64_t i = 0; i < count; ++i)
                seeds.push_back(first + i);
            return seeds;
        }
        std::size_t start = 0;
        while (start <= text.size())
        {
            auto comma = text.find(',', start);
            seeds.push_back(std::stoull(text.substr(start, comma - start)));
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
    }
    catch (const std::exception &)
    {
        throw UsageError("malformed seed list '" + text + "': expected first:count or a comma-separated list");
    }
    return seeds;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Discrete-event simulation of synchronous and asynchronous parallel EAs"};
    app.require_subcommand(1);

    RunOptions run_opts;
    std::size_t population_size = 0;
    std::string event_log;
    auto *run = app.add_subcommand("run", "Run a single simulation");
    add_run_options(run, run_opts, true);
    run->add_option("--pop", population_size, "Population size (even, >= 4)")->required();
    run->add_option("--event-log", event_log, "Write the per-event CSV log to this path");

    RunOptions bisect_opts;
    SearchOptions bisect_search;
    bool bisect_trace = false;
    auto *bisect = app.add_subcommand("bisect", "Minimal successful population size by doubling and bisection");
    add_run_options(bisect, bisect_opts, false);
    add_search_options(bisect, bisect_search, false);
    bisect->add_flag("--trace", bisect_trace, "Also print every probe");

    RunOptions golden_opts;
    SearchOptions golden_search;
    bool golden_trace = false;
    auto *golden = app.add_subcommand("goldensection", "Population size with minimal simulated time");
    add_run_options(golden, golden_opts, false);
    add_search_options(golden, golden_search, true);
    golden->add_flag("--trace", golden_trace, "Also print every probe");

    std::string matrix_config, matrix_out, matrix_summary, matrix_aggregates, matrix_ratios, matrix_seeds,
        matrix_search;
    std::vector<std::string> matrix_algos, matrix_problems;
    std::optional<std::size_t> matrix_jobs;
    auto *matrix = app.add_subcommand("matrix", "Run an experiment grid (algorithms x problems x ratios x seeds)");
    matrix->add_option("--config", matrix_config, "Declarative JSON experiment config");
    matrix->add_option("--algo", matrix_algos, "Algorithm id (repeatable; overrides the config)");
    matrix->add_option("--problem", matrix_problems, "Problem spec (repeatable; overrides the config)");
    matrix->add_option("--ratios", matrix_ratios, "'paper' or a comma-separated list of a:b ratios");
    matrix->add_option("--seeds", matrix_seeds, "first:count or a comma-separated list");
    matrix->add_option("--search", matrix_search, "bisection or golden");
    matrix->add_option("--jobs", matrix_jobs, "Cells run in parallel (default 1)");
    matrix->add_option("--out", matrix_out, "Per-cell CSV (default: stdout)");
    matrix->add_option("--aggregates", matrix_aggregates, "Aggregate quantiles CSV");
    matrix->add_option("--summary", matrix_summary, "JSON summary with quantiles and test decisions");

    std::string gen_problem, gen_out;
    auto *gen = app.add_subcommand("gen-problem", "Generate and serialize a problem instance");
    gen->add_option("--problem", gen_problem, "Problem spec, e.g. ankl:l=40,k=5,stride=2,seed=1")->required();
    gen->add_option("--out", gen_out, "Output JSON path (default: stdout)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try
    {
        if (*run)
            return cmd_run(run_opts, population_size, event_log);
        if (*bisect)
            return cmd_search(bisect_opts, bisect_search, SearchMode::bisection, bisect_trace);
        if (*golden)
            return cmd_search(golden_opts, golden_search, SearchMode::golden, golden_trace);
        if (*matrix)
        {
            ExperimentConfig config;
            if (!matrix_config.empty())
                config = load_experiment_config(matrix_config);
            if (!matrix_algos.empty())
                config.algorithms = matrix_algos;
            if (!matrix_problems.empty())
                config.problems = matrix_problems;
            if (!matrix_ratios.empty())
                config.ratios = parse_ratio_list(matrix_ratios);
            if (!matrix_seeds.empty())
                config.seeds = parse_seed_list(matrix_seeds);
            if (!matrix_search.empty())
                config.mode = parse_search_mode(matrix_search);
            if (matrix_jobs)
                config.jobs = *matrix_jobs;
            ExperimentResult result = run_experiment_matrix(config);
            if (matrix_out.empty())
                write_cells_csv(std::cout, result.cells);
            else
                write_cells_csv(*open_output(matrix_out), result.cells);
            if (!matrix_aggregates.empty())
                write_aggregates_csv(*open_output(matrix_aggregates), result.aggregates);
            if (!matrix_summary.empty())
                *open_output(matrix_summary) << summary_json(config, result).dump(2) << '\n';
            return exit_ok;
        }
        if (*gen)
        {
            auto fn = parse_problem(gen_problem);
            auto text = function_to_json(fn).dump(2);
            if (gen_out.empty())
                std::cout << text << '\n';
            else
                *open_output(gen_out) << text << '\n';
            return exit_ok;
        }
    }
    catch (const UsageError &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }
    catch (const nlohmann::json::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }
    return exit_config;
}
