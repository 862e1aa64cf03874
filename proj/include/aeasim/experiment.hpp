#pragma once

// Experiment matrix: every (algorithm, problem, ratio, seed) cell runs one
// population-size search; cells are aggregated per (algorithm, problem,
// ratio) and ratios are compared pairwise with Holm-corrected MWU tests.

#include "algorithms.hpp"
#include "core.hpp"
#include "problems.hpp"
#include "search.hpp"
#include "stats.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace aeasim
{

enum class SearchMode
{
    bisection,
    golden
};

inline std::string to_string(SearchMode mode)
{
    return mode == SearchMode::bisection ? "bisection" : "golden";
}

inline SearchMode parse_search_mode(std::string_view text)
{
    if (text == "bisection")
        return SearchMode::bisection;
    if (text == "golden" || text == "goldensection")
        return SearchMode::golden;
    throw UsageError("unknown search mode '" + std::string(text) + "'; valid options: bisection golden");
}

// Expands "paper" to the seven ratios, otherwise a comma-separated list.
inline std::vector<TimeRatio> parse_ratio_list(std::string_view text)
{
    if (text == "paper")
        return paper_ratios();
    std::vector<TimeRatio> out;
    while (!text.empty())
    {
        auto comma = text.find(',');
        out.push_back(TimeRatio::parse(text.substr(0, comma)));
        if (comma == std::string_view::npos)
            break;
        text.remove_prefix(comma + 1);
    }
    if (out.empty())
        throw UsageError("empty ratio list");
    return out;
}

struct ExperimentConfig
{
    std::vector<std::string> algorithms;
    std::vector<std::string> problems;
    std::vector<TimeRatio> ratios;
    std::vector<std::uint64_t> seeds;
    // 0 means one processor per population member.
    std::size_t processors = 0;
    // Per-run caps. The evaluation cap is the smaller of max_evaluations and
    // evaluation_factor * |P| * l (a factor of 0 disables the scaled cap).
    double max_time = std::numeric_limits<double>::infinity();
    std::uint64_t max_evaluations = std::numeric_limits<std::uint64_t>::max();
    double evaluation_factor = 50.0;
    bool stagnation = false;
    std::optional<double> target;
    bool charge_noop_evals = false;

    SearchMode mode = SearchMode::bisection;
    std::size_t base = 8;
    std::size_t min_pop = 4;
    std::size_t max_pop = 4096;
    std::size_t step = 2;
    // Per-search budget (all probes of one cell).
    SearchBudget budget;

    std::size_t jobs = 1;
    double alpha = 0.05;

    void validate() const
    {
        if (algorithms.empty() || problems.empty() || ratios.empty() || seeds.empty())
            throw UsageError("experiment needs at least one algorithm, problem, ratio and seed");
        for (const auto &a : algorithms)
            AlgorithmSpec::parse(a);
        if (base < 4 || base % 2 != 0)
            throw UsageError("base population size must be even and at least 4");
        if (jobs == 0)
            throw UsageError("jobs must be at least 1");
    }
};

// Termination settings for one run of `config` at the given size.
inline TerminationConfig run_termination(const ExperimentConfig &config, std::size_t population_size,
                                         std::size_t length)
{
    TerminationConfig term;
    term.target = config.target;
    term.max_time = config.max_time;
    term.max_evaluations = config.max_evaluations;
    if (config.evaluation_factor > 0.0)
    {
        double scaled = config.evaluation_factor * static_cast<double>(population_size) * static_cast<double>(length);
        if (scaled < static_cast<double>(term.max_evaluations))
            term.max_evaluations = static_cast<std::uint64_t>(scaled);
    }
    term.stagnation = config.stagnation;
    return term;
}

// Probe running one simulation per population size.
inline Probe make_probe(const ProblemInstance &problem, const AlgorithmSpec &algorithm, std::uint64_t seed,
                        const ExperimentConfig &config)
{
    return [&problem, algorithm, seed, &config](std::size_t population_size) {
        RunConfig rc;
        rc.algorithm = algorithm;
        rc.population_size = population_size;
        rc.processors = config.processors;
        rc.seed = seed;
        rc.termination = run_termination(config, population_size, problem.length());
        rc.charge_noop_evals = config.charge_noop_evals;
        RunResult r = run_once(problem, rc);
        return ProbeOutcome{r.success, r.stats.simulated_time, r.stats.evaluations_issued};
    };
}

struct CellResult
{
    std::string algorithm;
    std::string problem;
    TimeRatio ratio;
    std::uint64_t seed = 0;
    // Empty for FAILED cells.
    std::optional<std::size_t> population_size;
    // Of the run at the reported size.
    double simulated_time = 0.0;
    std::uint64_t evaluations = 0;
    std::size_t max_probed = 0;
    bool truncated = false;
    std::vector<ProbeRecord> trace;
    // Set when the cell threw; the cell then counts as FAILED.
    std::string error;

    bool failed() const
    {
        return !population_size.has_value();
    }
};

struct Quartiles
{
    double q25 = 0.0, median = 0.0, q75 = 0.0;
};

inline Quartiles quartiles(const std::vector<double> &values)
{
    return {quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

struct AggregateRow
{
    std::string algorithm;
    std::string problem;
    TimeRatio ratio;
    std::size_t seeds = 0;
    std::size_t failures = 0;
    // Population size over successful cells only.
    std::optional<Quartiles> pop_excluding_failures;
    // Population size with FAILED cells counted at their largest probed size.
    std::optional<Quartiles> pop_failures_at_max;
    std::optional<Quartiles> time_excluding_failures;
};

struct RatioComparison
{
    std::string algorithm;
    std::string problem;
    TimeRatio a;
    TimeRatio b;
    double u = 0.0;
    double p = 1.0;
    bool reject = false;
};

struct ExperimentResult
{
    std::vector<CellResult> cells;
    std::vector<AggregateRow> aggregates;
    std::vector<RatioComparison> comparisons;
};

// Population size used for rank statistics: FAILED cells rank at their
// largest probed size.
inline double ranked_population(const CellResult &cell)
{
    return cell.population_size ? static_cast<double>(*cell.population_size) : static_cast<double>(cell.max_probed);
}

inline CellResult run_cell(const ProblemInstance &problem, const std::string &algorithm_id, std::uint64_t seed,
                           const ExperimentConfig &config)
{
    CellResult cell;
    cell.algorithm = algorithm_id;
    cell.problem = problem.name();
    cell.ratio = problem.ratio();
    cell.seed = seed;
    try
    {
        AlgorithmSpec algorithm = AlgorithmSpec::parse(algorithm_id);
        Probe probe = make_probe(problem, algorithm, seed, config);
        if (config.mode == SearchMode::bisection)
        {
            BisectionResult r = bisect_min_popsize(probe, {config.base, config.max_pop, config.step, config.budget});
            cell.population_size = r.minimal;
            cell.trace = std::move(r.trace);
            cell.truncated = r.truncated;
        }
        else
        {
            GoldenResult r = golden_min_time(
                probe, {config.base, config.min_pop, config.max_pop, config.step, config.budget});
            cell.population_size = r.best_population;
            cell.trace = std::move(r.trace);
            cell.truncated = r.truncated;
        }
    }
    catch (const std::exception &e)
    {
        cell.population_size.reset();
        cell.error = e.what();
    }
    for (const auto &probe : cell.trace)
    {
        cell.max_probed = std::max(cell.max_probed, probe.population_size);
        if (cell.population_size && probe.population_size == *cell.population_size)
        {
            cell.simulated_time = probe.outcome.simulated_time;
            cell.evaluations = probe.outcome.evaluations;
        }
    }
    return cell;
}

inline std::vector<AggregateRow> aggregate_cells(const std::vector<CellResult> &cells)
{
    std::vector<AggregateRow> rows;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
    std::vector<std::vector<const CellResult *>> groups;
    for (const auto &c : cells)
    {
        auto key = std::make_tuple(c.algorithm, c.problem, c.ratio.to_string());
        auto [it, inserted] = index.try_emplace(key, groups.size());
        if (inserted)
        {
            groups.emplace_back();
            AggregateRow row;
            row.algorithm = c.algorithm;
            row.problem = c.problem;
            row.ratio = c.ratio;
            rows.push_back(std::move(row));
        }
        groups[it->second].push_back(&c);
    }
    for (std::size_t g = 0; g < groups.size(); ++g)
    {
        std::vector<double> pop_ok, pop_all, time_ok;
        for (const auto *c : groups[g])
        {
            pop_all.push_back(ranked_population(*c));
            if (c->failed())
                ++rows[g].failures;
            else
            {
                pop_ok.push_back(static_cast<double>(*c->population_size));
                time_ok.push_back(c->simulated_time);
            }
        }
        rows[g].seeds = groups[g].size();
        if (!pop_ok.empty())
        {
            rows[g].pop_excluding_failures = quartiles(pop_ok);
            rows[g].time_excluding_failures = quartiles(time_ok);
        }
        rows[g].pop_failures_at_max = quartiles(pop_all);
    }
    return rows;
}

// Two-sided MWU between every pair of ratios of each (algorithm, problem),
// Holm-corrected within that group.
inline std::vector<RatioComparison> compare_ratios(const std::vector<CellResult> &cells, double alpha)
{
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<TimeRatio, std::vector<double>>>> groups;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto &c : cells)
    {
        auto key = std::make_pair(c.algorithm, c.problem);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted)
            order.push_back(key);
        auto &samples = it->second;
        auto s = std::find_if(samples.begin(), samples.end(), [&](const auto &e) { return e.first == c.ratio; });
        if (s == samples.end())
        {
            samples.push_back({c.ratio, {}});
            s = samples.end() - 1;
        }
        s->second.push_back(ranked_population(c));
    }

    std::vector<RatioComparison> out;
    for (const auto &key : order)
    {
        const auto &samples = groups[key];
        std::vector<RatioComparison> group;
        for (std::size_t i = 0; i < samples.size(); ++i)
            for (std::size_t j = i + 1; j < samples.size(); ++j)
            {
                auto r = mann_whitney_u(samples[i].second, samples[j].second);
                group.push_back({key.first, key.second, samples[i].first, samples[j].first, r.u, r.p, false});
            }
        std::vector<double> ps;
        for (const auto &c : group)
            ps.push_back(c.p);
        auto reject = holm_bonferroni(ps, alpha);
        for (std::size_t i = 0; i < group.size(); ++i)
            group[i].reject = reject[i];
        out.insert(out.end(), group.begin(), group.end());
    }
    return out;
}

// Runs every cell, `config.jobs` at a time. Cell order (and therefore the
// output) is algorithm-major, then problem, ratio, seed, regardless of jobs.
inline ExperimentResult run_experiment_matrix(const ExperimentConfig &config,
                                              const std::function<void(const CellResult &)> &on_cell = {})
{
    config.validate();
    std::vector<ProblemInstance::Function> functions;
    for (const auto &p : config.problems)
        functions.push_back(parse_problem(p));

    struct CellSpec
    {
        std::size_t algorithm, problem, ratio, seed;
    };
    std::vector<CellSpec> specs;
    std::vector<ProblemInstance> instances;
    for (std::size_t p = 0; p < functions.size(); ++p)
        for (std::size_t r = 0; r < config.ratios.size(); ++r)
            instances.emplace_back(functions[p], config.ratios[r]);
    for (std::size_t a = 0; a < config.algorithms.size(); ++a)
        for (std::size_t p = 0; p < functions.size(); ++p)
            for (std::size_t r = 0; r < config.ratios.size(); ++r)
                for (std::size_t s = 0; s < config.seeds.size(); ++s)
                    specs.push_back({a, p, r, s});

    ExperimentResult result;
    result.cells.resize(specs.size());
    std::atomic<std::size_t> next{0};
    std::mutex callback_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++)
        {
            const auto &spec = specs[i];
            const auto &instance = instances[spec.problem * config.ratios.size() + spec.ratio];
            result.cells[i] = run_cell(instance, config.algorithms[spec.algorithm], config.seeds[spec.seed], config);
            if (on_cell)
            {
                std::lock_guard lock(callback_mutex);
                on_cell(result.cells[i]);
            }
        }
    };
    const std::size_t threads = std::min(config.jobs, specs.size());
    if (threads <= 1)
        worker();
    else
    {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }

    result.aggregates = aggregate_cells(result.cells);
    result.comparisons = compare_ratios(result.cells, config.alpha);
    return result;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string format_number(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write_cells_csv(std::ostream &out, const std::vector<CellResult> &cells)
{
    out << "algorithm,problem,ratio,seed,pop_size,success,simulated_time,evaluations\n";
    for (const auto &c : cells)
    {
        out << c.algorithm << ",\"" << c.problem << "\"," << c.ratio.to_string() << ',' << c.seed << ',';
        if (c.failed())
            out << "FAILED,0,,\n";
        else
            out << *c.population_size << ",1," << format_number(c.simulated_time) << ',' << c.evaluations << '\n';
    }
}

inline void write_aggregates_csv(std::ostream &out, const std::vector<AggregateRow> &rows)
{
    out << "algorithm,problem,ratio,seeds,failures,pop_q25,pop_median,pop_q75,pop_q25_failed_at_max,"
           "pop_median_failed_at_max,pop_q75_failed_at_max,time_q25,time_median,time_q75\n";
    auto q = [&](const std::optional<Quartiles> &x) {
        if (!x)
            out << ",,,";
        else
            out << ',' << format_number(x->q25) << ',' << format_number(x->median) << ',' << format_number(x->q75);
    };
    for (const auto &r : rows)
    {
        out << r.algorithm << ",\"" << r.problem << "\"," << r.ratio.to_string() << ',' << r.seeds << ','
            << r.failures;
        q(r.pop_excluding_failures);
        q(r.pop_failures_at_max);
        q(r.time_excluding_failures);
        out << '\n';
    }
}

inline nlohmann::json quartiles_json(const std::optional<Quartiles> &q)
{
    if (!q)
        return nullptr;
    return {{"q25", q->q25}, {"median", q->median}, {"q75", q->q75}};
}

inline nlohmann::json config_to_json(const ExperimentConfig &c)
{
    nlohmann::json j;
    j["algorithms"] = c.algorithms;
    j["problems"] = c.problems;
    std::vector<std::string> ratios;
    for (const auto &r : c.ratios)
        ratios.push_back(r.to_string());
    j["ratios"] = ratios;
    j["seeds"] = c.seeds;
    j["processors"] = c.processors;
    j["max_time"] = std::isinf(c.max_time) ? nlohmann::json(nullptr) : nlohmann::json(c.max_time);
    j["max_evaluations"] = c.max_evaluations == std::numeric_limits<std::uint64_t>::max()
                               ? nlohmann::json(nullptr)
                               : nlohmann::json(c.max_evaluations);
    j["evaluation_factor"] = c.evaluation_factor;
    j["stagnation"] = c.stagnation;
    j["target"] = c.target ? nlohmann::json(*c.target) : nlohmann::json(nullptr);
    j["charge_noop_evals"] = c.charge_noop_evals;
    j["search"] = to_string(c.mode);
    j["base"] = c.base;
    j["min_pop"] = c.min_pop;
    j["max_pop"] = c.max_pop;
    j["step"] = c.step;
    j["max_search_evaluations"] = c.budget.max_total_evaluations == std::numeric_limits<std::uint64_t>::max()
                                      ? nlohmann::json(nullptr)
                                      : nlohmann::json(c.budget.max_total_evaluations);
    j["wall_seconds"] = std::isinf(c.budget.wall_seconds) ? nlohmann::json(nullptr)
                                                          : nlohmann::json(c.budget.wall_seconds);
    j["jobs"] = c.jobs;
    j["alpha"] = c.alpha;
    return j;
}

// Reads a declarative config. "seeds" is either a list or
// {"first": s, "count": n}; "ratios" is a list or "paper". Missing keys keep
// the values already in `base`.
inline ExperimentConfig config_from_json(const nlohmann::json &j, ExperimentConfig base = {})
{
    const std::vector<std::string> known = {"algorithms",
                                            "problems",
                                            "ratios",
                                            "seeds",
                                            "processors",
                                            "max_time",
                                            "max_evaluations",
                                            "evaluation_factor",
                                            "stagnation",
                                            "target",
                                            "charge_noop_evals",
                                            "search",
                                            "base",
                                            "min_pop",
                                            "max_pop",
                                            "step",
                                            "max_search_evaluations",
                                            "wall_seconds",
                                            "jobs",
                                            "alpha"};
    if (!j.is_object())
        throw UsageError("experiment config must be a JSON object");
    for (const auto &[key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
        {
            std::string msg = "unknown experiment config key '" + key + "'; valid keys:";
            for (const auto &k : known)
                msg += " " + k;
            throw UsageError(msg);
        }

    ExperimentConfig c = std::move(base);
    try
    {
        if (j.contains("algorithms"))
            c.algorithms = j["algorithms"].get<std::vector<std::string>>();
        if (j.contains("problems"))
            c.problems = j["problems"].get<std::vector<std::string>>();
        if (j.contains("ratios"))
        {
            c.ratios.clear();
            if (j["ratios"].is_string())
                c.ratios = parse_ratio_list(j["ratios"].get<std::string>());
            else
                for (const auto &r : j["ratios"])
                    c.ratios.push_back(TimeRatio::parse(r.get<std::string>()));
        }
        if (j.contains("seeds"))
        {
            const auto &s = j["seeds"];
            c.seeds.clear();
            if (s.is_object())
            {
                auto first = s.at("first").get<std::uint64_t>();
                auto count = s.at("count").get<std::uint64_t>();
                for (std::uint64_t i = 0; i < count; ++i)
                    c.seeds.push_back(first + i);
            }
            else
                c.seeds = s.get<std::vector<std::uint64_t>>();
        }
        auto optional_number = [&](const char *key, auto &out) {
            if (j.contains(key) && !j[key].is_null())
                out = j[key].get<std::decay_t<decltype(out)>>();
        };
        optional_number("processors", c.processors);
        optional_number("max_time", c.max_time);
        optional_number("max_evaluations", c.max_evaluations);
        optional_number("evaluation_factor", c.evaluation_factor);
        optional_number("stagnation", c.stagnation);
        if (j.contains("target"))
            c.target = j["target"].is_null() ? std::nullopt : std::optional<double>(j["target"].get<double>());
        optional_number("charge_noop_evals", c.charge_noop_evals);
        if (j.contains("search"))
            c.mode = parse_search_mode(j["search"].get<std::string>());
        optional_number("base", c.base);
        optional_number("min_pop", c.min_pop);
        optional_number("max_pop", c.max_pop);
        optional_number("step", c.step);
        optional_number("max_search_evaluations", c.budget.max_total_evaluations);
        optional_number("wall_seconds", c.budget.wall_seconds);
        optional_number("jobs", c.jobs);
        optional_number("alpha", c.alpha);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw UsageError(std::string("malformed experiment config: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string &path, ExperimentConfig base = {})
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open experiment config '" + path + "'");
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw UsageError("cannot parse experiment config '" + path + "': " + e.what());
    }
    return config_from_json(j, std::move(base));
}

inline nlohmann::json summary_json(const ExperimentConfig &config, const ExperimentResult &result)
{
    nlohmann::json j;
    j["config"] = config_to_json(config);
    auto &aggs = j["aggregates"] = nlohmann::json::array();
    for (const auto &r : result.aggregates)
        aggs.push_back({{"algorithm", r.algorithm},
                        {"problem", r.problem},
                        {"ratio", r.ratio.to_string()},
                        {"seeds", r.seeds},
                        {"failures", r.failures},
                        {"pop_size", quartiles_json(r.pop_excluding_failures)},
                        {"pop_size_failures_at_max", quartiles_json(r.pop_failures_at_max)},
                        {"simulated_time", quartiles_json(r.time_excluding_failures)}});
    auto &tests = j["comparisons"] = nlohmann::json::array();
    for (const auto &c : result.comparisons)
        tests.push_back({{"algorithm", c.algorithm},
                         {"problem", c.problem},
                         {"ratio_a", c.a.to_string()},
                         {"ratio_b", c.b.to_string()},
                         {"u", c.u},
                         {"p", c.p},
                         {"reject", c.reject}});
    auto &cells = j["cells"] = nlohmann::json::array();
    for (const auto &c : result.cells)
    {
        nlohmann::json trace = nlohmann::json::array();
        for (const auto &t : c.trace)
            trace.push_back({{"pop_size", t.population_size},
                             {"success", t.outcome.success},
                             {"simulated_time", t.outcome.simulated_time},
                             {"evaluations", t.outcome.evaluations}});
        nlohmann::json cell = {{"algorithm", c.algorithm},
                               {"problem", c.problem},
                               {"ratio", c.ratio.to_string()},
                               {"seed", c.seed},
                               {"pop_size", c.failed() ? nlohmann::json("FAILED") : nlohmann::json(*c.population_size)},
                               {"max_probed", c.max_probed},
                               {"truncated", c.truncated},
                               {"trace", trace}};
        if (!c.error.empty())
            cell["error"] = c.error;
        cells.push_back(std::move(cell));
    }
    return j;
}

} // namespace aeasim
