#pragma once

// Algorithm identifiers (`ga.async.ss.ux`, `ecga.sync.gen`, `gomea.ai`, ...)
// and a single-run entry point that wires problem, algorithm, simulator and
// termination together.

#include "core.hpp"
#include "ecga.hpp"
#include "engine.hpp"
#include "ga.hpp"
#include "gomea.hpp"
#include "problems.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace aeasim
{

enum class Family
{
    ga,
    ecga,
    gomea
};

struct AlgorithmSpec
{
    Family family = Family::ga;
    Scheme scheme = Scheme::asynchronous;
    SelectionScheme selection = SelectionScheme::steady_state;
    CrossoverKind crossover = CrossoverKind::uniform;
    GomeaVariant variant = GomeaVariant::synchronous;

    static std::vector<std::string> all_ids()
    {
        std::vector<std::string> ids;
        for (const char *scheme : {"sync", "async"})
            for (const char *sel : {"ss", "gen"})
                for (const char *cx : {"ux", "tpx", "sfx"})
                    ids.push_back(std::string("ga.") + scheme + "." + sel + "." + cx);
        for (const char *scheme : {"sync", "async"})
            for (const char *sel : {"ss", "gen"})
                ids.push_back(std::string("ecga.") + scheme + "." + sel);
        for (const char *v : {"sync", "ae", "ai"})
            ids.push_back(std::string("gomea.") + v);
        return ids;
    }

    static AlgorithmSpec parse(std::string_view id)
    {
        std::vector<std::string_view> parts;
        std::string_view rest = id;
        while (true)
        {
            auto dot = rest.find('.');
            parts.push_back(rest.substr(0, dot));
            if (dot == std::string_view::npos)
                break;
            rest.remove_prefix(dot + 1);
        }
        auto fail = [&]() -> AlgorithmSpec {
            std::string msg = "unknown algorithm '" + std::string(id) + "'; valid options:";
            for (const auto &s : all_ids())
                msg += " " + s;
            throw UsageError(msg);
        };
        auto parse_scheme = [&](std::string_view s, Scheme &out) {
            if (s == "sync")
                out = Scheme::synchronous;
            else if (s == "async")
                out = Scheme::asynchronous;
            else
                return false;
            return true;
        };
        auto parse_selection = [&](std::string_view s, SelectionScheme &out) {
            if (s == "ss")
                out = SelectionScheme::steady_state;
            else if (s == "gen")
                out = SelectionScheme::generational;
            else
                return false;
            return true;
        };

        AlgorithmSpec spec;
        if (parts[0] == "ga" && parts.size() == 4)
        {
            spec.family = Family::ga;
            if (!parse_scheme(parts[1], spec.scheme) || !parse_selection(parts[2], spec.selection))
                return fail();
            if (parts[3] == "ux")
                spec.crossover = CrossoverKind::uniform;
            else if (parts[3] == "tpx")
                spec.crossover = CrossoverKind::two_point;
            else if (parts[3] == "sfx")
                spec.crossover = CrossoverKind::subfunction;
            else
                return fail();
            return spec;
        }
        if (parts[0] == "ecga" && parts.size() == 3)
        {
            spec.family = Family::ecga;
            if (!parse_scheme(parts[1], spec.scheme) || !parse_selection(parts[2], spec.selection))
                return fail();
            return spec;
        }
        if (parts[0] == "gomea" && parts.size() == 2)
        {
            spec.family = Family::gomea;
            if (parts[1] == "sync")
            {
                spec.variant = GomeaVariant::synchronous;
                spec.scheme = Scheme::synchronous;
            }
            else if (parts[1] == "ae")
            {
                spec.variant = GomeaVariant::async_end;
                spec.scheme = Scheme::asynchronous;
            }
            else if (parts[1] == "ai")
            {
                spec.variant = GomeaVariant::async_intermediate;
                spec.scheme = Scheme::asynchronous;
            }
            else
                return fail();
            return spec;
        }
        return fail();
    }

    std::string id() const
    {
        switch (family)
        {
        case Family::ga: {
            std::string s = scheme == Scheme::synchronous ? "ga.sync." : "ga.async.";
            s += selection == SelectionScheme::steady_state ? "ss." : "gen.";
            s += crossover == CrossoverKind::uniform ? "ux" : crossover == CrossoverKind::two_point ? "tpx" : "sfx";
            return s;
        }
        case Family::ecga: {
            std::string s = scheme == Scheme::synchronous ? "ecga.sync." : "ecga.async.";
            return s + (selection == SelectionScheme::steady_state ? "ss" : "gen");
        }
        case Family::gomea:
            return variant == GomeaVariant::synchronous ? "gomea.sync"
                   : variant == GomeaVariant::async_end ? "gomea.ae"
                                                        : "gomea.ai";
        }
        return "unknown";
    }
};

struct RunConfig
{
    AlgorithmSpec algorithm;
    std::size_t population_size = 8;
    // 0 means one processor per population member.
    std::size_t processors = 0;
    std::uint64_t seed = 0;
    // The target defaults to the problem's optimum value when unset.
    TerminationConfig termination;
    bool record_events = false;
    bool charge_noop_evals = false;
    bool record_models = false;
};

struct RunResult
{
    RunStats stats;
    bool success = false;
    std::vector<EventRecord> events;
    // Learned model partitions per refresh (ECGA / GOMEA, when requested).
    std::vector<Partition> models;
};

inline void validate_population_size(std::size_t population_size)
{
    if (population_size < 4 || population_size % 2 != 0)
        throw UsageError("population size must be even and at least 4 (got " + std::to_string(population_size) +
                         ")");
}

inline std::unique_ptr<Algorithm> make_algorithm(const ProblemInstance &problem, const RunConfig &config)
{
    const auto &spec = config.algorithm;
    switch (spec.family)
    {
    case Family::ga:
        return std::make_unique<GeneticAlgorithm>(
            problem, GaConfig{spec.scheme, spec.selection, spec.crossover, config.population_size, config.seed});
    case Family::ecga:
        return std::make_unique<Ecga>(problem, EcgaConfig{spec.scheme, spec.selection, config.population_size,
                                                          config.seed, config.record_models});
    case Family::gomea:
        return std::make_unique<Gomea>(problem,
                                       GomeaConfig{spec.variant, config.population_size, config.seed,
                                                   GomOptions{config.charge_noop_evals}, config.record_models});
    }
    throw UsageError("unknown algorithm family");
}

inline RunResult run_once(const ProblemInstance &problem, const RunConfig &config)
{
    validate_population_size(config.population_size);
    auto algorithm = make_algorithm(problem, config);
    const std::size_t processors = config.processors == 0 ? config.population_size : config.processors;
    Simulator sim(problem, processors, config.seed, config.record_events);

    TerminationConfig term = config.termination;
    if (!term.target)
        term.target = problem.target_value();

    RunResult result;
    result.stats = config.algorithm.scheme == Scheme::synchronous ? run_synchronous(*algorithm, sim, term)
                                                                  : run_asynchronous(*algorithm, sim, term);
    result.success = result.stats.best_fitness >= *term.target;
    if (config.record_events)
        result.events = sim.event_log();
    if (config.record_models)
    {
        if (auto *ecga = dynamic_cast<Ecga *>(algorithm.get()))
            result.models = ecga->model_history();
        else if (auto *gomea = dynamic_cast<Gomea *>(algorithm.get()))
            for (const auto &fos : gomea->model_history())
                result.models.push_back(fos.subsets);
    }
    return result;
}

} // namespace aeasim
