#pragma once

// Benchmark fitness functions (concatenated deceptive trap, adjacent
// NK-landscapes) and the genotype-dependent evaluation-time model.

#include "core.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace aeasim
{

using Partition = std::vector<std::vector<std::size_t>>;

struct Evaluation
{
    double fitness = 0.0;
    double time = 0.0;
};

// ---------------------------------------------------------------------------
// Evaluation time
// ---------------------------------------------------------------------------

// Endpoints of the time model: `a` is the cost of the optimum's complement,
// `b` the cost of the optimum itself. Written a:b.
struct TimeRatio
{
    double a = 1.0;
    double b = 1.0;

    static TimeRatio parse(std::string_view text)
    {
        auto colon = text.find(':');
        if (colon == std::string_view::npos)
            throw UsageError("malformed ratio '" + std::string(text) + "': expected a:b");
        auto to_double = [&](std::string_view part) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
            if (ec != std::errc() || ptr != part.data() + part.size())
                throw UsageError("malformed ratio '" + std::string(text) + "': components must be numbers");
            return v;
        };
        TimeRatio r{to_double(text.substr(0, colon)), to_double(text.substr(colon + 1))};
        if (!(r.a > 0.0) || !(r.b > 0.0))
            throw UsageError("malformed ratio '" + std::string(text) + "': components must be positive");
        return r;
    }

    std::string to_string() const
    {
        auto fmt = [](double v) {
            std::ostringstream os;
            os << v;
            return os.str();
        };
        return fmt(a) + ":" + fmt(b);
    }

    friend bool operator==(const TimeRatio &, const TimeRatio &) = default;
};

// The seven settings from cheap optimum (100:1) to expensive optimum (1:100).
inline std::vector<TimeRatio> paper_ratios()
{
    return {{100, 1}, {10, 1}, {2, 1}, {1, 1}, {1, 2}, {1, 10}, {1, 100}};
}

// E(s) = H(s, s*) a + (1 - H(s, s*)) b, affine in normalized Hamming distance.
class TimeModel
{
  public:
    TimeModel() = default;
    TimeModel(double a, double b, Genotype optimum) : a_(a), b_(b), optimum_(std::move(optimum))
    {
        if (!(a > 0.0) || !(b > 0.0))
            throw UsageError("TimeModel: a and b must be positive");
    }

    double operator()(const Genotype &g) const
    {
        double h = hamming_normalized(g, optimum_);
        return h * a_ + (1.0 - h) * b_;
    }

    double a() const
    {
        return a_;
    }
    double b() const
    {
        return b_;
    }
    const Genotype &optimum() const
    {
        return optimum_;
    }

  private:
    double a_ = 1.0;
    double b_ = 1.0;
    Genotype optimum_;
};

inline TimeModel make_time_model(TimeRatio ratio, Genotype optimum)
{
    return TimeModel(ratio.a, ratio.b, std::move(optimum));
}

// ---------------------------------------------------------------------------
// Deceptive trap
// ---------------------------------------------------------------------------

// Trap value of a block with unitation u: k at u = k, k - u - 1 otherwise.
inline double dt_block(int u, int k = 5)
{
    if (k < 1 || u < 0 || u > k)
        throw UsageError("dt_block: unitation out of range");
    return u == k ? static_cast<double>(k) : static_cast<double>(k - u - 1);
}

class DeceptiveTrap
{
  public:
    DeceptiveTrap(std::size_t n_blocks, std::size_t k) : n_blocks_(n_blocks), k_(k)
    {
        if (n_blocks == 0 || k == 0)
            throw UsageError("DeceptiveTrap: n and k must be positive");
    }

    std::size_t length() const
    {
        return n_blocks_ * k_;
    }
    std::size_t n_blocks() const
    {
        return n_blocks_;
    }
    std::size_t k() const
    {
        return k_;
    }

    double fitness(const Genotype &g) const
    {
        if (g.size() != length())
            throw UsageError("DeceptiveTrap: genotype length mismatch");
        double total = 0.0;
        auto bits = g.bits();
        for (std::size_t b = 0; b < n_blocks_; ++b)
        {
            int u = 0;
            for (std::size_t i = b * k_; i < (b + 1) * k_; ++i)
                u += bits[i];
            int k = static_cast<int>(k_);
            total += u == k ? k : k - u - 1;
        }
        return total;
    }

    Genotype optimum() const
    {
        return Genotype(length(), 1);
    }

    double optimum_value() const
    {
        return static_cast<double>(length());
    }

    Partition subfunctions() const
    {
        Partition p(n_blocks_);
        for (std::size_t b = 0; b < n_blocks_; ++b)
            for (std::size_t i = 0; i < k_; ++i)
                p[b].push_back(b * k_ + i);
        return p;
    }

  private:
    std::size_t n_blocks_;
    std::size_t k_;
};

// ---------------------------------------------------------------------------
// Adjacent NK-landscape
// ---------------------------------------------------------------------------

class AnklProblem
{
  public:
    // Tables are indexed by the block's bits read left to right, first bit
    // most significant.
    AnklProblem(std::size_t n, std::size_t k, std::size_t stride, std::uint64_t seed,
                std::vector<std::vector<double>> tables) :
        n_(n), k_(k), stride_(stride), seed_(seed), tables_(std::move(tables))
    {
        validate_dimensions(n, k, stride);
        if (tables_.size() != n_)
            throw UsageError("AnklProblem: expected one table per block");
        for (const auto &t : tables_)
        {
            if (t.size() != (std::size_t{1} << k_))
                throw UsageError("AnklProblem: table size must be 2^k");
            for (double v : t)
                if (!(v >= 0.0 && v <= 1.0))
                    throw UsageError("AnklProblem: table entries must lie in [0,1]");
        }
        solve_optimum();
    }

    static void validate_dimensions(std::size_t n, std::size_t k, std::size_t stride)
    {
        if (n < 1 || k < 1 || stride < 1 || stride > k)
            throw UsageError("ANKL: require n >= 1, k >= 1 and 1 <= stride <= k");
        if (k > 20)
            throw UsageError("ANKL: block size above 20 is not supported");
    }

    // Entries drawn uniformly from [0,1) in block-major, index-minor order.
    static AnklProblem generate(std::size_t n, std::size_t k, std::size_t stride, std::uint64_t seed)
    {
        validate_dimensions(n, k, stride);
        RandomSource rng(seed, 0x414E4B4CULL);
        std::vector<std::vector<double>> tables(n, std::vector<double>(std::size_t{1} << k));
        for (auto &t : tables)
            for (auto &v : t)
                v = rng.uniform01();
        return AnklProblem(n, k, stride, seed, std::move(tables));
    }

    std::size_t length() const
    {
        return stride_ * n_ + k_ - 1;
    }
    std::size_t n_blocks() const
    {
        return n_;
    }
    std::size_t k() const
    {
        return k_;
    }
    std::size_t stride() const
    {
        return stride_;
    }
    std::uint64_t seed() const
    {
        return seed_;
    }
    const std::vector<std::vector<double>> &tables() const
    {
        return tables_;
    }

    std::size_t block_index(const Genotype &g, std::size_t block) const
    {
        std::size_t idx = 0;
        for (std::size_t j = 0; j < k_; ++j)
            idx = (idx << 1) | g[block * stride_ + j];
        return idx;
    }

    double fitness(const Genotype &g) const
    {
        if (g.size() != length())
            throw UsageError("AnklProblem: genotype length mismatch");
        double total = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            total += tables_[i][block_index(g, i)];
        return total;
    }

    const Genotype &optimum() const
    {
        return optimum_;
    }
    // Equal to fitness(optimum()); the same summation order is used.
    double optimum_value() const
    {
        return optimum_value_;
    }

    // Disjoint cover used by subfunction crossover: stride-aligned chunks
    // [s i, s i + s) for each block plus the trailing tail [s n, l).
    Partition subfunctions() const
    {
        Partition p;
        for (std::size_t i = 0; i < n_; ++i)
        {
            std::vector<std::size_t> chunk;
            for (std::size_t j = 0; j < stride_; ++j)
                chunk.push_back(i * stride_ + j);
            p.push_back(std::move(chunk));
        }
        std::vector<std::size_t> tail;
        for (std::size_t pos = stride_ * n_; pos < length(); ++pos)
            tail.push_back(pos);
        if (!tail.empty())
            p.push_back(std::move(tail));
        return p;
    }

  private:
    // Left-to-right dynamic program over the chain of blocks. The state is
    // the k - stride bits shared between block i and block i + 1.
    void solve_optimum()
    {
        const std::size_t overlap = k_ - stride_;
        const std::size_t n_states = std::size_t{1} << overlap;
        const std::size_t state_mask = n_states - 1;
        const std::size_t n_new = std::size_t{1} << stride_;
        constexpr double none = -std::numeric_limits<double>::infinity();

        std::vector<double> best(n_states, none);
        // choice[i][state] = full k-bit configuration of block i ending in state.
        std::vector<std::vector<std::size_t>> choice(n_, std::vector<std::size_t>(n_states, 0));

        for (std::size_t cfg = 0; cfg < (std::size_t{1} << k_); ++cfg)
        {
            std::size_t state = cfg & state_mask;
            double v = tables_[0][cfg];
            if (v > best[state])
            {
                best[state] = v;
                choice[0][state] = cfg;
            }
        }
        for (std::size_t i = 1; i < n_; ++i)
        {
            std::vector<double> next(n_states, none);
            for (std::size_t prev = 0; prev < n_states; ++prev)
            {
                if (best[prev] == none)
                    continue;
                for (std::size_t add = 0; add < n_new; ++add)
                {
                    std::size_t cfg = (prev << stride_) | add;
                    std::size_t state = cfg & state_mask;
                    double v = best[prev] + tables_[i][cfg];
                    if (v > next[state])
                    {
                        next[state] = v;
                        choice[i][state] = cfg;
                    }
                }
            }
            best = std::move(next);
        }

        std::size_t state = 0;
        for (std::size_t s = 1; s < n_states; ++s)
            if (best[s] > best[state])
                state = s;

        optimum_ = Genotype(length());
        for (std::size_t i = n_; i-- > 0;)
        {
            std::size_t cfg = choice[i][state];
            for (std::size_t j = 0; j < k_; ++j)
                optimum_.set(i * stride_ + j, static_cast<std::uint8_t>((cfg >> (k_ - 1 - j)) & 1U));
            state = cfg >> stride_;
        }
        optimum_value_ = fitness(optimum_);
    }

    std::size_t n_;
    std::size_t k_;
    std::size_t stride_;
    std::uint64_t seed_;
    std::vector<std::vector<double>> tables_;
    Genotype optimum_;
    double optimum_value_ = 0.0;
};

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

class ProblemInstance
{
  public:
    using Function = std::variant<DeceptiveTrap, AnklProblem>;

    ProblemInstance(Function fn, TimeRatio ratio) : fn_(std::move(fn)), ratio_(ratio)
    {
        std::visit(
            [&](const auto &f) {
                target_ = f.optimum_value();
                time_ = make_time_model(ratio, Genotype(f.optimum()));
                partition_ = f.subfunctions();
                length_ = f.length();
            },
            fn_);
    }

    Evaluation evaluate(const Genotype &g) const
    {
        if (g.size() != length_)
            throw UsageError("evaluate: genotype length mismatch");
        double f = std::visit([&](const auto &fn) { return fn.fitness(g); }, fn_);
        return {f, time_(g)};
    }

    double fitness(const Genotype &g) const
    {
        return std::visit([&](const auto &fn) { return fn.fitness(g); }, fn_);
    }

    std::size_t length() const
    {
        return length_;
    }
    double target_value() const
    {
        return target_;
    }
    const TimeModel &time_model() const
    {
        return time_;
    }
    TimeRatio ratio() const
    {
        return ratio_;
    }
    const Partition &subfunction_partition() const
    {
        return partition_;
    }
    const Function &function() const
    {
        return fn_;
    }

    // Same function, different time ratio.
    ProblemInstance with_ratio(TimeRatio ratio) const
    {
        return ProblemInstance(fn_, ratio);
    }

    std::string name() const
    {
        if (const auto *dt = std::get_if<DeceptiveTrap>(&fn_))
            return "dt:l=" + std::to_string(dt->length()) + ",k=" + std::to_string(dt->k());
        const auto &nk = std::get<AnklProblem>(fn_);
        return "ankl:l=" + std::to_string(nk.length()) + ",k=" + std::to_string(nk.k()) +
               ",stride=" + std::to_string(nk.stride()) + ",seed=" + std::to_string(nk.seed());
    }

  private:
    Function fn_;
    TimeRatio ratio_;
    TimeModel time_;
    double target_ = 0.0;
    Partition partition_;
    std::size_t length_ = 0;
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json function_to_json(const ProblemInstance::Function &fn)
{
    nlohmann::json j;
    if (const auto *dt = std::get_if<DeceptiveTrap>(&fn))
    {
        j["type"] = "dt";
        j["n"] = dt->n_blocks();
        j["k"] = dt->k();
        j["length"] = dt->length();
        j["optimum"] = dt->optimum().to_string();
        j["target"] = dt->optimum_value();
        return j;
    }
    const auto &nk = std::get<AnklProblem>(fn);
    j["type"] = "ankl";
    j["n"] = nk.n_blocks();
    j["k"] = nk.k();
    j["stride"] = nk.stride();
    j["seed"] = nk.seed();
    j["length"] = nk.length();
    j["tables"] = nk.tables();
    j["optimum"] = nk.optimum().to_string();
    j["target"] = nk.optimum_value();
    return j;
}

inline ProblemInstance::Function function_from_json(const nlohmann::json &j)
{
    auto type = j.at("type").get<std::string>();
    if (type == "dt")
        return DeceptiveTrap(j.at("n").get<std::size_t>(), j.at("k").get<std::size_t>());
    if (type == "ankl")
    {
        AnklProblem p(j.at("n").get<std::size_t>(), j.at("k").get<std::size_t>(), j.at("stride").get<std::size_t>(),
                      j.at("seed").get<std::uint64_t>(), j.at("tables").get<std::vector<std::vector<double>>>());
        if (j.contains("target") && j.at("target").get<double>() != p.optimum_value())
            throw UsageError("ANKL instance: stored target does not match the recomputed optimum");
        return p;
    }
    throw UsageError("unknown problem type '" + type + "' (valid: dt, ankl)");
}

namespace detail
{
inline std::map<std::string, std::string> parse_key_values(std::string_view text, std::string_view context)
{
    std::map<std::string, std::string> kv;
    while (!text.empty())
    {
        auto comma = text.find(',');
        auto item = text.substr(0, comma);
        auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw UsageError("malformed problem option '" + std::string(item) + "' in '" + std::string(context) +
                             "': expected key=value");
        kv[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
        if (comma == std::string_view::npos)
            break;
        text.remove_prefix(comma + 1);
    }
    return kv;
}

inline std::uint64_t parse_uint(const std::string &value, std::string_view key)
{
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw UsageError("problem option '" + std::string(key) + "' must be a nonnegative integer");
    return v;
}
} // namespace detail

// Accepts `dt:l=50,k=5`, `ankl:l=40,k=5,stride=2,seed=1` (or n= instead of
// l=), or a path to a JSON document written by function_to_json.
inline ProblemInstance::Function parse_problem(std::string_view spec)
{
    auto colon = spec.find(':');
    std::string_view kind = spec.substr(0, colon);
    std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);

    if (kind == "dt" || kind == "ankl")
    {
        auto kv = detail::parse_key_values(rest, spec);
        auto get = [&](const std::string &key, std::optional<std::uint64_t> fallback) -> std::uint64_t {
            auto it = kv.find(key);
            if (it == kv.end())
            {
                if (!fallback)
                    throw UsageError("problem '" + std::string(spec) + "' is missing option '" + key + "'");
                return *fallback;
            }
            return detail::parse_uint(it->second, key);
        };
        std::size_t k = get("k", 5);
        if (k == 0)
            throw UsageError("problem option k must be positive");
        if (kind == "dt")
        {
            for (const auto &[key, _] : kv)
                if (key != "l" && key != "k" && key != "n")
                    throw UsageError("unknown dt option '" + key + "' (valid: l, n, k)");
            std::size_t n = 0;
            if (kv.contains("n"))
                n = get("n", std::nullopt);
            else
            {
                std::size_t l = get("l", std::nullopt);
                if (l % k != 0)
                    throw UsageError("dt: l must be a multiple of k");
                n = l / k;
            }
            return DeceptiveTrap(n, k);
        }
        for (const auto &[key, _] : kv)
            if (key != "l" && key != "k" && key != "n" && key != "stride" && key != "seed")
                throw UsageError("unknown ankl option '" + key + "' (valid: l, n, k, stride, seed)");
        std::size_t stride = get("stride", 2);
        std::uint64_t seed = get("seed", 0);
        std::size_t n = 0;
        if (kv.contains("n"))
            n = get("n", std::nullopt);
        else
        {
            std::size_t l = get("l", std::nullopt);
            if (stride == 0 || l + 1 < k || (l + 1 - k) % stride != 0)
                throw UsageError("ankl: l must equal stride * n + k - 1");
            n = (l + 1 - k) / stride;
        }
        return AnklProblem::generate(n, k, stride, seed);
    }

    std::ifstream in{std::string(spec)};
    if (!in)
        throw UsageError("unknown problem '" + std::string(spec) +
                         "' (valid: dt:l=<l>,k=<k> | ankl:l=<l>,k=<k>,stride=<s>,seed=<seed> | path to instance JSON)");
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw UsageError("problem file '" + std::string(spec) + "' is not valid JSON: " + e.what());
    }
    return function_from_json(j);
}

} // namespace aeasim
