#pragma once

// Shared domain types: genotypes, individuals, populations and the seeded
// random source every simulated component draws from.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aeasim
{

// Raised for invalid inputs at API boundaries (mismatched lengths, bad
// dimensions, malformed configuration strings).
class UsageError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// RandomSource
// ---------------------------------------------------------------------------

namespace detail
{
constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
} // namespace detail

// Counter-based generator. Draw i of a stream is a pure function of
// (key, i), so results are identical on every platform and independent
// streams can be split off by (seed, tag, index) without sharing state.
class RandomSource
{
  public:
    using result_type = std::uint64_t;

    explicit RandomSource(std::uint64_t seed = 0, std::uint64_t stream = 0) :
        key_(detail::mix64(detail::mix64(seed + detail::golden_gamma) ^ (stream * 0xD1B54A32D192ED03ULL)))
    {
    }

    static constexpr result_type min()
    {
        return 0;
    }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()()
    {
        ++counter_;
        std::uint64_t z = detail::mix64(key_ + counter_ * detail::golden_gamma);
        return detail::mix64(z ^ (key_ >> 17) ^ (key_ << 47));
    }

    // Child stream; does not advance this one.
    RandomSource derive(std::uint64_t tag, std::uint64_t index = 0) const
    {
        RandomSource child;
        child.key_ = detail::mix64(key_ ^ detail::mix64(tag * detail::golden_gamma + 0x632BE59BD9B4E019ULL) ^
                                   detail::mix64(index + 0x8CB92BA72F3D8DD7ULL));
        return child;
    }

    // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n)
    {
        if (n == 0)
            throw UsageError("RandomSource::below: empty range");
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n)
        {
            std::uint64_t threshold = (0 - n) % n;
            while (low < threshold)
            {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform real in [0, 1) with 53 bits of resolution.
    double uniform01()
    {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    bool coin()
    {
        return ((*this)() >> 63) != 0;
    }

    // Fisher-Yates; std::shuffle is not specified bit-for-bit across libraries.
    template <typename Range>
    void shuffle(Range &range)
    {
        auto first = std::begin(range);
        auto n = static_cast<std::uint64_t>(std::size(range));
        for (std::uint64_t i = n; i > 1; --i)
        {
            auto j = below(i);
            using std::swap;
            swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
        }
    }

    std::uint64_t draws() const
    {
        return counter_;
    }

  private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Genotype
// ---------------------------------------------------------------------------

// Fixed-length bitstring. One byte per position; positions hold 0 or 1.
class Genotype
{
  public:
    Genotype() = default;
    explicit Genotype(std::size_t length, std::uint8_t fill = 0) : bits_(length, fill)
    {
        if (fill > 1)
            throw UsageError("Genotype: bits must be 0 or 1");
    }
    Genotype(std::initializer_list<int> bits)
    {
        bits_.reserve(bits.size());
        for (int b : bits)
        {
            if (b != 0 && b != 1)
                throw UsageError("Genotype: bits must be 0 or 1");
            bits_.push_back(static_cast<std::uint8_t>(b));
        }
    }

    // Parses a string of '0'/'1' characters.
    static Genotype from_string(std::string_view text)
    {
        Genotype g(text.size());
        for (std::size_t i = 0; i < text.size(); ++i)
        {
            if (text[i] != '0' && text[i] != '1')
                throw UsageError("Genotype: expected only '0' and '1' characters");
            g.bits_[i] = static_cast<std::uint8_t>(text[i] - '0');
        }
        return g;
    }

    static Genotype random(std::size_t length, RandomSource &rng)
    {
        Genotype g(length);
        for (std::size_t i = 0; i < length; i += 64)
        {
            std::uint64_t word = rng();
            for (std::size_t j = i; j < std::min(length, i + 64); ++j)
            {
                g.bits_[j] = static_cast<std::uint8_t>(word & 1U);
                word >>= 1;
            }
        }
        return g;
    }

    std::size_t size() const
    {
        return bits_.size();
    }
    bool empty() const
    {
        return bits_.empty();
    }

    std::uint8_t operator[](std::size_t i) const
    {
        return bits_[i];
    }
    void set(std::size_t i, std::uint8_t bit)
    {
        bits_[i] = bit & 1U;
    }
    void flip(std::size_t i)
    {
        bits_[i] ^= 1U;
    }

    std::span<const std::uint8_t> bits() const
    {
        return bits_;
    }

    Genotype complement() const
    {
        Genotype g = *this;
        for (auto &b : g.bits_)
            b ^= 1U;
        return g;
    }

    std::string to_string() const
    {
        std::string s(bits_.size(), '0');
        for (std::size_t i = 0; i < bits_.size(); ++i)
            s[i] = static_cast<char>('0' + bits_[i]);
        return s;
    }

    friend bool operator==(const Genotype &, const Genotype &) = default;

  private:
    std::vector<std::uint8_t> bits_;
};

inline std::size_t hamming_distance(const Genotype &a, const Genotype &b)
{
    if (a.size() != b.size())
        throw UsageError("hamming distance: genotype lengths differ");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d += (a[i] != b[i]) ? 1 : 0;
    return d;
}

// Fraction of differing positions, in [0, 1].
inline double hamming_normalized(const Genotype &a, const Genotype &b)
{
    auto d = hamming_distance(a, b);
    if (a.size() == 0)
        return 0.0;
    return static_cast<double>(d) / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Individual / Population
// ---------------------------------------------------------------------------

inline constexpr double unevaluated_fitness = -std::numeric_limits<double>::infinity();

struct Individual
{
    Genotype genotype;
    double fitness = unevaluated_fitness;
    double eval_time = 0.0;

    bool evaluated() const
    {
        return fitness != unevaluated_fitness;
    }
};

// Fixed-size population. Slots start empty and are filled in order by
// initialization; every write goes through set() so the per-locus
// one-counts stay current and converged() is O(length).
class Population
{
  public:
    Population() = default;

    Population(std::size_t size, std::size_t length) :
        members_(size), filled_(size, false), ones_(length, 0), length_(length)
    {
    }

    explicit Population(std::vector<Individual> members)
    {
        if (members.empty())
            throw UsageError("Population: empty member list");
        length_ = members.front().genotype.size();
        ones_.assign(length_, 0);
        members_.resize(members.size());
        filled_.assign(members.size(), false);
        for (std::size_t i = 0; i < members.size(); ++i)
            set(i, std::move(members[i]));
    }

    static Population from_genotypes(std::initializer_list<std::string_view> genotypes)
    {
        std::vector<Individual> m;
        for (auto g : genotypes)
            m.push_back(Individual{Genotype::from_string(g)});
        return Population(std::move(m));
    }

    std::size_t size() const
    {
        return members_.size();
    }
    std::size_t length() const
    {
        return length_;
    }
    std::size_t filled_count() const
    {
        return filled_count_;
    }
    bool full() const
    {
        return filled_count_ == members_.size();
    }
    bool is_filled(std::size_t i) const
    {
        return filled_[i];
    }

    const Individual &operator[](std::size_t i) const
    {
        return members_[i];
    }
    std::span<const Individual> members() const
    {
        return members_;
    }

    void set(std::size_t i, Individual ind)
    {
        if (ind.genotype.size() != length_)
            throw UsageError("Population::set: genotype length mismatch");
        if (filled_[i])
        {
            const auto &old = members_[i].genotype;
            for (std::size_t k = 0; k < length_; ++k)
                ones_[k] -= old[k];
        }
        else
        {
            filled_[i] = true;
            ++filled_count_;
        }
        for (std::size_t k = 0; k < length_; ++k)
            ones_[k] += ind.genotype[k];
        members_[i] = std::move(ind);
    }

    // Fitness-only update; genotype untouched.
    void set_fitness(std::size_t i, double fitness, double eval_time)
    {
        members_[i].fitness = fitness;
        members_[i].eval_time = eval_time;
    }

    // True iff every slot is filled and all genotypes are identical.
    bool converged() const
    {
        if (members_.empty())
            throw UsageError("Population::converged: empty population");
        if (!full())
            return false;
        auto n = static_cast<std::uint32_t>(members_.size());
        return std::all_of(ones_.begin(), ones_.end(), [n](std::uint32_t c) { return c == 0 || c == n; });
    }

    double mean_fitness() const
    {
        double sum = 0.0;
        for (const auto &m : members_)
            sum += m.fitness;
        return sum / static_cast<double>(members_.size());
    }

  private:
    std::vector<Individual> members_;
    std::vector<bool> filled_;
    std::vector<std::uint32_t> ones_;
    std::size_t length_ = 0;
    std::size_t filled_count_ = 0;
};

inline bool population_converged(const Population &p)
{
    return p.converged();
}

} // namespace aeasim
