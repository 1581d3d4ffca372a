// Counter-based pseudo-random streams.
//
// Every stream is keyed by (seed, scenario tag, group index, purpose tag) and
// produces the SplitMix64 output sequence for that key, so draws depend only
// on the key and the position within the stream: adding groups, scenarios or
// extra consumers never shifts existing draws.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace otgp {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL)
{
    for (const char ch : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace detail

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::string_view scenario, std::uint64_t group,
                 std::string_view purpose)
    {
        std::uint64_t h = detail::splitmix64(seed);
        h = detail::splitmix64(h ^ detail::fnv1a(scenario));
        h = detail::splitmix64(h ^ group);
        key_ = detail::splitmix64(h ^ detail::fnv1a(purpose));
    }

    std::uint64_t next_u64() { return detail::splitmix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

    /// Uniform draw on the open interval (0, 1).
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal()
    {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Eigen::VectorXd normal_vector(Eigen::Index d)
    {
        Eigen::VectorXd v(d);
        for (Eigen::Index i = 0; i < d; ++i)
            v(i) = normal();
        return v;
    }

    /// Uniform draw on the unit sphere in R^d.
    Eigen::VectorXd sphere_direction(Eigen::Index d)
    {
        Eigen::VectorXd v = normal_vector(d);
        while (v.norm() < 1e-12)
            v = normal_vector(d);
        return v / v.norm();
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace otgp
