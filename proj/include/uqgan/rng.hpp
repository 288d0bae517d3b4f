// Deterministic RNG streams.
//
// Every consumer of randomness (data shuffling, parameter init, GAN noise,
// dropout, ...) gets its own named substream derived from the experiment seed,
// so adding draws to one consumer never perturbs another.  This is what makes
// the GAN-disabled baseline trajectory bit-identical to the degenerate UQGAN
// configuration: both consume exactly the same data/init streams.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace uqgan {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable 64-bit hash of a role name (FNV-1a), mixed with the seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view role) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : role) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ splitmix64(h));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    Rng(std::uint64_t seed, std::string_view role) : eng_(substream_seed(seed, role)) {}

    std::mt19937_64& engine() { return eng_; }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    double normal(double mu = 0.0, double sd = 1.0) {
        return std::normal_distribution<double>(mu, sd)(eng_);
    }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return std::uniform_int_distribution<int>(lo, hi)(eng_);
    }

    Eigen::MatrixXd uniform_mat(Eigen::Index r, Eigen::Index c, double lo, double hi) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(lo, hi);
        return m;
    }
    Eigen::MatrixXd normal_mat(Eigen::Index r, Eigen::Index c, double mu = 0.0,
                               double sd = 1.0) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(mu, sd);
        return m;
    }

    // Fisher-Yates shuffle with this engine (std::shuffle is unspecified
    // across standard libraries; this is pinned).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(eng_);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace uqgan
