#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "avcqc/common.hpp"

namespace avcqc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seedable, splittable generator. All draws go through hand-rolled
// distributions so results are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        std::seed_seq seq{splitmix64(s), splitmix64(s), splitmix64(s), splitmix64(s)};
        eng_.seed(seq);
    }

    std::uint64_t seed() const { return seed_; }

    // Independent child stream; deterministic in (seed, tag).
    Rng split(std::uint64_t tag) const {
        std::uint64_t s = seed_ ^ (0xd1342543de82ef95ULL * (tag + 1));
        return Rng(splitmix64(s));
    }

    std::uint64_t next_u64() { return eng_(); }

    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n) by rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    double normal() {
        // Marsaglia polar method, deterministic given the stream.
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(i)]);
    }

    // k distinct indices from [0, n), order randomized.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i)
            std::swap(pool[i], pool[i + static_cast<int>(uniform_int(n - i))]);
        pool.resize(k);
        return pool;
    }

    RealVector simplex_point(int n) {
        RealVector v(n);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            v(i) = -std::log(std::max(uniform01(), 1e-300));
            sum += v(i);
        }
        return v / sum;
    }

    Matrix ginibre(int d) {
        Matrix g(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g(i, j) = Complex(normal(), normal());
        return g;
    }

    Matrix random_density(int d) {
        const Matrix g = ginibre(d);
        Matrix rho = g * g.adjoint();
        return rho / rho.trace().real();
    }

    Matrix random_unitary(int d) {
        Eigen::HouseholderQR<Matrix> qr(ginibre(d));
        Matrix q = qr.householderQ();
        Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < d; ++i) {
            Complex z = r(i, i);
            q.col(i) *= (std::abs(z) > 0) ? z / std::abs(z) : Complex(1, 0);
        }
        return q;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace avcqc
