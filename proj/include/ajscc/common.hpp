#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace ajscc {

using Complex = std::complex<double>;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
// Rows are OFDM symbols, columns are subcarriers.
using ComplexGrid = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Invalid argument or dimension mismatch at an API boundary.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A sampler chain left the admissible region (non-finite or exploding state).
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ParameterError(message);
}

// SplitMix64 finalizer; the seed-splitting primitive for every derived stream.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// FNV-1a over a tag so stage names map to stable 64-bit constants.
constexpr std::uint64_t tag_hash(std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Root seed of one trial; every stage stream of that trial hangs off it.
constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) { return mix64(mix64(master) ^ trial); }

constexpr std::uint64_t stage_seed(std::uint64_t trial_root, std::string_view stage) {
    return mix64(trial_root ^ tag_hash(stage));
}

// Stream seed for (master, trial, stage). Depends on nothing else, so adding
// sweep cells never shifts another cell's randomness.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::string_view stage) {
    return stage_seed(trial_seed(master, trial), stage);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    // Circularly symmetric complex Gaussian with E|z|^2 = variance.
    Complex complex_normal(double variance) {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {s * re, s * im};
    }

    std::uint64_t uniform_index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    RealVector normal_vector(Eigen::Index n) {
        RealVector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal_(engine_);
        return v;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ajscc
