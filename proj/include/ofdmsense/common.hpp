// SPDX-License-Identifier: Apache-2.0
//
// ofdmsense - network-side radio sensing over multiuser MIMO-OFDM signals
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// ------------------------------------------------------------------------

#ifndef OFDMSENSE_COMMON_HPP
#define OFDMSENSE_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ofdmsense {

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = 3.14159265358979323846264338327950288;

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline void require(bool condition, const std::string& message) {
    if (!condition)
        throw std::invalid_argument(message);
}

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

// Wrap a phase to the principal interval (-pi, pi].
inline double wrap_phase(double phase) {
    return std::arg(std::polar(1.0, phase));
}

// Derive an independent stream seed from a master seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seeded generator with draws built directly on the mt19937_64 output stream.
// std::uniform_real_distribution is implementation-defined, which would break
// cross-platform reproducibility of scenes and noise.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi], both ends inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        require(hi >= lo, "uniform_int: empty range");
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1ULL;
        return lo + static_cast<std::int64_t>(gen_() % span);
    }

    // standard normal via Box-Muller, spare value cached
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    // circular complex Gaussian with E|z|^2 = variance
    Complex complex_gaussian(double variance) {
        const double s = std::sqrt(variance / 2.0);
        return {s * gaussian(), s * gaussian()};
    }

    Complex unit_phase() {
        const double phi = uniform(0.0, 2.0 * kPi);
        return std::polar(1.0, phi);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ofdmsense

#endif // OFDMSENSE_COMMON_HPP
