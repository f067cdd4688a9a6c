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

#ifndef OFDMSENSE_WAVEFORM_HPP
#define OFDMSENSE_WAVEFORM_HPP

#include "ofdmsense/common.hpp"

#include <algorithm>
#include <vector>

namespace ofdmsense {

// OFDM numerology. The estimation pipeline works entirely per subcarrier in
// the frequency domain; no sample-level IFFT/CP simulation is involved.
struct OfdmConfig {
    int num_subcarriers = 1024; // N
    double bandwidth_hz = 100e6; // B
    double cp_fraction = 0.125; // cyclic prefix as a fraction of the core symbol
    double carrier_hz = 2.35e9; // f_c

    double subcarrier_spacing_hz() const { return bandwidth_hz / num_subcarriers; }
    double cp_duration_s() const { return cp_fraction * num_subcarriers / bandwidth_hz; }
    // OFDM block period T_s = N/B + T_p
    double block_period_s() const {
        return num_subcarriers / bandwidth_hz + cp_duration_s();
    }
    double wavelength_m() const { return kSpeedOfLight / carrier_hz; }

    void validate() const {
        require(num_subcarriers >= 1, "OfdmConfig: num_subcarriers must be >= 1");
        require(bandwidth_hz > 0.0, "OfdmConfig: bandwidth_hz must be > 0");
        require(cp_fraction >= 0.0, "OfdmConfig: cp_fraction must be >= 0");
        require(carrier_hz > 0.0, "OfdmConfig: carrier_hz must be > 0");
    }
};

enum class AllocationKind { kFull, kInterleaved, kContiguous, kRandom };

struct AllocationPattern {
    AllocationKind kind = AllocationKind::kFull;
    int step = 1;    // interleaved
    int start = 0;   // contiguous
    int length = 0;  // contiguous
    int count = 0;   // random
    std::uint64_t seed = 0; // random

    static AllocationPattern full() { return {}; }
    static AllocationPattern interleaved(int step) {
        AllocationPattern p;
        p.kind = AllocationKind::kInterleaved;
        p.step = step;
        return p;
    }
    static AllocationPattern contiguous(int start, int length) {
        AllocationPattern p;
        p.kind = AllocationKind::kContiguous;
        p.start = start;
        p.length = length;
        return p;
    }
    static AllocationPattern random(int count, std::uint64_t seed) {
        AllocationPattern p;
        p.kind = AllocationKind::kRandom;
        p.count = count;
        p.seed = seed;
        return p;
    }
};

// The set of subcarriers available for sensing; indices sorted and distinct.
struct SubcarrierAllocation {
    std::vector<int> indices;
    int num_subcarriers = 0; // N

    int size() const { return static_cast<int>(indices.size()); }
};

inline SubcarrierAllocation make_allocation(const AllocationPattern& pattern, int num_subcarriers) {
    require(num_subcarriers >= 1, "make_allocation: num_subcarriers must be >= 1");
    SubcarrierAllocation alloc;
    alloc.num_subcarriers = num_subcarriers;
    switch (pattern.kind) {
    case AllocationKind::kFull:
        alloc.indices.resize(static_cast<std::size_t>(num_subcarriers));
        for (int n = 0; n < num_subcarriers; ++n)
            alloc.indices[static_cast<std::size_t>(n)] = n;
        break;
    case AllocationKind::kInterleaved:
        require(pattern.step >= 1, "make_allocation: interleave step must be >= 1");
        for (int n = 0; n < num_subcarriers; n += pattern.step)
            alloc.indices.push_back(n);
        break;
    case AllocationKind::kContiguous:
        require(pattern.start >= 0 && pattern.length >= 1 &&
                    pattern.start + pattern.length <= num_subcarriers,
                "make_allocation: contiguous range out of bounds");
        for (int n = pattern.start; n < pattern.start + pattern.length; ++n)
            alloc.indices.push_back(n);
        break;
    case AllocationKind::kRandom: {
        require(pattern.count >= 1 && pattern.count <= num_subcarriers,
                "make_allocation: random count must be in [1, N]");
        // Fisher-Yates partial shuffle, then sort the chosen prefix
        std::vector<int> pool(static_cast<std::size_t>(num_subcarriers));
        for (int n = 0; n < num_subcarriers; ++n)
            pool[static_cast<std::size_t>(n)] = n;
        Rng rng(pattern.seed);
        for (int i = 0; i < pattern.count; ++i) {
            const auto j = rng.uniform_int(i, num_subcarriers - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        alloc.indices.assign(pool.begin(), pool.begin() + pattern.count);
        std::sort(alloc.indices.begin(), alloc.indices.end());
        break;
    }
    }
    return alloc;
}

// Known transmitted symbols for all sources: blocks[t] is an (M_T*K) x N_s
// matrix whose column j holds the stacked per-antenna symbols at subcarrier
// allocation.indices[j]. Entries are unit-modulus QPSK.
struct SymbolGrid {
    std::vector<CMat> blocks;
    SubcarrierAllocation allocation;
    int num_sources = 0; // K
    int tx_antennas = 0; // M_T

    int num_blocks() const { return static_cast<int>(blocks.size()); }
    int vector_length() const { return num_sources * tx_antennas; }
};

inline SymbolGrid generate_symbols(int num_sources, int tx_antennas,
                                   const SubcarrierAllocation& allocation,
                                   int num_blocks, std::uint64_t seed) {
    require(num_sources >= 1, "generate_symbols: num_sources must be >= 1");
    require(tx_antennas >= 1, "generate_symbols: tx_antennas must be >= 1");
    require(num_blocks >= 1, "generate_symbols: num_blocks must be >= 1");
    require(allocation.size() >= 1, "generate_symbols: allocation must be non-empty");

    constexpr double h = 0.70710678118654752440; // 1/sqrt(2)
    static const Complex kQpsk[4] = {{h, h}, {h, -h}, {-h, h}, {-h, -h}};

    SymbolGrid grid;
    grid.allocation = allocation;
    grid.num_sources = num_sources;
    grid.tx_antennas = tx_antennas;
    grid.blocks.reserve(static_cast<std::size_t>(num_blocks));
    Rng rng(seed);
    const int rows = num_sources * tx_antennas;
    for (int t = 0; t < num_blocks; ++t) {
        CMat block(rows, allocation.size());
        for (int j = 0; j < allocation.size(); ++j)
            for (int i = 0; i < rows; ++i)
                block(i, j) = kQpsk[rng.uniform_int(0, 3)];
        grid.blocks.push_back(std::move(block));
    }
    return grid;
}

// Delay phase ramp c_n: entry l is exp(-i 2 pi n l / (g N)), the phase a
// signal in delay bin l acquires at subcarrier n.
template <typename Scalar = double>
Eigen::Vector<std::complex<Scalar>, Eigen::Dynamic>
delay_phase_vector(int subcarrier, int num_bins, int oversampling, int num_subcarriers) {
    require(subcarrier >= 0 && subcarrier < num_subcarriers,
            "delay_phase_vector: subcarrier index out of range");
    require(num_bins >= 1, "delay_phase_vector: num_bins must be >= 1");
    require(oversampling >= 1, "delay_phase_vector: oversampling must be >= 1");
    const Scalar step = Scalar(-2) * static_cast<Scalar>(kPi) * subcarrier /
                        (static_cast<Scalar>(oversampling) * num_subcarriers);
    Eigen::Vector<std::complex<Scalar>, Eigen::Dynamic> c(num_bins);
    for (int l = 0; l < num_bins; ++l)
        c(l) = std::polar(Scalar(1), step * l);
    return c;
}

} // namespace ofdmsense

#endif // OFDMSENSE_WAVEFORM_HPP
