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

#ifndef OFDMSENSE_MEASUREMENT_HPP
#define OFDMSENSE_MEASUREMENT_HPP

#include "ofdmsense/array.hpp"
#include "ofdmsense/scenario.hpp"
#include "ofdmsense/waveform.hpp"

#include <optional>
#include <vector>

namespace ofdmsense {

// Per-experiment observation record. For every OFDM block t the receiver
// sees Y[t] (N_s x M) and the known sensing matrix W[t]
// (N_s x M_T*K*N_p); the unknown coefficient matrix is block sparse with one
// M_T*K x M block per occupied delay bin. W varies over t only through the
// transmitted symbols; the delay phase ramp is block-independent.
struct SensingMeasurement {
    std::vector<CMat> received; // Y[t]
    std::vector<CMat> sensing;  // W[t]
    SubcarrierAllocation allocation;
    SensingMode mode = SensingMode::kDownlink;
    double noise_variance_per_subcarrier = 0.0; // complex variance per entry of Y
    double symbol_scale = 1.0; // per-antenna amplitude applied to the known symbols
    double block_period_s = 0.0;
    double bandwidth_hz = 0.0;
    int num_blocks = 0;
    int rx_antennas = 0;  // M
    int tx_antennas = 0;  // M_T
    int num_sources = 0;  // K
    int num_delay_bins = 0; // N_p
    int oversampling = 1; // g

    int block_size() const { return tx_antennas * num_sources; }
};

struct SynthesisOptions {
    SensingMode mode = SensingMode::kDownlink;
    UniformLinearArray rx_array{1, 0.5};
    UniformLinearArray tx_array{1, 0.5};
    // Total in-band thermal noise; split evenly across the N subcarriers.
    // Absent means noiseless.
    std::optional<double> noise_dbm_total;
    // Total transmit power per source; split evenly across the N subcarriers
    // and M_T antennas. Absent means unit-amplitude symbols.
    std::optional<double> tx_power_dbm;
    std::uint64_t noise_seed = 0;
};

// Row j of W (for subcarrier n = allocation.indices[j]) is
// x_{n,t}^T (c_n^T kron I_{M_T K}): column l*M_T*K + i holds c_n[l] * x_{n,t}[i].
inline CMat build_sensing_matrix(const SymbolGrid& symbols, int block_index,
                                 int num_delay_bins, int oversampling,
                                 double symbol_scale = 1.0) {
    require(block_index >= 0 && block_index < symbols.num_blocks(),
            "build_sensing_matrix: block index out of range");
    require(num_delay_bins >= 1, "build_sensing_matrix: num_delay_bins must be >= 1");
    const SubcarrierAllocation& alloc = symbols.allocation;
    const int ns = alloc.size();
    const int bs = symbols.vector_length();
    const CMat& x = symbols.blocks[static_cast<std::size_t>(block_index)];

    CMat w(ns, static_cast<Eigen::Index>(bs) * num_delay_bins);
    for (int j = 0; j < ns; ++j) {
        const auto c = delay_phase_vector<double>(alloc.indices[static_cast<std::size_t>(j)],
                                                  num_delay_bins, oversampling,
                                                  alloc.num_subcarriers);
        for (int l = 0; l < num_delay_bins; ++l)
            w.block(j, static_cast<Eigen::Index>(l) * bs, 1, bs) =
                (symbol_scale * c(l)) * x.col(j).transpose();
    }
    return w;
}

// The block-sparse coefficient matrix V*A^T implied by a ground-truth scene
// at block t: for a path from source k in bin l, rows [l*M_T*K + k*M_T, +M_T)
// receive b * exp(i 2 pi t f_D T_s) * a(M_T, aod) * a(M, aoa)^T.
// Paths sharing a bin accumulate.
inline CMat ground_truth_coefficients(const Scene& scene, int block_index,
                                      double block_period_s,
                                      const UniformLinearArray& tx_array,
                                      const UniformLinearArray& rx_array,
                                      int num_delay_bins) {
    const int bs = tx_array.num_elements * scene.num_sources;
    CMat v = CMat::Zero(static_cast<Eigen::Index>(bs) * num_delay_bins,
                        rx_array.num_elements);
    for (const auto& p : scene.paths) {
        require(p.delay_bin >= 0 && p.delay_bin < num_delay_bins,
                "ground_truth_coefficients: delay bin out of range");
        require(p.source_id >= 0 && p.source_id < scene.num_sources,
                "ground_truth_coefficients: source id out of range");
        const Complex gain =
            p.amplitude * std::polar(1.0, 2.0 * kPi * block_index * p.doppler_hz *
                                              block_period_s);
        const CVec a_tx = steering_vector(tx_array, p.aod_rad);
        const CVec a_rx = steering_vector(rx_array, p.aoa_rad);
        v.block(static_cast<Eigen::Index>(p.delay_bin) * bs +
                    static_cast<Eigen::Index>(p.source_id) * tx_array.num_elements,
                0, tx_array.num_elements, rx_array.num_elements) +=
            gain * (a_tx * a_rx.transpose());
    }
    return v;
}

// Synthesizes the received frequency-domain observations path by path:
// y_{n,t} = sum_paths b * e^{-i 2 pi n l/(g N)} * e^{i 2 pi t f_D T_s}
//           * a(M, aoa) * (a(M_T, aod)^T x_source) + z_{n,t},
// and assembles the matching per-block sensing matrices.
inline SensingMeasurement synthesize_received(const Scene& scene, const SymbolGrid& symbols,
                                              const OfdmConfig& ofdm, int num_delay_bins,
                                              int oversampling,
                                              const SynthesisOptions& options) {
    ofdm.validate();
    require(num_delay_bins >= 1 && num_delay_bins <= oversampling * ofdm.num_subcarriers,
            "synthesize_received: num_delay_bins must be in [1, g*N]");
    require(symbols.num_sources == scene.num_sources,
            "synthesize_received: symbol grid and scene disagree on the source count");
    require(symbols.allocation.num_subcarriers == ofdm.num_subcarriers,
            "synthesize_received: allocation was built for a different N");
    require(symbols.tx_antennas == options.tx_array.num_elements,
            "synthesize_received: symbol grid and tx array disagree on M_T");
    if (options.mode == SensingMode::kDownlink)
        require(options.tx_array.num_elements == options.rx_array.num_elements,
                "synthesize_received: downlink sensing requires M_T = M");
    for (const auto& p : scene.paths)
        require(p.delay_bin >= 0 && p.delay_bin < num_delay_bins,
                "synthesize_received: scene delay bin " + std::to_string(p.delay_bin) +
                    " exceeds the grid of " + std::to_string(num_delay_bins) + " bins");

    const SubcarrierAllocation& alloc = symbols.allocation;
    const int ns = alloc.size();
    const int m_rx = options.rx_array.num_elements;
    const int m_tx = options.tx_array.num_elements;
    const int t_blocks = symbols.num_blocks();
    const double ts = ofdm.block_period_s();

    SensingMeasurement meas;
    meas.allocation = alloc;
    meas.mode = options.mode;
    meas.block_period_s = ts;
    meas.bandwidth_hz = ofdm.bandwidth_hz;
    meas.num_blocks = t_blocks;
    meas.rx_antennas = m_rx;
    meas.tx_antennas = m_tx;
    meas.num_sources = scene.num_sources;
    meas.num_delay_bins = num_delay_bins;
    meas.oversampling = oversampling;
    if (options.tx_power_dbm)
        meas.symbol_scale = std::sqrt(dbm_to_mw(*options.tx_power_dbm) /
                                      (static_cast<double>(ofdm.num_subcarriers) * m_tx));
    if (options.noise_dbm_total)
        meas.noise_variance_per_subcarrier =
            dbm_to_mw(*options.noise_dbm_total) / ofdm.num_subcarriers;

    // Per-path factors that do not depend on (n, t)
    struct PathTerms {
        Complex gain;
        double doppler_phase_per_block;
        double delay_phase_per_subcarrier;
        CVec a_rx;
        CVec a_tx;
        int source;
    };
    std::vector<PathTerms> terms;
    terms.reserve(scene.paths.size());
    for (const auto& p : scene.paths) {
        PathTerms pt;
        pt.gain = p.amplitude;
        pt.doppler_phase_per_block = 2.0 * kPi * p.doppler_hz * ts;
        pt.delay_phase_per_subcarrier =
            -2.0 * kPi * p.delay_bin / (static_cast<double>(oversampling) * ofdm.num_subcarriers);
        pt.a_rx = steering_vector(options.rx_array, p.aoa_rad);
        pt.a_tx = steering_vector(options.tx_array, p.aod_rad);
        pt.source = p.source_id;
        terms.push_back(std::move(pt));
    }

    Rng noise_rng(options.noise_seed);
    meas.received.reserve(static_cast<std::size_t>(t_blocks));
    meas.sensing.reserve(static_cast<std::size_t>(t_blocks));
    for (int t = 0; t < t_blocks; ++t) {
        const CMat& x = symbols.blocks[static_cast<std::size_t>(t)];
        CMat y = CMat::Zero(ns, m_rx);
        for (const auto& pt : terms) {
            const Complex block_gain =
                pt.gain * std::polar(1.0, pt.doppler_phase_per_block * t) * meas.symbol_scale;
            for (int j = 0; j < ns; ++j) {
                const int n = alloc.indices[static_cast<std::size_t>(j)];
                const Complex tx_mix =
                    pt.a_tx
                        .cwiseProduct(x.col(j).segment(
                            static_cast<Eigen::Index>(pt.source) * m_tx, m_tx))
                        .sum();
                const Complex coeff =
                    block_gain * std::polar(1.0, pt.delay_phase_per_subcarrier * n) * tx_mix;
                y.row(j) += coeff * pt.a_rx.transpose();
            }
        }
        if (meas.noise_variance_per_subcarrier > 0.0)
            for (int j = 0; j < ns; ++j)
                for (int a = 0; a < m_rx; ++a)
                    y(j, a) += noise_rng.complex_gaussian(meas.noise_variance_per_subcarrier);

        meas.received.push_back(std::move(y));
        meas.sensing.push_back(build_sensing_matrix(symbols, t, num_delay_bins, oversampling,
                                                    meas.symbol_scale));
    }
    return meas;
}

// Text dump of the received observations for cross-implementation
// comparison: one CSV row per subcarrier with re,im pairs per receive
// antenna, blocks separated by comment headers.
inline void write_measurement(const SensingMeasurement& measurement, std::ostream& out) {
    out << "# mode " << to_string(measurement.mode) << ", blocks " << measurement.num_blocks
        << ", rows " << measurement.allocation.size() << ", rx " << measurement.rx_antennas
        << ", tx " << measurement.tx_antennas << ", sources " << measurement.num_sources
        << ", delay_bins " << measurement.num_delay_bins << ", oversampling "
        << measurement.oversampling << "\n";
    char number[64];
    for (int t = 0; t < measurement.num_blocks; ++t) {
        out << "# block " << t << "\n";
        const CMat& y = measurement.received[static_cast<std::size_t>(t)];
        for (Eigen::Index j = 0; j < y.rows(); ++j) {
            for (Eigen::Index a = 0; a < y.cols(); ++a) {
                std::snprintf(number, sizeof(number), "%.17g,%.17g", y(j, a).real(),
                              y(j, a).imag());
                out << (a == 0 ? "" : ",") << number;
            }
            out << "\n";
        }
    }
}

} // namespace ofdmsense

#endif // OFDMSENSE_MEASUREMENT_HPP
