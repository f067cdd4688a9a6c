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

#ifndef OFDMSENSE_EXTRACTOR_HPP
#define OFDMSENSE_EXTRACTOR_HPP

#include "ofdmsense/array.hpp"
#include "ofdmsense/measurement.hpp"
#include "ofdmsense/solver.hpp"

#include <map>
#include <optional>
#include <vector>

namespace ofdmsense {

// One recovered propagation path. Angles are estimated in the sin-domain
// phase kappa*sin(angle) -- the quantity the array actually measures -- and
// converted to radians at this boundary; estimates outside the [-1, 1] sin
// range are clamped and flagged.
struct PathEstimate {
    int source_id = 0;
    int delay_bin = 0;
    double distance_m = 0.0; // c * delay_bin / (g * B)
    double aoa_rad = 0.0;
    double aoa_sin_phase = 0.0; // kappa * sin(aoa)
    bool aoa_clamped = false;
    std::optional<double> aod_rad;
    std::optional<double> aod_sin_phase;
    std::optional<double> doppler_hz;
    double magnitude = 0.0;   // |b|, from the cross-correlation accumulator
    double power_score = 0.0; // |b|, from the mean element power
};

struct SourceBlock {
    int source_id = 0;
    CMat coefficients; // M_T x M
    double energy = 0.0;
};

// Splits a recovered M_T*K x M block into its per-source M_T x M sub-blocks
// and keeps those whose energy reaches energy_ratio times the strongest.
// Several survivors indicate same-delay paths from different sources.
inline std::vector<SourceBlock> identify_source(const CMat& block, int num_sources,
                                                double energy_ratio = 0.1) {
    require(num_sources >= 1, "identify_source: num_sources must be >= 1");
    require(block.rows() % num_sources == 0,
            "identify_source: block rows must split evenly across sources");
    const Eigen::Index m_tx = block.rows() / num_sources;

    Eigen::VectorXd energy(num_sources);
    for (int k = 0; k < num_sources; ++k)
        energy(k) = block.middleRows(k * m_tx, m_tx).squaredNorm();
    const double strongest = energy.maxCoeff();
    if (strongest == 0.0)
        return {};

    std::vector<SourceBlock> survivors;
    for (int k = 0; k < num_sources; ++k) {
        if (energy(k) < energy_ratio * strongest || energy(k) == 0.0)
            continue;
        survivors.push_back({k, block.middleRows(k * m_tx, m_tx), energy(k)});
    }
    return survivors;
}

namespace detail {

// Sum of lag-1 products conj(B[i, j]) * B[i, j+1] along the given axis
// (0 = across columns, 1 = across rows) together with the total magnitude of
// the individual terms. The argument of the sum is the steering phase step;
// the ratio |sum| / total is 1 exactly when the block is a pure phase ramp.
struct Lag1Accumulator {
    Complex sum{0.0, 0.0};
    double total = 0.0;
    long terms = 0;

    void add(const CMat& block, int axis) {
        if (axis == 0) {
            for (Eigen::Index i = 0; i < block.rows(); ++i)
                for (Eigen::Index j = 0; j + 1 < block.cols(); ++j) {
                    const Complex term = std::conj(block(i, j)) * block(i, j + 1);
                    sum += term;
                    total += std::abs(term);
                    ++terms;
                }
        } else {
            for (Eigen::Index j = 0; j < block.cols(); ++j)
                for (Eigen::Index i = 0; i + 1 < block.rows(); ++i) {
                    const Complex term = std::conj(block(i, j)) * block(i + 1, j);
                    sum += term;
                    total += std::abs(term);
                    ++terms;
                }
        }
    }

    double coherence() const { return total > 0.0 ? std::abs(sum) / total : 0.0; }
    // |b| assuming the terms share one phase, as they do for a steering ramp
    double magnitude() const { return terms > 0 ? std::sqrt(std::abs(sum) / terms) : 0.0; }
};

struct AngleFromPhase {
    double angle_rad = 0.0;
    double sin_phase = 0.0;
    bool clamped = false;
};

inline AngleFromPhase angle_from_phase(double phase, double kappa) {
    AngleFromPhase out;
    out.sin_phase = phase;
    double s = phase / kappa;
    if (s > 1.0 || s < -1.0) {
        out.clamped = true;
        s = std::clamp(s, -1.0, 1.0);
    }
    out.angle_rad = std::asin(s);
    return out;
}

struct WrappedPeak {
    double sin_position = 0.0; // in [-1, 1)
    double value = 0.0;
};

// Local maxima of a spectrum sampled uniformly in sin over [-1, 1). For
// half-wavelength arrays the spectrum is periodic in sin with period 2, so
// neighbours wrap around the ends. Peak positions are refined off the grid
// by a parabolic fit through the three surrounding samples.
inline std::vector<WrappedPeak> circular_peaks(const Eigen::VectorXd& spectrum,
                                               double rel_threshold) {
    const Eigen::Index n = spectrum.size();
    std::vector<WrappedPeak> peaks;
    if (n < 3)
        return peaks;
    const double cutoff = rel_threshold * spectrum.maxCoeff();
    const double step = 2.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double prev = spectrum((i + n - 1) % n);
        const double next = spectrum((i + 1) % n);
        if (!(spectrum(i) > prev && spectrum(i) >= next && spectrum(i) >= cutoff))
            continue;
        double position = -1.0 + step * static_cast<double>(i);
        const double curvature = prev - 2.0 * spectrum(i) + next;
        if (curvature < 0.0) {
            const double offset = 0.5 * (prev - next) / curvature;
            if (std::abs(offset) <= 0.5)
                position += step * offset;
        }
        if (position >= 1.0)
            position -= 2.0;
        if (position < -1.0)
            position += 2.0;
        peaks.push_back({position, spectrum(i)});
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const WrappedPeak& a, const WrappedPeak& b) {
                  return a.sin_position < b.sin_position;
              });
    return peaks;
}

inline double circular_sin_distance(double a, double b) {
    const double d = std::abs(a - b);
    return std::min(d, 2.0 - d);
}

struct SplitComponent {
    double sin_position = 0.0;
    double magnitude = 0.0;
};

// Splits same-delay mixtures by beam scanning. Initial arrival positions are
// the averaged-spectrum peaks above half the global maximum; they are then
// refined by alternating deflation: fit the per-path column mixtures by
// least squares at the current positions, subtract all other paths, and
// re-scan the remaining single lobe. The deflated lobe is interference-free,
// which removes the peak bias the raw spectrum has near the resolution
// limit.
inline std::vector<SplitComponent> split_same_delay(const std::vector<const CMat*>& blocks,
                                                    const UniformLinearArray& rx_array,
                                                    int grid_points,
                                                    int refine_rounds = 4) {
    require(!blocks.empty(), "split_same_delay: needs at least one block");
    require(grid_points >= 8, "split_same_delay: grid too small");
    const std::vector<double> grid = default_scan_grid(grid_points);
    const double grid_step = 2.0 / grid_points;
    const Eigen::Index m_rx = rx_array.num_elements;
    const Eigen::Index m_tx = blocks.front()->rows();

    Eigen::VectorXd spectrum = Eigen::VectorXd::Zero(grid_points);
    for (const CMat* block : blocks)
        spectrum += beam_scan(*block, rx_array, grid);

    const auto initial = circular_peaks(spectrum, 0.5);
    const int count = static_cast<int>(initial.size());
    const double scan_norm = static_cast<double>(m_rx) *
                             std::sqrt(static_cast<double>(m_tx)) * blocks.size();
    if (count == 0)
        return {};
    if (count == 1)
        return {{initial[0].sin_position, initial[0].value / scan_norm}};

    std::vector<double> positions;
    positions.reserve(initial.size());
    for (const auto& p : initial)
        positions.push_back(p.sin_position);

    // Refinement must not let one estimate wander onto a neighbour's lobe:
    // each position stays within half the distance to its nearest peer.
    std::vector<double> window(positions.size(), 1.0);
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = 0; j < positions.size(); ++j)
            if (j != i)
                window[i] = std::min(
                    window[i],
                    std::max(0.5 * circular_sin_distance(positions[i], positions[j]),
                             grid_step));

    CMat steering(m_rx, count);
    const auto rebuild_steering = [&] {
        for (int i = 0; i < count; ++i)
            steering.col(i) = steering_vector(rx_array, std::asin(positions[static_cast<std::size_t>(i)]));
    };
    std::vector<CMat> mixing(blocks.size()); // per block: m_tx x count

    for (int round = 0; round < refine_rounds; ++round) {
        rebuild_steering();
        // per-block least-squares mixtures: B ~= C * steering^T
        bool finite = true;
        for (std::size_t t = 0; t < blocks.size(); ++t) {
            mixing[t] = steering.colPivHouseholderQr()
                            .solve(blocks[t]->transpose())
                            .transpose();
            finite = finite && mixing[t].allFinite();
        }
        if (!finite)
            break;
        for (int i = 0; i < count; ++i) {
            Eigen::VectorXd deflated = Eigen::VectorXd::Zero(grid_points);
            for (std::size_t t = 0; t < blocks.size(); ++t) {
                CMat remainder = *blocks[t];
                for (int j = 0; j < count; ++j)
                    if (j != i)
                        remainder -= mixing[t].col(j) * steering.col(j).transpose();
                deflated += beam_scan(remainder, rx_array, grid);
            }
            const auto refined = circular_peaks(deflated, 0.99);
            double best = positions[static_cast<std::size_t>(i)];
            double best_distance = 2.0;
            for (const auto& p : refined) {
                const double d =
                    circular_sin_distance(p.sin_position, positions[static_cast<std::size_t>(i)]);
                if (d < best_distance) {
                    best_distance = d;
                    best = p.sin_position;
                }
            }
            if (best_distance <= window[static_cast<std::size_t>(i)])
                positions[static_cast<std::size_t>(i)] =
                    std::clamp(best, -1.0, std::nextafter(1.0, 0.0));
        }
    }

    rebuild_steering();
    std::vector<SplitComponent> components(static_cast<std::size_t>(count));
    Eigen::VectorXd power = Eigen::VectorXd::Zero(count);
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        const CMat c = steering.colPivHouseholderQr()
                           .solve(blocks[t]->transpose())
                           .transpose();
        for (int i = 0; i < count; ++i)
            power(i) += c.col(i).squaredNorm();
    }
    for (int i = 0; i < count; ++i) {
        components[static_cast<std::size_t>(i)].sin_position =
            positions[static_cast<std::size_t>(i)];
        components[static_cast<std::size_t>(i)].magnitude =
            std::sqrt(power(i) / (static_cast<double>(blocks.size()) * m_tx));
    }
    std::sort(components.begin(), components.end(),
              [](const SplitComponent& a, const SplitComponent& b) {
                  return a.sin_position < b.sin_position;
              });
    return components;
}

} // namespace detail

struct AngleEstimates {
    double aoa_rad = 0.0;
    double aoa_sin_phase = 0.0;
    bool aoa_clamped = false;
    std::optional<double> aod_rad;
    std::optional<double> aod_sin_phase;
    bool aod_clamped = false;
};

// AoA from the averaged lag-1 cross-correlation across columns of a source
// sub-block, AoD symmetrically across rows. AoD is unavailable for a single
// transmit antenna.
inline AngleEstimates estimate_angles(const CMat& block, const UniformLinearArray& tx_array,
                                      const UniformLinearArray& rx_array) {
    require(block.rows() == tx_array.num_elements && block.cols() == rx_array.num_elements,
            "estimate_angles: block shape must be M_T x M");
    if (rx_array.num_elements < 2)
        throw std::invalid_argument("estimate_angles: AoA needs at least 2 receive elements");
    require(block.squaredNorm() > 0.0, "estimate_angles: block is all zero");

    AngleEstimates est;
    detail::Lag1Accumulator rx;
    rx.add(block, 0);
    const auto aoa = detail::angle_from_phase(std::arg(rx.sum), rx_array.kappa());
    est.aoa_rad = aoa.angle_rad;
    est.aoa_sin_phase = aoa.sin_phase;
    est.aoa_clamped = aoa.clamped;

    if (tx_array.num_elements >= 2) {
        detail::Lag1Accumulator tx;
        tx.add(block, 1);
        const auto aod = detail::angle_from_phase(std::arg(tx.sum), tx_array.kappa());
        est.aod_rad = aod.angle_rad;
        est.aod_sin_phase = aod.sin_phase;
        est.aod_clamped = aod.clamped;
    }
    return est;
}

// Doppler from the cross-correlation of the same source sub-block across
// consecutive OFDM blocks; unambiguous for |f_D| < 1/(2 T_s).
inline double estimate_doppler(const std::vector<CMat>& blocks_over_time,
                               double block_period_s) {
    if (blocks_over_time.size() < 2)
        throw std::invalid_argument("estimate_doppler: needs at least 2 OFDM blocks");
    require(block_period_s > 0.0, "estimate_doppler: block period must be > 0");
    Complex acc{0.0, 0.0};
    for (std::size_t t = 0; t + 1 < blocks_over_time.size(); ++t)
        acc += blocks_over_time[t + 1].cwiseProduct(blocks_over_time[t].conjugate()).sum();
    return std::arg(acc) / (2.0 * kPi * block_period_s);
}

// |b| as the root mean element power; exact for noiseless steering outer
// products, positively biased to sqrt(|b|^2 + sigma^2) under noise.
inline double estimate_magnitude(const CMat& block) {
    if (block.size() == 0)
        return 0.0;
    return std::sqrt(block.squaredNorm() / static_cast<double>(block.size()));
}

struct ThresholdRule {
    double min_magnitude = 0.0;
    int top_k = 0; // 0 = disabled; otherwise keep the top_k largest magnitudes
};

inline std::vector<PathEstimate> threshold_paths(std::vector<PathEstimate> candidates,
                                                 const ThresholdRule& rule) {
    if (rule.top_k > 0) {
        if (static_cast<int>(candidates.size()) <= rule.top_k)
            return candidates;
        std::vector<std::size_t> order(candidates.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return candidates[a].magnitude > candidates[b].magnitude;
        });
        std::vector<char> keep(candidates.size(), 0);
        for (int i = 0; i < rule.top_k; ++i)
            keep[order[static_cast<std::size_t>(i)]] = 1;
        std::vector<PathEstimate> out;
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (keep[i])
                out.push_back(candidates[i]);
        return out;
    }
    std::vector<PathEstimate> out;
    for (auto& c : candidates)
        if (c.magnitude >= rule.min_magnitude)
            out.push_back(std::move(c));
    return out;
}

struct ScanPeak {
    double angle_rad = 0.0;
    double sin_phase = 0.0;
    double magnitude = 0.0;
};

// Splits a source sub-block suspected to mix several same-delay paths into
// per-angle contributions via beam scanning. A block whose lag-1 coherence
// reaches coherence_threshold is treated as a single path and resolved from
// the cross-correlation accumulator directly; otherwise the beam-scan local
// maxima above half the global maximum are reported, with positions refined
// by deflating the competing paths (see detail::split_same_delay).
inline std::vector<ScanPeak> resolve_same_delay(const CMat& block,
                                                const UniformLinearArray& rx_array,
                                                int grid_points = 512,
                                                double coherence_threshold = 0.9) {
    require(block.cols() == rx_array.num_elements,
            "resolve_same_delay: block column count must match the receive array");
    if (block.squaredNorm() == 0.0)
        return {};

    detail::Lag1Accumulator acc;
    acc.add(block, 0);
    if (acc.coherence() >= coherence_threshold) {
        const auto aoa = detail::angle_from_phase(std::arg(acc.sum), rx_array.kappa());
        return {{aoa.angle_rad, aoa.sin_phase, acc.magnitude()}};
    }

    std::vector<ScanPeak> peaks;
    for (const auto& c : detail::split_same_delay({&block}, rx_array, grid_points)) {
        ScanPeak peak;
        peak.angle_rad = std::asin(c.sin_position);
        peak.sin_phase = rx_array.kappa() * c.sin_position;
        peak.magnitude = c.magnitude;
        peaks.push_back(peak);
    }
    return peaks;
}

struct ExtractionOptions {
    double source_energy_ratio = 0.1;  // eta, identify_source survivor cut
    double coherence_threshold = 0.9;  // rho, same-delay suspicion trigger
    int scan_grid_size = 512;
    ThresholdRule threshold;
};

// Full extraction: walks every recovered delay bin across all OFDM blocks,
// attributes it to sources, and estimates angles, Doppler and amplitude.
// Estimates aggregate all blocks in which a bin was recovered; Doppler needs
// the bin present in at least two consecutive blocks and is absent otherwise.
inline std::vector<PathEstimate> extract_paths(const std::vector<BlockSolution>& solutions,
                                               const SensingMeasurement& measurement,
                                               const UniformLinearArray& tx_array,
                                               const UniformLinearArray& rx_array,
                                               const ExtractionOptions& options = {}) {
    require(rx_array.num_elements == measurement.rx_antennas &&
                tx_array.num_elements == measurement.tx_antennas,
            "extract_paths: arrays disagree with the measurement record");
    require(rx_array.num_elements >= 2, "extract_paths: AoA needs at least 2 receive elements");
    require(static_cast<int>(solutions.size()) == measurement.num_blocks,
            "extract_paths: one solution per OFDM block expected");

    const int m_tx = measurement.tx_antennas;
    const double bin_distance =
        kSpeedOfLight / (measurement.oversampling * measurement.bandwidth_hz);

    // bin -> (block index, recovered coefficients)
    std::map<int, std::vector<std::pair<int, const CMat*>>> by_bin;
    for (std::size_t t = 0; t < solutions.size(); ++t)
        for (const auto& block : solutions[t].blocks)
            by_bin[block.bin].push_back({static_cast<int>(t), &block.coefficients});

    std::vector<PathEstimate> estimates;
    for (const auto& [bin, occurrences] : by_bin) {
        // per-source energy summed over blocks
        Eigen::VectorXd energy = Eigen::VectorXd::Zero(measurement.num_sources);
        for (const auto& [t, g] : occurrences)
            for (int k = 0; k < measurement.num_sources; ++k)
                energy(k) += g->middleRows(static_cast<Eigen::Index>(k) * m_tx, m_tx)
                                 .squaredNorm();
        const double strongest = energy.maxCoeff();
        if (strongest == 0.0)
            continue;

        for (int k = 0; k < measurement.num_sources; ++k) {
            if (energy(k) < options.source_energy_ratio * strongest || energy(k) == 0.0)
                continue;

            std::vector<std::pair<int, CMat>> source_blocks;
            source_blocks.reserve(occurrences.size());
            for (const auto& [t, g] : occurrences)
                source_blocks.emplace_back(
                    t, g->middleRows(static_cast<Eigen::Index>(k) * m_tx, m_tx));

            detail::Lag1Accumulator rx_acc;
            detail::Lag1Accumulator tx_acc;
            for (const auto& [t, b] : source_blocks) {
                rx_acc.add(b, 0);
                if (m_tx >= 2)
                    tx_acc.add(b, 1);
            }

            PathEstimate base;
            base.source_id = k;
            base.delay_bin = bin;
            base.distance_m = bin_distance * bin;
            base.power_score = std::sqrt(
                energy(k) / (static_cast<double>(source_blocks.size()) * m_tx *
                             measurement.rx_antennas));

            if (rx_acc.coherence() >= options.coherence_threshold) {
                const auto aoa = detail::angle_from_phase(std::arg(rx_acc.sum),
                                                          rx_array.kappa());
                base.aoa_rad = aoa.angle_rad;
                base.aoa_sin_phase = aoa.sin_phase;
                base.aoa_clamped = aoa.clamped;
                base.magnitude = rx_acc.magnitude();
                if (m_tx >= 2) {
                    const auto aod = detail::angle_from_phase(std::arg(tx_acc.sum),
                                                              tx_array.kappa());
                    base.aod_rad = aod.angle_rad;
                    base.aod_sin_phase = aod.sin_phase;
                }
                // Doppler from consecutive-block pairs
                Complex dacc{0.0, 0.0};
                int pairs = 0;
                for (std::size_t i = 0; i + 1 < source_blocks.size(); ++i)
                    if (source_blocks[i + 1].first == source_blocks[i].first + 1) {
                        dacc += source_blocks[i + 1]
                                    .second.cwiseProduct(source_blocks[i].second.conjugate())
                                    .sum();
                        ++pairs;
                    }
                if (pairs > 0)
                    base.doppler_hz =
                        std::arg(dacc) / (2.0 * kPi * measurement.block_period_s);
                estimates.push_back(base);
            } else {
                // Same-delay mixture from one source: split arrivals by beam
                // scanning across all blocks in which the bin was recovered.
                std::vector<const CMat*> block_ptrs;
                block_ptrs.reserve(source_blocks.size());
                for (const auto& [t, b] : source_blocks)
                    block_ptrs.push_back(&b);
                for (const auto& c : detail::split_same_delay(block_ptrs, rx_array,
                                                              options.scan_grid_size)) {
                    PathEstimate est = base;
                    est.aoa_rad = std::asin(c.sin_position);
                    est.aoa_sin_phase = rx_array.kappa() * c.sin_position;
                    est.magnitude = c.magnitude;
                    estimates.push_back(est);
                }
            }
        }
    }
    return threshold_paths(std::move(estimates), options.threshold);
}

} // namespace ofdmsense

#endif // OFDMSENSE_EXTRACTOR_HPP
