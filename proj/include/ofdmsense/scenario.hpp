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

#ifndef OFDMSENSE_SCENARIO_HPP
#define OFDMSENSE_SCENARIO_HPP

#include "ofdmsense/common.hpp"
#include "ofdmsense/waveform.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <vector>

namespace ofdmsense {

// Downlink covers both a node sensing its own reflected transmit signal and
// a node sensing other transmitters' signals; the formulation is identical,
// with sources being the transmitting radio units (M_T = M). Uplink sources
// are mobile stations with their own antenna count (default 1).
enum class SensingMode { kDownlink, kUplink };

inline const char* to_string(SensingMode mode) {
    return mode == SensingMode::kDownlink ? "downlink" : "uplink";
}

// One propagation path. The delay is kept on the quantized grid: bin l
// corresponds to a delay of l/(g*B) and a travelled distance of c*l/(g*B).
struct MultipathComponent {
    int source_id = 0;
    int delay_bin = 0;
    double doppler_hz = 0.0;
    double aoa_rad = 0.0;
    double aod_rad = 0.0;
    Complex amplitude{0.0, 0.0};
};

struct ClusterOffset {
    double direction_deg = 0.0;
    double distance_m = 0.0;
    double doppler_hz = 0.0;
};

// Geometry-free cluster scene: each source gets one cluster of reflectors
// with uniformly drawn direction, distance and Doppler, shifted per source.
struct ClusterConfig {
    int num_paths_min = 10;
    int num_paths_max = 15;
    double direction_min_deg = 0.0;
    double direction_max_deg = 45.0;
    double distance_min_m = 0.0;
    double distance_max_m = 90.0;
    double doppler_min_hz = 0.0;
    double doppler_max_hz = 600.0;
    double pathloss_exponent = 3.0;
    // Uncompensated transmitter/receiver clock offset, added to every delay.
    // Relevant for uplink sensing, where absolute timing is not aligned.
    double timing_offset_s = 0.0;
    // Explicit per-source offsets; when empty, source k gets k times the
    // step values below.
    std::vector<ClusterOffset> offsets;
    double offset_direction_step_deg = 20.0;
    double offset_distance_step_m = 15.0;
    double offset_doppler_step_hz = 0.0;

    ClusterOffset offset_for(int source) const {
        if (!offsets.empty())
            return offsets[static_cast<std::size_t>(source) % offsets.size()];
        return {offset_direction_step_deg * source, offset_distance_step_m * source,
                offset_doppler_step_hz * source};
    }

    void validate() const {
        require(num_paths_min >= 1 && num_paths_max >= num_paths_min,
                "ClusterConfig: invalid path count range");
        require(direction_max_deg >= direction_min_deg &&
                    std::abs(direction_min_deg) <= 90.0 && std::abs(direction_max_deg) <= 90.0,
                "ClusterConfig: direction range must lie within [-90, 90] deg");
        require(distance_min_m >= 0.0 && distance_max_m >= distance_min_m,
                "ClusterConfig: invalid distance range");
        require(doppler_max_hz >= doppler_min_hz, "ClusterConfig: invalid Doppler range");
        require(pathloss_exponent > 0.0, "ClusterConfig: pathloss exponent must be > 0");
        require(timing_offset_s >= 0.0, "ClusterConfig: timing offset must be >= 0");
    }

    double max_distance_m(int num_sources) const {
        double worst = distance_max_m;
        for (int k = 0; k < num_sources; ++k)
            worst = std::max(worst, distance_max_m + offset_for(k).distance_m);
        return worst;
    }
};

struct Scene {
    std::vector<MultipathComponent> paths;
    int num_sources = 0;
    // Smallest delay-bin count that covers the configured ranges.
    int num_delay_bins = 0;
};

// Delay quantization at resolution 1/(g*B); ties round half away from zero.
// When max_bins > 0, a bin at or beyond it is an error.
inline int quantize_delay(double tau_s, int oversampling, double bandwidth_hz, int max_bins = 0) {
    require(std::isfinite(tau_s) && tau_s >= 0.0, "quantize_delay: delay must be >= 0");
    require(oversampling >= 1, "quantize_delay: oversampling must be >= 1");
    require(bandwidth_hz > 0.0, "quantize_delay: bandwidth must be > 0");
    const int bin = static_cast<int>(std::round(tau_s * oversampling * bandwidth_hz));
    if (max_bins > 0 && bin >= max_bins)
        throw std::out_of_range("quantize_delay: delay of " + std::to_string(tau_s) +
                                " s maps to bin " + std::to_string(bin) +
                                ", beyond the grid of " + std::to_string(max_bins) + " bins");
    return bin;
}

// Free-space style pathloss with a configurable exponent:
// |amplitude|^2 = (lambda / (4 pi d))^exponent, phase uniform in [0, 2 pi).
inline Complex amplitude_from_distance(double distance_m, double wavelength_m,
                                       double pathloss_exponent, Rng& rng) {
    require(distance_m > 0.0, "amplitude_from_distance: distance must be > 0");
    require(wavelength_m > 0.0, "amplitude_from_distance: wavelength must be > 0");
    const double gain = std::pow(wavelength_m / (4.0 * kPi * distance_m),
                                 pathloss_exponent / 2.0);
    return gain * rng.unit_phase();
}

// Draws one cluster of paths per source. Delays land on the quantized grid
// and are deduplicated within each source by resampling the distance; they
// may coincide across sources. Directions, distances and Dopplers stay
// continuous-valued.
inline Scene generate_scene(const ClusterConfig& config, int num_sources,
                            std::uint64_t seed, const OfdmConfig& ofdm, int oversampling) {
    config.validate();
    ofdm.validate();
    require(num_sources >= 1, "generate_scene: num_sources must be >= 1");
    require(oversampling >= 1, "generate_scene: oversampling must be >= 1");

    const double deg = kPi / 180.0;
    const double tau_max = config.max_distance_m(num_sources) / kSpeedOfLight +
                           config.timing_offset_s;
    const int grid_cap = oversampling * ofdm.num_subcarriers;
    const int bins_needed =
        static_cast<int>(std::ceil(tau_max * oversampling * ofdm.bandwidth_hz)) + 1;
    if (bins_needed > grid_cap)
        throw std::invalid_argument(
            "generate_scene: distance range needs " + std::to_string(bins_needed) +
            " delay bins, beyond the unambiguous span of " + std::to_string(grid_cap));

    Scene scene;
    scene.num_sources = num_sources;
    scene.num_delay_bins = bins_needed;

    Rng rng(seed);
    for (int k = 0; k < num_sources; ++k) {
        const ClusterOffset off = config.offset_for(k);
        const auto count = rng.uniform_int(config.num_paths_min, config.num_paths_max);
        std::set<int> used_bins;
        for (std::int64_t p = 0; p < count; ++p) {
            MultipathComponent path;
            path.source_id = k;
            path.aoa_rad = (rng.uniform(config.direction_min_deg, config.direction_max_deg) +
                            off.direction_deg) * deg;
            path.aod_rad = (rng.uniform(config.direction_min_deg, config.direction_max_deg) +
                            off.direction_deg) * deg;
            path.doppler_hz = rng.uniform(config.doppler_min_hz, config.doppler_max_hz) +
                              off.doppler_hz;

            // Delays from one source are kept distinct on the grid.
            double distance = 0.0;
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                distance = rng.uniform(config.distance_min_m, config.distance_max_m) +
                           off.distance_m;
                const double tau = distance / kSpeedOfLight + config.timing_offset_s;
                const int bin = quantize_delay(tau, oversampling, ofdm.bandwidth_hz,
                                               scene.num_delay_bins);
                if (used_bins.insert(bin).second) {
                    path.delay_bin = bin;
                    placed = true;
                }
            }
            if (!placed)
                throw std::runtime_error(
                    "generate_scene: could not draw a distinct delay bin for source " +
                    std::to_string(k) + " after 100 attempts; widen the distance range");

            path.amplitude = amplitude_from_distance(
                std::max(distance, 1e-6), ofdm.wavelength_m(), config.pathloss_exponent, rng);
            scene.paths.push_back(path);
        }
    }
    return scene;
}

// --- flat text import/export, one path per row ---------------------------

inline void write_scene(const Scene& scene, std::ostream& out) {
    out << "# source_id delay_bin doppler_hz aoa_deg aod_deg amp_re amp_im\n";
    char line[256];
    for (const auto& p : scene.paths) {
        std::snprintf(line, sizeof(line), "%d %d %.17g %.17g %.17g %.17g %.17g\n",
                      p.source_id, p.delay_bin, p.doppler_hz,
                      p.aoa_rad * 180.0 / kPi, p.aod_rad * 180.0 / kPi,
                      p.amplitude.real(), p.amplitude.imag());
        out << line;
    }
}

inline Scene read_scene(std::istream& in) {
    Scene scene;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        MultipathComponent p;
        double aoa_deg = 0.0, aod_deg = 0.0, re = 0.0, im = 0.0;
        if (std::sscanf(line.c_str(), "%d %d %lg %lg %lg %lg %lg", &p.source_id,
                        &p.delay_bin, &p.doppler_hz, &aoa_deg, &aod_deg, &re, &im) != 7)
            throw std::runtime_error("read_scene: malformed row: " + line);
        require(p.source_id >= 0 && p.delay_bin >= 0, "read_scene: negative id or bin");
        p.aoa_rad = aoa_deg * kPi / 180.0;
        p.aod_rad = aod_deg * kPi / 180.0;
        p.amplitude = {re, im};
        scene.paths.push_back(p);
        scene.num_sources = std::max(scene.num_sources, p.source_id + 1);
        scene.num_delay_bins = std::max(scene.num_delay_bins, p.delay_bin + 1);
    }
    return scene;
}

} // namespace ofdmsense

#endif // OFDMSENSE_SCENARIO_HPP
