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

#ifndef OFDMSENSE_EXPERIMENT_HPP
#define OFDMSENSE_EXPERIMENT_HPP

#include "ofdmsense/extractor.hpp"
#include "ofdmsense/measurement.hpp"
#include "ofdmsense/scenario.hpp"
#include "ofdmsense/solver.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ofdmsense {

struct MatchGates {
    double max_distance_bins = 1.0; // delay-bin widths
    double max_sin_phase = 0.1;     // sin-domain phase error
};

struct ExperimentConfig {
    OfdmConfig ofdm;
    SensingMode mode = SensingMode::kDownlink;
    int num_sources = 4;  // K
    int rx_antennas = 4;  // M
    int tx_antennas = 4;  // M_T; must equal rx_antennas in downlink mode
    int oversampling = 1; // g
    int num_delay_bins = 0; // N_p; 0 = derive from the cluster ranges
    int num_blocks = 8;     // OFDM blocks per run
    double spacing_over_wavelength = 0.5;
    AllocationPattern allocation;
    ClusterConfig cluster;
    std::optional<double> tx_power_dbm = 20.0;
    std::optional<double> noise_dbm_total = -97.0;
    std::string solver_kind = "block_omp";
    // residual_ratio <= 0 tracks the injected noise floor (exact-fit floor
    // when the run is noiseless)
    StoppingRule solver_stop = StoppingRule::residual(0.0);
    ExtractionOptions extraction;
    // When set, extraction.threshold.min_magnitude is derived from the power
    // budget as the amplitude whose per-path received SNR is 0 dB.
    bool auto_min_magnitude = false;
    MatchGates gates;
    std::uint64_t seed = 1;

    UniformLinearArray rx_array() const {
        return {rx_antennas, spacing_over_wavelength};
    }
    UniformLinearArray tx_array() const {
        return {tx_antennas, spacing_over_wavelength};
    }
    double bin_distance_m() const {
        return kSpeedOfLight / (oversampling * ofdm.bandwidth_hz);
    }
    double kappa() const { return 2.0 * kPi * spacing_over_wavelength; }

    void validate() const {
        ofdm.validate();
        cluster.validate();
        require(num_sources >= 1, "config: num_sources must be >= 1");
        require(rx_antennas >= 2, "config: rx_antennas must be >= 2 for AoA estimation");
        require(tx_antennas >= 1, "config: tx_antennas must be >= 1");
        require(oversampling >= 1, "config: oversampling must be >= 1");
        require(num_blocks >= 1, "config: num_blocks must be >= 1");
        require(spacing_over_wavelength > 0.0, "config: spacing must be > 0");
        if (mode == SensingMode::kDownlink)
            require(tx_antennas == rx_antennas, "config: downlink requires tx_antennas == rx_antennas");
        require(num_delay_bins >= 0 &&
                    num_delay_bins <= oversampling * ofdm.num_subcarriers,
                "config: num_delay_bins must be in [0, g*N]");
        require(solver_kind == "block_omp", "config: unknown solver kind " + solver_kind);
        require(extraction.source_energy_ratio >= 0.0 && extraction.source_energy_ratio <= 1.0,
                "config: source_energy_ratio must be in [0, 1]");
        require(extraction.coherence_threshold >= 0.0 && extraction.coherence_threshold <= 1.0,
                "config: coherence_threshold must be in [0, 1]");
        require(extraction.scan_grid_size >= 2, "config: scan grid needs >= 2 points");
        require(gates.max_distance_bins > 0.0 && gates.max_sin_phase > 0.0,
                "config: match gates must be positive");
    }
};

// Per-path received SNR over the whole band: |b|^2 * P_tx / P_noise. The
// equal split of transmit power across subcarriers and of noise across the
// band makes the per-subcarrier ratio identical.
inline double path_snr_db(const MultipathComponent& path, const ExperimentConfig& config) {
    if (!config.noise_dbm_total)
        return std::numeric_limits<double>::infinity();
    const double tx_equivalent_mw =
        config.tx_power_dbm ? dbm_to_mw(*config.tx_power_dbm)
                            : static_cast<double>(config.ofdm.num_subcarriers) *
                                  config.tx_antennas;
    const double snr = std::norm(path.amplitude) * tx_equivalent_mw /
                       dbm_to_mw(*config.noise_dbm_total);
    return 10.0 * std::log10(snr);
}

// --- matching --------------------------------------------------------------

struct MatchReport {
    struct Pair {
        int estimate_index = 0;
        int truth_index = 0;
    };
    std::vector<Pair> pairs; // one-to-one
    double detection_rate = 0.0;
    int false_alarm_count = 0;
    std::optional<double> rmse_distance_m;
    std::optional<double> rmse_aoa_deg;
    std::optional<double> rmse_doppler_hz;
};

// ULA angles are identifiable only through sin(angle); report every angle on
// the principal [-90, 90] deg branch.
inline double principal_angle_rad(double angle_rad) {
    return std::asin(std::clamp(std::sin(angle_rad), -1.0, 1.0));
}

// Angular separation of two principal-branch angles on the sin circle: for a
// half-wavelength array, sin = -1 and sin = +1 are the same signature, so
// angles near opposite endfires can be a small arc apart across the wrap.
inline double angle_error_rad(double a_rad, double b_rad) {
    const double direct = std::abs(a_rad - b_rad);
    const double wrapped = kPi - std::abs(a_rad) - std::abs(b_rad);
    return std::min(direct, std::abs(wrapped));
}

// Greedy strongest-first one-to-one pairing. An estimate may claim a truth
// path of the same source within the distance and sin-phase gates; leftover
// estimates are false alarms, leftover truths are misses.
inline MatchReport match_estimates(const std::vector<PathEstimate>& estimates,
                                   const std::vector<MultipathComponent>& truth,
                                   const MatchGates& gates, double bin_distance_m,
                                   double kappa) {
    MatchReport report;
    const double gate_distance = gates.max_distance_bins * bin_distance_m + 1e-12;
    const double gate_phase = gates.max_sin_phase + 1e-12;

    std::vector<int> order(estimates.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return estimates[static_cast<std::size_t>(a)].magnitude >
               estimates[static_cast<std::size_t>(b)].magnitude;
    });

    std::vector<char> truth_taken(truth.size(), 0);
    double sq_distance = 0.0, sq_aoa = 0.0, sq_doppler = 0.0;
    int doppler_pairs = 0;
    for (int ei : order) {
        const PathEstimate& est = estimates[static_cast<std::size_t>(ei)];
        int best = -1;
        double best_score = 0.0;
        for (std::size_t ti = 0; ti < truth.size(); ++ti) {
            if (truth_taken[ti] || truth[ti].source_id != est.source_id)
                continue;
            const double d_err =
                std::abs(est.distance_m - truth[ti].delay_bin * bin_distance_m);
            const double p_err = std::abs(wrap_phase(
                est.aoa_sin_phase - kappa * std::sin(truth[ti].aoa_rad)));
            if (d_err > gate_distance || p_err > gate_phase)
                continue;
            const double score = d_err / gate_distance + p_err / gate_phase;
            if (best < 0 || score < best_score) {
                best = static_cast<int>(ti);
                best_score = score;
            }
        }
        if (best < 0)
            continue;
        truth_taken[static_cast<std::size_t>(best)] = 1;
        report.pairs.push_back({ei, best});

        const auto& tp = truth[static_cast<std::size_t>(best)];
        const double d_err = est.distance_m - tp.delay_bin * bin_distance_m;
        sq_distance += d_err * d_err;
        const double aoa_err =
            angle_error_rad(est.aoa_rad, principal_angle_rad(tp.aoa_rad)) * 180.0 / kPi;
        sq_aoa += aoa_err * aoa_err;
        if (est.doppler_hz) {
            const double f_err = *est.doppler_hz - tp.doppler_hz;
            sq_doppler += f_err * f_err;
            ++doppler_pairs;
        }
    }

    report.detection_rate =
        truth.empty() ? 0.0 : static_cast<double>(report.pairs.size()) / truth.size();
    report.false_alarm_count =
        static_cast<int>(estimates.size()) - static_cast<int>(report.pairs.size());
    if (!report.pairs.empty()) {
        report.rmse_distance_m = std::sqrt(sq_distance / report.pairs.size());
        report.rmse_aoa_deg = std::sqrt(sq_aoa / report.pairs.size());
    }
    if (doppler_pairs > 0)
        report.rmse_doppler_hz = std::sqrt(sq_doppler / doppler_pairs);
    return report;
}

// --- CSV -------------------------------------------------------------------

namespace detail {

inline std::string format_g9(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

} // namespace detail

// One row per path, ground truth and estimates side by side. Angle columns
// carry the phase of e^{i kappa sin(angle)}, the quantity a half-wavelength
// array resolves. Absent values (AoD without a transmit array, Doppler from
// a single block) stay empty.
inline void emit_csv(const std::vector<PathEstimate>& estimates, const Scene& truth,
                     std::ostream& out, double bin_distance_m, double kappa,
                     bool include_truth_aod = true) {
    out << "kind,source_id,distance_m,aoa_sin_phase,aod_sin_phase,doppler_hz,magnitude\n";

    std::vector<const MultipathComponent*> actual;
    actual.reserve(truth.paths.size());
    for (const auto& p : truth.paths)
        actual.push_back(&p);
    std::stable_sort(actual.begin(), actual.end(),
                     [](const MultipathComponent* a, const MultipathComponent* b) {
                         if (a->source_id != b->source_id)
                             return a->source_id < b->source_id;
                         return a->delay_bin < b->delay_bin;
                     });
    for (const auto* p : actual) {
        out << "actual," << p->source_id << ',' << detail::format_g9(p->delay_bin * bin_distance_m)
            << ',' << detail::format_g9(wrap_phase(kappa * std::sin(p->aoa_rad))) << ',';
        if (include_truth_aod)
            out << detail::format_g9(wrap_phase(kappa * std::sin(p->aod_rad)));
        out << ',' << detail::format_g9(p->doppler_hz) << ','
            << detail::format_g9(std::abs(p->amplitude)) << '\n';
    }

    std::vector<const PathEstimate*> ests;
    ests.reserve(estimates.size());
    for (const auto& e : estimates)
        ests.push_back(&e);
    std::stable_sort(ests.begin(), ests.end(), [](const PathEstimate* a, const PathEstimate* b) {
        if (a->source_id != b->source_id)
            return a->source_id < b->source_id;
        if (a->delay_bin != b->delay_bin)
            return a->delay_bin < b->delay_bin;
        if (a->magnitude != b->magnitude)
            return a->magnitude > b->magnitude;
        return a->aoa_sin_phase < b->aoa_sin_phase;
    });
    for (const auto* e : ests) {
        out << "estimated," << e->source_id << ',' << detail::format_g9(e->distance_m) << ','
            << detail::format_g9(wrap_phase(e->aoa_sin_phase)) << ',';
        if (e->aod_sin_phase)
            out << detail::format_g9(wrap_phase(*e->aod_sin_phase));
        out << ',';
        if (e->doppler_hz)
            out << detail::format_g9(*e->doppler_hz);
        out << ',' << detail::format_g9(e->magnitude) << '\n';
    }
}

inline void emit_csv(const std::vector<PathEstimate>& estimates, const Scene& truth,
                     const std::string& path, double bin_distance_m, double kappa,
                     bool include_truth_aod = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("emit_csv: cannot open " + path + " for writing");
    emit_csv(estimates, truth, out, bin_distance_m, kappa, include_truth_aod);
    out.flush();
    if (!out)
        throw std::runtime_error("emit_csv: write failed for " + path);
}

struct CsvRecord {
    std::string kind;
    int source_id = 0;
    double distance_m = 0.0;
    double aoa_sin_phase = 0.0;
    std::optional<double> aod_sin_phase;
    std::optional<double> doppler_hz;
    double magnitude = 0.0;
};

inline std::vector<CsvRecord> parse_csv(std::istream& in) {
    std::vector<CsvRecord> records;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (header) {
            require(line == "kind,source_id,distance_m,aoa_sin_phase,aod_sin_phase,"
                            "doppler_hz,magnitude",
                    "parse_csv: unexpected header: " + line);
            header = false;
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
        require(fields.size() == 7, "parse_csv: expected 7 fields, got row: " + line);
        CsvRecord rec;
        rec.kind = fields[0];
        require(rec.kind == "actual" || rec.kind == "estimated",
                "parse_csv: unknown kind " + rec.kind);
        rec.source_id = std::stoi(fields[1]);
        rec.distance_m = std::stod(fields[2]);
        rec.aoa_sin_phase = std::stod(fields[3]);
        if (!fields[4].empty())
            rec.aod_sin_phase = std::stod(fields[4]);
        if (!fields[5].empty())
            rec.doppler_hz = std::stod(fields[5]);
        rec.magnitude = std::stod(fields[6]);
        records.push_back(rec);
    }
    return records;
}

// --- experiment ------------------------------------------------------------

struct ExperimentResult {
    Scene truth;
    std::vector<PathEstimate> estimates;
    MatchReport report;
    std::vector<BlockSolution> solutions; // per OFDM block
};

inline ExperimentConfig resolve_auto_settings(ExperimentConfig config) {
    if (config.auto_min_magnitude) {
        if (config.noise_dbm_total && config.tx_power_dbm)
            config.extraction.threshold.min_magnitude =
                std::sqrt(dbm_to_mw(*config.noise_dbm_total) /
                          dbm_to_mw(*config.tx_power_dbm));
        else
            config.extraction.threshold.min_magnitude = 0.0;
    }
    return config;
}

namespace detail {

// Scene as the pipeline consumes it: source count padded to the configured
// K, delay-bin budget resolved and checked.
inline Scene normalized_scene(const ExperimentConfig& config, Scene scene) {
    int max_bin = 0;
    for (const auto& p : scene.paths)
        max_bin = std::max(max_bin, p.delay_bin);
    const int num_delay_bins = config.num_delay_bins > 0
                                   ? config.num_delay_bins
                                   : std::max(scene.num_delay_bins, max_bin + 1);
    require(max_bin < num_delay_bins, "run_experiment: scene needs " +
                                          std::to_string(max_bin + 1) +
                                          " delay bins, configured " +
                                          std::to_string(num_delay_bins));
    require(scene.num_sources <= config.num_sources,
            "run_experiment: scene has more sources than configured");
    scene.num_sources = config.num_sources;
    scene.num_delay_bins = num_delay_bins;
    return scene;
}

} // namespace detail

// Deterministic observation synthesis for a given config and ground truth;
// the same record run_experiment solves against.
inline SensingMeasurement build_measurement(const ExperimentConfig& raw_config, Scene scene) {
    const ExperimentConfig config = resolve_auto_settings(raw_config);
    config.validate();
    scene = detail::normalized_scene(config, std::move(scene));

    const SubcarrierAllocation allocation =
        make_allocation(config.allocation, config.ofdm.num_subcarriers);
    const SymbolGrid symbols =
        generate_symbols(config.num_sources, config.tx_antennas, allocation,
                         config.num_blocks, mix_seed(config.seed, 2));

    SynthesisOptions synth;
    synth.mode = config.mode;
    synth.rx_array = config.rx_array();
    synth.tx_array = config.tx_array();
    synth.noise_dbm_total = config.noise_dbm_total;
    synth.tx_power_dbm = config.tx_power_dbm;
    synth.noise_seed = mix_seed(config.seed, 3);
    return synthesize_received(scene, symbols, config.ofdm, scene.num_delay_bins,
                               config.oversampling, synth);
}

// Runs the full pipeline on a caller-provided ground-truth scene.
inline ExperimentResult run_experiment(const ExperimentConfig& raw_config, Scene scene) {
    const ExperimentConfig config = resolve_auto_settings(raw_config);
    config.validate();
    scene = detail::normalized_scene(config, std::move(scene));
    const SensingMeasurement measurement = build_measurement(config, scene);
    const SubcarrierAllocation& allocation = measurement.allocation;

    ExperimentResult result;
    result.truth = std::move(scene);
    result.solutions.reserve(static_cast<std::size_t>(config.num_blocks));
    for (int t = 0; t < config.num_blocks; ++t) {
        StoppingRule rule = config.solver_stop;
        if (rule.kind == StoppingRule::Kind::kResidualRatio && rule.residual_ratio <= 0.0) {
            // Track the expected noise floor ||Z||_F ~= sqrt(Ns*M*sigma^2).
            const double y_norm = measurement.received[static_cast<std::size_t>(t)].norm();
            const double floor =
                std::sqrt(static_cast<double>(allocation.size()) * config.rx_antennas *
                          measurement.noise_variance_per_subcarrier);
            rule.residual_ratio = y_norm > 0.0 ? std::min(0.999, floor / y_norm) : 0.0;
        }
        result.solutions.push_back(
            solve_block_mmv(measurement.sensing[static_cast<std::size_t>(t)],
                            measurement.received[static_cast<std::size_t>(t)],
                            measurement.block_size(), rule));
    }

    result.estimates = extract_paths(result.solutions, measurement, config.tx_array(),
                                     config.rx_array(), config.extraction);
    result.report = match_estimates(result.estimates, result.truth.paths, config.gates,
                                    config.bin_distance_m(), config.kappa());
    return result;
}

// Runs the full pipeline: cluster scene -> symbols -> received observations
// -> per-block sparse solve -> path extraction -> ground-truth matching.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    Scene scene = generate_scene(config.cluster, config.num_sources, mix_seed(config.seed, 1),
                                 config.ofdm, config.oversampling);
    return run_experiment(config, std::move(scene));
}

// --- presets and config files ----------------------------------------------

// Dense downlink sensing scenario: all subcarriers, 4x4 MIMO, four radio
// units each reflected by a cluster of 10-15 scatterers.
inline ExperimentConfig downlink_default_preset() {
    ExperimentConfig config;
    config.ofdm = OfdmConfig{1024, 100e6, 0.125, 2.35e9};
    config.mode = SensingMode::kDownlink;
    config.num_sources = 4;
    config.rx_antennas = 4;
    config.tx_antennas = 4;
    config.oversampling = 1;
    config.num_blocks = 8;
    config.allocation = AllocationPattern::full();
    config.cluster = ClusterConfig{};
    config.tx_power_dbm = 20.0;
    config.noise_dbm_total = -97.0;
    config.solver_stop = StoppingRule::residual(0.0);
    config.auto_min_magnitude = true;
    config.seed = 1;
    return config;
}

// Sparse uplink scenario: 256 interleaved subcarriers, single-antenna mobile
// transmitters, same cluster statistics.
inline ExperimentConfig uplink_default_preset() {
    ExperimentConfig config = downlink_default_preset();
    config.mode = SensingMode::kUplink;
    config.tx_antennas = 1;
    config.allocation = AllocationPattern::interleaved(4);
    return config;
}

inline ExperimentConfig preset(const std::string& name) {
    if (name == "downlink_default")
        return downlink_default_preset();
    if (name == "uplink_default")
        return uplink_default_preset();
    throw std::invalid_argument("preset: unknown preset " + name +
                                " (available: downlink_default, uplink_default)");
}

inline StoppingRule parse_stopping_rule(const std::string& text) {
    const std::size_t colon = text.find(':');
    require(colon != std::string::npos,
            "stopping rule must look like fixed:<L>, residual:<eps>|auto or plateau:<delta>");
    const std::string kind = text.substr(0, colon);
    const std::string arg = text.substr(colon + 1);
    if (kind == "fixed")
        return StoppingRule::fixed_sparsity(std::stoi(arg));
    if (kind == "residual")
        return StoppingRule::residual(arg == "auto" ? 0.0 : std::stod(arg));
    if (kind == "plateau")
        return StoppingRule::plateau(std::stod(arg));
    throw std::invalid_argument("unknown stopping rule kind: " + kind);
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline std::optional<double> parse_optional_dbm(const std::string& value) {
    if (value == "none" || value == "off")
        return std::nullopt;
    return std::stod(value);
}

} // namespace detail

// Flat key = value configuration with dotted section names; # starts a
// comment. Unknown keys are errors so typos do not silently change runs.
inline void apply_config_entry(ExperimentConfig& config, const std::string& key,
                               const std::string& value) {
    try {
        if (key == "ofdm.num_subcarriers")
            config.ofdm.num_subcarriers = std::stoi(value);
        else if (key == "ofdm.bandwidth_hz")
            config.ofdm.bandwidth_hz = std::stod(value);
        else if (key == "ofdm.cp_fraction")
            config.ofdm.cp_fraction = std::stod(value);
        else if (key == "ofdm.carrier_hz")
            config.ofdm.carrier_hz = std::stod(value);
        else if (key == "mode") {
            if (value == "downlink")
                config.mode = SensingMode::kDownlink;
            else if (value == "uplink")
                config.mode = SensingMode::kUplink;
            else
                throw std::invalid_argument("mode must be downlink or uplink");
        } else if (key == "num_sources")
            config.num_sources = std::stoi(value);
        else if (key == "rx_antennas")
            config.rx_antennas = std::stoi(value);
        else if (key == "tx_antennas")
            config.tx_antennas = std::stoi(value);
        else if (key == "oversampling")
            config.oversampling = std::stoi(value);
        else if (key == "num_delay_bins")
            config.num_delay_bins = std::stoi(value);
        else if (key == "num_blocks")
            config.num_blocks = std::stoi(value);
        else if (key == "spacing_over_wavelength")
            config.spacing_over_wavelength = std::stod(value);
        else if (key == "allocation.pattern") {
            if (value == "full")
                config.allocation.kind = AllocationKind::kFull;
            else if (value == "interleaved")
                config.allocation.kind = AllocationKind::kInterleaved;
            else if (value == "contiguous")
                config.allocation.kind = AllocationKind::kContiguous;
            else if (value == "random")
                config.allocation.kind = AllocationKind::kRandom;
            else
                throw std::invalid_argument("unknown allocation pattern " + value);
        } else if (key == "allocation.step")
            config.allocation.step = std::stoi(value);
        else if (key == "allocation.start")
            config.allocation.start = std::stoi(value);
        else if (key == "allocation.length")
            config.allocation.length = std::stoi(value);
        else if (key == "allocation.count")
            config.allocation.count = std::stoi(value);
        else if (key == "allocation.seed")
            config.allocation.seed = std::stoull(value);
        else if (key == "cluster.num_paths_min")
            config.cluster.num_paths_min = std::stoi(value);
        else if (key == "cluster.num_paths_max")
            config.cluster.num_paths_max = std::stoi(value);
        else if (key == "cluster.direction_min_deg")
            config.cluster.direction_min_deg = std::stod(value);
        else if (key == "cluster.direction_max_deg")
            config.cluster.direction_max_deg = std::stod(value);
        else if (key == "cluster.distance_min_m")
            config.cluster.distance_min_m = std::stod(value);
        else if (key == "cluster.distance_max_m")
            config.cluster.distance_max_m = std::stod(value);
        else if (key == "cluster.doppler_min_hz")
            config.cluster.doppler_min_hz = std::stod(value);
        else if (key == "cluster.doppler_max_hz")
            config.cluster.doppler_max_hz = std::stod(value);
        else if (key == "cluster.pathloss_exponent")
            config.cluster.pathloss_exponent = std::stod(value);
        else if (key == "cluster.timing_offset_s")
            config.cluster.timing_offset_s = std::stod(value);
        else if (key == "cluster.offset_direction_step_deg")
            config.cluster.offset_direction_step_deg = std::stod(value);
        else if (key == "cluster.offset_distance_step_m")
            config.cluster.offset_distance_step_m = std::stod(value);
        else if (key == "cluster.offset_doppler_step_hz")
            config.cluster.offset_doppler_step_hz = std::stod(value);
        else if (key == "tx_power_dbm")
            config.tx_power_dbm = detail::parse_optional_dbm(value);
        else if (key == "noise_dbm_total")
            config.noise_dbm_total = detail::parse_optional_dbm(value);
        else if (key == "solver.kind")
            config.solver_kind = value;
        else if (key == "solver.stop") {
            const int max_iter = config.solver_stop.max_iterations;
            config.solver_stop = parse_stopping_rule(value);
            config.solver_stop.max_iterations = max_iter;
        } else if (key == "solver.max_iterations")
            config.solver_stop.max_iterations = std::stoi(value);
        else if (key == "extraction.source_energy_ratio")
            config.extraction.source_energy_ratio = std::stod(value);
        else if (key == "extraction.coherence_threshold")
            config.extraction.coherence_threshold = std::stod(value);
        else if (key == "extraction.scan_grid")
            config.extraction.scan_grid_size = std::stoi(value);
        else if (key == "extraction.min_magnitude") {
            if (value == "auto") {
                config.auto_min_magnitude = true;
            } else {
                config.auto_min_magnitude = false;
                config.extraction.threshold.min_magnitude = std::stod(value);
            }
        } else if (key == "extraction.top_k")
            config.extraction.threshold.top_k = std::stoi(value);
        else if (key == "match.max_distance_bins")
            config.gates.max_distance_bins = std::stod(value);
        else if (key == "match.max_sin_phase")
            config.gates.max_sin_phase = std::stod(value);
        else if (key == "seed")
            config.seed = std::stoull(value);
        else
            throw std::invalid_argument("unknown key");
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config: key '" + key + "' = '" + value +
                                    "': " + e.what());
    } catch (const std::out_of_range&) {
        throw std::invalid_argument("config: key '" + key + "' = '" + value +
                                    "': value out of range");
    }
}

inline ExperimentConfig load_config(std::istream& in, ExperimentConfig base = {}) {
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(line_number) +
                                        " is not a key = value pair: " + line);
        apply_config_entry(base, detail::trim(line.substr(0, eq)),
                           detail::trim(line.substr(eq + 1)));
    }
    return base;
}

inline ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("config: cannot open " + path);
    return load_config(in, std::move(base));
}

} // namespace ofdmsense

#endif // OFDMSENSE_EXPERIMENT_HPP
