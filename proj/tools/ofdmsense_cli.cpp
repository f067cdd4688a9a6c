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

#include "ofdmsense/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

// x.csv -> x_t3.csv; used when several trials each emit a file
std::string with_trial_suffix(const std::string& path, int trial, int trials) {
    if (trials <= 1)
        return path;
    const std::size_t dot = path.find_last_of('.');
    const std::size_t slash = path.find_last_of("/\\");
    const bool has_ext = dot != std::string::npos &&
                         (slash == std::string::npos || dot > slash);
    const std::string stem = has_ext ? path.substr(0, dot) : path;
    const std::string ext = has_ext ? path.substr(dot) : "";
    return stem + "_t" + std::to_string(trial) + ext;
}

std::string format_optional(const std::optional<double>& value, const char* unit) {
    if (!value)
        return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g%s", *value, unit);
    return buf;
}

void print_summary(int trial, std::uint64_t seed, const ofdmsense::ExperimentResult& result) {
    const auto& r = result.report;
    std::printf("trial %d: seed %llu, truth paths %zu, estimates %zu, detection %.3f, "
                "false alarms %d, rmse distance %s, rmse aoa %s, rmse doppler %s\n",
                trial, static_cast<unsigned long long>(seed), result.truth.paths.size(),
                result.estimates.size(), r.detection_rate, r.false_alarm_count,
                format_optional(r.rmse_distance_m, " m").c_str(),
                format_optional(r.rmse_aoa_deg, " deg").c_str(),
                format_optional(r.rmse_doppler_hz, " Hz").c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiuser MIMO-OFDM network sensing simulator: generates multipath "
                 "scenes, synthesizes downlink/uplink sensing measurements and recovers "
                 "per-path delay, angle, Doppler and amplitude"};

    std::string preset_name = "downlink_default";
    std::string config_path, out_path, scene_out_path, scene_in_path, solver_stop;
    std::string measurement_out_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> tx_power_dbm;
    int trials = 1;

    app.add_option("--preset", preset_name,
                   "configuration preset: downlink_default or uplink_default")
        ->capture_default_str();
    app.add_option("--config", config_path,
                   "configuration file with key = value lines, applied over the preset");
    app.add_option("--seed", seed, "base RNG seed; trial i runs with seed + i");
    app.add_option("--tx-power-dbm", tx_power_dbm, "transmit power override in dBm");
    app.add_option("--out", out_path, "write the estimate/ground-truth CSV here");
    app.add_option("--trials", trials, "number of Monte-Carlo repetitions")
        ->check(CLI::PositiveNumber);
    app.add_option("--solver-stop", solver_stop,
                   "stopping rule: fixed:<L>, residual:<eps>|residual:auto or plateau:<delta>");
    app.add_option("--scene-out", scene_out_path, "export the ground-truth scene table here");
    app.add_option("--scene-in", scene_in_path,
                   "import a scene table instead of generating one");
    app.add_option("--measurement-out", measurement_out_path,
                   "dump the received observations as a text table here");

    CLI11_PARSE(app, argc, argv);

    try {
        ofdmsense::ExperimentConfig config = ofdmsense::preset(preset_name);
        if (!config_path.empty())
            config = ofdmsense::load_config_file(config_path, config);
        if (seed)
            config.seed = *seed;
        if (tx_power_dbm)
            config.tx_power_dbm = tx_power_dbm;
        if (!solver_stop.empty()) {
            const int max_iter = config.solver_stop.max_iterations;
            config.solver_stop = ofdmsense::parse_stopping_rule(solver_stop);
            config.solver_stop.max_iterations = max_iter;
        }
        config.validate();

        std::optional<ofdmsense::Scene> imported;
        if (!scene_in_path.empty()) {
            std::ifstream in(scene_in_path);
            if (!in)
                throw std::runtime_error("cannot open scene file " + scene_in_path);
            imported = ofdmsense::read_scene(in);
        }

        const std::string tx_text =
            config.tx_power_dbm ? format_optional(config.tx_power_dbm, " dBm") : "unit symbols";
        const std::string noise_text = format_optional(config.noise_dbm_total, " dBm");
        std::printf("mode %s, N %d, K %d, M %d, M_T %d, g %d, blocks %d, tx %s, noise %s\n",
                    to_string(config.mode), config.ofdm.num_subcarriers, config.num_sources,
                    config.rx_antennas, config.tx_antennas, config.oversampling,
                    config.num_blocks, tx_text.c_str(), noise_text.c_str());

        // Trials are independent; run them concurrently and report in order.
        std::vector<std::future<ofdmsense::ExperimentResult>> futures;
        for (int trial = 0; trial < trials; ++trial) {
            ofdmsense::ExperimentConfig trial_config = config;
            trial_config.seed = config.seed + static_cast<std::uint64_t>(trial);
            futures.push_back(std::async(std::launch::async, [trial_config, &imported] {
                return imported ? run_experiment(trial_config, *imported)
                                : run_experiment(trial_config);
            }));
        }

        std::size_t matched_total = 0, truth_total = 0;
        int false_alarms_total = 0;
        for (int trial = 0; trial < trials; ++trial) {
            const ofdmsense::ExperimentResult result = futures[static_cast<std::size_t>(trial)].get();
            print_summary(trial, config.seed + static_cast<std::uint64_t>(trial), result);
            matched_total += result.report.pairs.size();
            truth_total += result.truth.paths.size();
            false_alarms_total += result.report.false_alarm_count;

            if (!out_path.empty())
                ofdmsense::emit_csv(result.estimates, result.truth,
                                    with_trial_suffix(out_path, trial, trials),
                                    config.bin_distance_m(), config.kappa(),
                                    config.tx_antennas >= 2);
            if (!scene_out_path.empty()) {
                const std::string path = with_trial_suffix(scene_out_path, trial, trials);
                std::ofstream out(path, std::ios::binary);
                if (!out)
                    throw std::runtime_error("cannot open scene output " + path);
                ofdmsense::write_scene(result.truth, out);
            }
            if (!measurement_out_path.empty()) {
                ofdmsense::ExperimentConfig trial_config = config;
                trial_config.seed = config.seed + static_cast<std::uint64_t>(trial);
                const std::string path =
                    with_trial_suffix(measurement_out_path, trial, trials);
                std::ofstream out(path, std::ios::binary);
                if (!out)
                    throw std::runtime_error("cannot open measurement output " + path);
                ofdmsense::write_measurement(
                    ofdmsense::build_measurement(trial_config, result.truth), out);
            }
        }

        if (trials > 1)
            std::printf("aggregate: detection %.3f (%zu/%zu), false alarms %d\n",
                        truth_total ? static_cast<double>(matched_total) / truth_total : 0.0,
                        matched_total, truth_total, false_alarms_total);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
