// SPDX-License-Identifier: Apache-2.0
//
// Unit tests for measurement synthesis and the sensing-matrix assembly.
// The core check ties the path-by-path synthesis route to the Kronecker
// model route: Y must equal W * V * A^T built from ground truth.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ofdmsense/measurement.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

using namespace ofdmsense;

namespace {

Scene random_scene(Rng& rng, int num_sources, int num_bins, int num_paths) {
    Scene scene;
    scene.num_sources = num_sources;
    scene.num_delay_bins = num_bins;
    for (int l = 0; l < num_paths; ++l) {
        MultipathComponent p;
        p.source_id = static_cast<int>(rng.uniform_int(0, num_sources - 1));
        p.delay_bin = static_cast<int>(rng.uniform_int(0, num_bins - 1));
        p.doppler_hz = rng.uniform(0.0, 600.0);
        p.aoa_rad = rng.uniform(-1.4, 1.4);
        p.aod_rad = rng.uniform(-1.4, 1.4);
        p.amplitude = rng.uniform(0.5, 2.0) * rng.unit_phase();
        scene.paths.push_back(p);
    }
    return scene;
}

SymbolGrid constant_symbols(const SubcarrierAllocation& alloc, int num_sources,
                            int tx_antennas, int num_blocks, const Complex& value) {
    SymbolGrid grid;
    grid.allocation = alloc;
    grid.num_sources = num_sources;
    grid.tx_antennas = tx_antennas;
    for (int t = 0; t < num_blocks; ++t)
        grid.blocks.push_back(CMat::Constant(num_sources * tx_antennas, alloc.size(), value));
    return grid;
}

} // namespace

TEST_CASE("empty scene without noise synthesizes all-zero observations") {
    const OfdmConfig ofdm{64, 100e6, 0.125, 2.35e9};
    const auto alloc = make_allocation(AllocationPattern::full(), 64);
    const auto symbols = generate_symbols(2, 2, alloc, 3, 5);
    Scene scene;
    scene.num_sources = 2;
    scene.num_delay_bins = 8;

    SynthesisOptions options;
    options.rx_array = UniformLinearArray(2, 0.5);
    options.tx_array = UniformLinearArray(2, 0.5);
    const auto meas = synthesize_received(scene, symbols, ofdm, 8, 1, options);
    REQUIRE(meas.received.size() == 3);
    for (const auto& y : meas.received)
        CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unit path with unit symbols gives all-one observations") {
    const OfdmConfig ofdm{8, 100e6, 0.125, 2.35e9};
    const auto alloc = make_allocation(AllocationPattern::full(), 8);
    const auto symbols = constant_symbols(alloc, 1, 1, 2, Complex(1.0, 0.0));

    Scene scene;
    scene.num_sources = 1;
    scene.num_delay_bins = 4;
    MultipathComponent p;
    p.amplitude = Complex(1.0, 0.0);
    scene.paths.push_back(p);

    SynthesisOptions options;
    options.rx_array = UniformLinearArray(1, 0.5);
    options.tx_array = UniformLinearArray(1, 0.5);
    const auto meas = synthesize_received(scene, symbols, ofdm, 4, 1, options);
    for (const auto& y : meas.received)
        for (Eigen::Index j = 0; j < y.rows(); ++j)
            CHECK(std::abs(y(j, 0) - Complex(1.0, 0.0)) < 1e-12);
}

TEST_CASE("total noise splits evenly across subcarriers") {
    const OfdmConfig ofdm{1024, 100e6, 0.125, 2.35e9};
    const auto alloc = make_allocation(AllocationPattern::full(), 1024);
    const auto symbols = generate_symbols(4, 4, alloc, 1, 7);
    Scene scene;
    scene.num_sources = 4;
    scene.num_delay_bins = 4;

    SynthesisOptions options;
    options.rx_array = UniformLinearArray(4, 0.5);
    options.tx_array = UniformLinearArray(4, 0.5);
    options.noise_dbm_total = -97.0;
    options.tx_power_dbm = 20.0;
    const auto meas = synthesize_received(scene, symbols, ofdm, 4, 1, options);

    // -97 dBm across 1024 subcarriers: -127.103 dBm per subcarrier
    CHECK(mw_to_dbm(meas.noise_variance_per_subcarrier) ==
          doctest::Approx(-127.10299956639813).epsilon(1e-12));
    // 100 mW over 1024 subcarriers and 4 antennas: amplitude 0.15625
    CHECK(meas.symbol_scale == doctest::Approx(0.15625).epsilon(1e-15));
}

TEST_CASE("sensing matrix has the documented shape and Kronecker layout") {
    const auto alloc = make_allocation(AllocationPattern::interleaved(4), 1024);
    const auto symbols = generate_symbols(4, 1, alloc, 1, 11);
    const CMat w = build_sensing_matrix(symbols, 0, 128, 1);
    CHECK(w.rows() == 256);
    CHECK(w.cols() == 512);

    // column l*4+i of row j must equal c_n[l] * x[i]
    for (int j : {0, 17, 255}) {
        const int n = alloc.indices[static_cast<std::size_t>(j)];
        const auto c = delay_phase_vector<double>(n, 128, 1, 1024);
        for (int l : {0, 1, 64, 127})
            for (int i = 0; i < 4; ++i)
                CHECK(std::abs(w(j, l * 4 + i) - c(l) * symbols.blocks[0](i, j)) < 1e-14);
    }
}

TEST_CASE("basis-vector symbols reduce W to a strided delay dictionary") {
    const int n_sub = 32, bins = 8, k = 2, m_t = 2;
    const auto alloc = make_allocation(AllocationPattern::full(), n_sub);
    SymbolGrid symbols = constant_symbols(alloc, k, m_t, 1, Complex(0.0, 0.0));
    symbols.blocks[0].row(0).setConstant(Complex(1.0, 0.0)); // e_1 on every subcarrier

    const CMat w = build_sensing_matrix(symbols, 0, bins, 1);
    for (int j = 0; j < alloc.size(); ++j) {
        const auto c = delay_phase_vector<double>(alloc.indices[static_cast<std::size_t>(j)],
                                                  bins, 1, n_sub);
        for (int l = 0; l < bins; ++l)
            for (int i = 0; i < k * m_t; ++i) {
                const Complex expected = i == 0 ? c(l) : Complex(0.0, 0.0);
                CHECK(std::abs(w(j, l * k * m_t + i) - expected) < 1e-14);
            }
    }
}

TEST_CASE("reconstruction identity: synthesis equals W * V * A^T from ground truth") {
    Rng rng(2024);
    for (int trial = 0; trial < 12; ++trial) {
        const int n_sub = 32 << rng.uniform_int(0, 2); // 32, 64 or 128
        const bool uplink = rng.uniform() < 0.5;
        const int m_rx = 2 << rng.uniform_int(0, 1);
        const int m_tx = uplink ? static_cast<int>(rng.uniform_int(1, 2)) : m_rx;
        const int k = static_cast<int>(rng.uniform_int(1, 4));
        const int g = static_cast<int>(rng.uniform_int(1, 2));
        const int bins = static_cast<int>(rng.uniform_int(4, 12));
        const int t_blocks = static_cast<int>(rng.uniform_int(2, 4));
        const int paths = static_cast<int>(rng.uniform_int(1, 6));

        const OfdmConfig ofdm{n_sub, 100e6, 0.125, 2.35e9};
        AllocationPattern pattern;
        switch (rng.uniform_int(0, 2)) {
        case 0: pattern = AllocationPattern::full(); break;
        case 1: pattern = AllocationPattern::interleaved(2); break;
        default: pattern = AllocationPattern::random(n_sub / 2, 7 + trial); break;
        }
        const auto alloc = make_allocation(pattern, n_sub);
        const auto symbols = generate_symbols(k, m_tx, alloc, t_blocks, 100 + trial);
        const Scene scene = random_scene(rng, k, bins, paths);

        SynthesisOptions options;
        options.mode = uplink ? SensingMode::kUplink : SensingMode::kDownlink;
        options.rx_array = UniformLinearArray(m_rx, 0.5);
        options.tx_array = UniformLinearArray(m_tx, 0.5);
        if (rng.uniform() < 0.5)
            options.tx_power_dbm = 20.0;
        const auto meas = synthesize_received(scene, symbols, ofdm, bins, g, options);

        for (int t = 0; t < t_blocks; ++t) {
            const CMat truth = ground_truth_coefficients(
                scene, t, ofdm.block_period_s(), options.tx_array, options.rx_array, bins);
            const CMat& y = meas.received[static_cast<std::size_t>(t)];
            const CMat model = meas.sensing[static_cast<std::size_t>(t)] * truth;
            const double rel = (y - model).cwiseAbs().maxCoeff() /
                               std::max(y.cwiseAbs().maxCoeff(), 1e-300);
            CHECK(rel < 1e-10);
        }
    }
}

TEST_CASE("injected noise has the configured per-element variance") {
    const int n_sub = 512;
    const OfdmConfig ofdm{n_sub, 100e6, 0.125, 2.35e9};
    const auto alloc = make_allocation(AllocationPattern::full(), n_sub);
    const int t_blocks = 100;
    const auto symbols = generate_symbols(1, 2, alloc, t_blocks, 3);
    Rng rng(17);
    const Scene scene = random_scene(rng, 1, 4, 2);

    SynthesisOptions options;
    options.rx_array = UniformLinearArray(2, 0.5);
    options.tx_array = UniformLinearArray(2, 0.5);
    options.noise_dbm_total = -10.0;
    options.noise_seed = 99;
    const auto meas = synthesize_received(scene, symbols, ofdm, 4, 1, options);

    double sum_sq = 0.0;
    long samples = 0;
    for (int t = 0; t < t_blocks; ++t) {
        const CMat truth = ground_truth_coefficients(
            scene, t, ofdm.block_period_s(), options.tx_array, options.rx_array, 4);
        const CMat noise = meas.received[static_cast<std::size_t>(t)] -
                           meas.sensing[static_cast<std::size_t>(t)] * truth;
        sum_sq += noise.squaredNorm();
        samples += noise.size();
    }
    REQUIRE(samples >= 100000);
    const double empirical = sum_sq / static_cast<double>(samples);
    CHECK(empirical == doctest::Approx(meas.noise_variance_per_subcarrier).epsilon(0.05));
}

TEST_CASE("W varies over blocks only through the symbols") {
    const auto alloc = make_allocation(AllocationPattern::interleaved(2), 64);
    SymbolGrid symbols = generate_symbols(2, 1, alloc, 2, 5);
    symbols.blocks[1] = symbols.blocks[0]; // same symbols -> same W
    const CMat w0 = build_sensing_matrix(symbols, 0, 8, 1);
    const CMat w1 = build_sensing_matrix(symbols, 1, 8, 1);
    CHECK((w0 - w1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("measurement text dump carries every observation entry") {
    const OfdmConfig ofdm{16, 100e6, 0.125, 2.35e9};
    const auto alloc = make_allocation(AllocationPattern::interleaved(2), 16);
    const auto symbols = generate_symbols(1, 2, alloc, 2, 4);
    Rng rng(6);
    const Scene scene = random_scene(rng, 1, 4, 2);

    SynthesisOptions options;
    options.rx_array = UniformLinearArray(2, 0.5);
    options.tx_array = UniformLinearArray(2, 0.5);
    const auto meas = synthesize_received(scene, symbols, ofdm, 4, 1, options);

    std::stringstream out;
    write_measurement(meas, out);

    std::string line;
    std::getline(out, line);
    CHECK(line == "# mode downlink, blocks 2, rows 8, rx 2, tx 2, sources 1, "
                  "delay_bins 4, oversampling 1");
    int t = -1, row = 0, data_rows = 0;
    while (std::getline(out, line)) {
        if (line.rfind("# block", 0) == 0) {
            ++t;
            row = 0;
            continue;
        }
        double re0, im0, re1, im1;
        REQUIRE(std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg", &re0, &im0, &re1, &im1) == 4);
        const CMat& y = meas.received[static_cast<std::size_t>(t)];
        CHECK(re0 == y(row, 0).real());
        CHECK(im0 == y(row, 0).imag());
        CHECK(re1 == y(row, 1).real());
        CHECK(im1 == y(row, 1).imag());
        ++row;
        ++data_rows;
    }
    CHECK(t == 1);
    CHECK(data_rows == 16); // 8 subcarriers x 2 blocks
}

TEST_CASE("scene and symbol mismatches are rejected") {
    const OfdmConfig ofdm{64, 100e6, 0.125, 2.35e9};
    const auto alloc = make_allocation(AllocationPattern::full(), 64);
    const auto symbols = generate_symbols(2, 2, alloc, 2, 5);

    SynthesisOptions options;
    options.rx_array = UniformLinearArray(2, 0.5);
    options.tx_array = UniformLinearArray(2, 0.5);

    Scene overflow;
    overflow.num_sources = 2;
    overflow.num_delay_bins = 8;
    MultipathComponent p;
    p.delay_bin = 9;
    p.amplitude = Complex(1.0, 0.0);
    overflow.paths.push_back(p);
    CHECK_THROWS_AS(synthesize_received(overflow, symbols, ofdm, 8, 1, options),
                    std::invalid_argument);

    Scene wrong_sources;
    wrong_sources.num_sources = 3;
    CHECK_THROWS_AS(synthesize_received(wrong_sources, symbols, ofdm, 8, 1, options),
                    std::invalid_argument);

    // downlink must have M_T = M
    options.mode = SensingMode::kDownlink;
    options.tx_array = UniformLinearArray(1, 0.5);
    const auto symbols1 = generate_symbols(2, 1, alloc, 2, 5);
    Scene empty;
    empty.num_sources = 2;
    CHECK_THROWS_AS(synthesize_received(empty, symbols1, ofdm, 8, 1, options),
                    std::invalid_argument);
}
