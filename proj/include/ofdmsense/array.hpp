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

#ifndef OFDMSENSE_ARRAY_HPP
#define OFDMSENSE_ARRAY_HPP

#include "ofdmsense/common.hpp"

#include <vector>

namespace ofdmsense {

// Uniform linear array. Angles are measured from broadside; the array element
// m carries the phase m * kappa * sin(angle) with kappa = 2*pi*d/lambda.
struct UniformLinearArray {
    int num_elements = 1;
    double spacing_over_wavelength = 0.5; // d / lambda

    UniformLinearArray() = default;
    UniformLinearArray(int elements, double spacing = 0.5)
        : num_elements(elements), spacing_over_wavelength(spacing) {
        require(num_elements >= 1, "UniformLinearArray: num_elements must be >= 1");
        require(spacing_over_wavelength > 0.0,
                "UniformLinearArray: spacing_over_wavelength must be > 0");
    }

    double kappa() const { return 2.0 * kPi * spacing_over_wavelength; }
};

// Array response a(M, theta); element 0 is 1 and all entries are unit modulus.
template <typename Scalar = double>
Eigen::Vector<std::complex<Scalar>, Eigen::Dynamic>
steering_vector(const UniformLinearArray& array, Scalar angle_rad) {
    require(std::isfinite(static_cast<double>(angle_rad)),
            "steering_vector: angle must be finite");
    const Scalar step = static_cast<Scalar>(array.kappa()) * std::sin(angle_rad);
    Eigen::Vector<std::complex<Scalar>, Eigen::Dynamic> a(array.num_elements);
    for (int m = 0; m < array.num_elements; ++m)
        a(m) = std::polar(Scalar(1), static_cast<Scalar>(m) * step);
    return a;
}

// Scan grid whose points are uniform in sin(angle) over [-1, 1); this is the
// domain the array actually resolves.
inline std::vector<double> default_scan_grid(int num_points = 512) {
    require(num_points >= 1, "default_scan_grid: num_points must be >= 1");
    std::vector<double> grid(static_cast<std::size_t>(num_points));
    for (int i = 0; i < num_points; ++i)
        grid[static_cast<std::size_t>(i)] = std::asin(-1.0 + 2.0 * i / num_points);
    return grid;
}

// Magnitude spectrum of a coefficient block against receive steering vectors:
// entry i is ||block * conj(a(rx_array, angle_grid[i]))||_2. Peaks sit at the
// arrival angles contained in the block.
template <typename Derived>
Eigen::VectorXd beam_scan(const Eigen::MatrixBase<Derived>& block,
                          const UniformLinearArray& rx_array,
                          const std::vector<double>& angle_grid_rad) {
    using Scalar = typename Derived::RealScalar;
    require(block.cols() == rx_array.num_elements,
            "beam_scan: block column count must match the receive array");
    require(!angle_grid_rad.empty(), "beam_scan: angle grid must be non-empty");
    Eigen::VectorXd spectrum(static_cast<Eigen::Index>(angle_grid_rad.size()));
    for (std::size_t i = 0; i < angle_grid_rad.size(); ++i) {
        const auto a = steering_vector<Scalar>(rx_array,
                                               static_cast<Scalar>(angle_grid_rad[i]));
        spectrum(static_cast<Eigen::Index>(i)) =
            static_cast<double>((block * a.conjugate()).norm());
    }
    return spectrum;
}

} // namespace ofdmsense

#endif // OFDMSENSE_ARRAY_HPP
