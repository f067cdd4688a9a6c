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

#ifndef OFDMSENSE_SOLVER_HPP
#define OFDMSENSE_SOLVER_HPP

#include "ofdmsense/common.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace ofdmsense {

struct StoppingRule {
    enum class Kind { kFixedSparsity, kResidualRatio, kPlateau };

    Kind kind = Kind::kResidualRatio;
    int sparsity = 0;             // kFixedSparsity: number of blocks to select
    double residual_ratio = 1e-6; // kResidualRatio: stop once ||R|| <= ratio * ||Y||
    double plateau_delta = 0.01;  // kPlateau: stop once the relative improvement drops below
    int max_iterations = 0;       // 0 = limited only by dictionary feasibility

    static StoppingRule fixed_sparsity(int count) {
        StoppingRule r;
        r.kind = Kind::kFixedSparsity;
        r.sparsity = count;
        return r;
    }
    static StoppingRule residual(double ratio) {
        StoppingRule r;
        r.kind = Kind::kResidualRatio;
        r.residual_ratio = ratio;
        return r;
    }
    static StoppingRule plateau(double delta, int max_iterations = 0) {
        StoppingRule r;
        r.kind = Kind::kPlateau;
        r.plateau_delta = delta;
        r.max_iterations = max_iterations;
        return r;
    }
};

struct RecoveredBlock {
    int bin = 0;
    CMat coefficients; // block_size x M
};

struct BlockSolution {
    std::vector<RecoveredBlock> blocks; // bins strictly increasing
    double residual_norm = 0.0;
    int iterations = 0;
};

class IllConditionedSystem : public std::runtime_error {
public:
    IllConditionedSystem(std::string message, std::vector<int> bins)
        : std::runtime_error(std::move(message)), bins_(std::move(bins)) {}
    const std::vector<int>& bins() const { return bins_; }

private:
    std::vector<int> bins_;
};

// Greedy block orthogonal matching pursuit for the multi-measurement-vector
// system Y = W X, X block sparse in row groups of block_size. Per iteration
// the bin maximizing ||W_l^H R||_F / ||W_l||_F is selected (ties go to the
// lowest bin) and all selected blocks are re-fit jointly by least squares.
// The fit is maintained through an incrementally grown QR factorization with
// a reorthogonalization pass, so the residual stays orthogonal to every
// selected column.
inline BlockSolution solve_block_mmv(const CMat& sensing, const CMat& observations,
                                     int block_size, const StoppingRule& stop) {
    require(block_size >= 1, "solve_block_mmv: block_size must be >= 1");
    require(sensing.rows() == observations.rows(),
            "solve_block_mmv: W and Y row counts differ");
    require(sensing.cols() % block_size == 0,
            "solve_block_mmv: W column count must be a multiple of block_size");
    if (stop.kind == StoppingRule::Kind::kFixedSparsity)
        require(stop.sparsity >= 0, "solve_block_mmv: fixed sparsity must be >= 0");

    const int num_bins = static_cast<int>(sensing.cols()) / block_size;
    const Eigen::Index rows = sensing.rows();
    const Eigen::Index m = observations.cols();

    BlockSolution solution;
    const double norm_y = observations.norm();
    if (norm_y == 0.0)
        return solution;

    Eigen::VectorXd block_norms(num_bins);
    for (int l = 0; l < num_bins; ++l)
        block_norms(l) = sensing.middleCols(static_cast<Eigen::Index>(l) * block_size,
                                            block_size).norm();

    int max_select = std::min<int>(num_bins, static_cast<int>(rows) / block_size);
    if (stop.max_iterations > 0)
        max_select = std::min(max_select, stop.max_iterations);
    if (stop.kind == StoppingRule::Kind::kFixedSparsity)
        max_select = std::min(max_select, stop.sparsity);

    const double floor_eps = 1e-13 * norm_y;

    CMat q(rows, static_cast<Eigen::Index>(max_select) * block_size);
    CMat r_factor = CMat::Zero(static_cast<Eigen::Index>(max_select) * block_size,
                               static_cast<Eigen::Index>(max_select) * block_size);
    CMat qh_y(static_cast<Eigen::Index>(max_select) * block_size, m);

    std::vector<int> selected;
    std::vector<char> is_selected(static_cast<std::size_t>(num_bins), 0);
    CMat residual = observations;
    double res_norm = norm_y;

    while (static_cast<int>(selected.size()) < max_select) {
        if (stop.kind == StoppingRule::Kind::kResidualRatio &&
            res_norm <= stop.residual_ratio * norm_y)
            break;
        if (res_norm <= floor_eps)
            break;

        // Selection: scan ascending so equal metrics keep the lowest bin.
        int best = -1;
        double best_metric = 0.0;
        for (int l = 0; l < num_bins; ++l) {
            if (is_selected[static_cast<std::size_t>(l)] || block_norms(l) == 0.0)
                continue;
            const double metric =
                (sensing.middleCols(static_cast<Eigen::Index>(l) * block_size, block_size)
                     .adjoint() * residual).norm() / block_norms(l);
            if (best < 0 || metric > best_metric) {
                best = l;
                best_metric = metric;
            }
        }
        if (best < 0)
            break;

        // Append the block's columns to the QR factorization (two
        // Gram-Schmidt passes keep Q orthonormal to machine precision).
        const Eigen::Index base = static_cast<Eigen::Index>(selected.size()) * block_size;
        for (int c = 0; c < block_size; ++c) {
            const Eigen::Index col = base + c;
            CVec v = sensing.col(static_cast<Eigen::Index>(best) * block_size + c);
            const double original_norm = v.norm();
            for (int pass = 0; pass < 2; ++pass) {
                if (col == 0)
                    break;
                const CVec coeffs = q.leftCols(col).adjoint() * v;
                v -= q.leftCols(col) * coeffs;
                r_factor.col(col).head(col) += coeffs;
            }
            const double tail = v.norm();
            if (tail <= 1e-12 * std::max(original_norm, 1e-300)) {
                std::vector<int> bins = selected;
                bins.push_back(best);
                std::sort(bins.begin(), bins.end());
                std::ostringstream msg;
                msg << "solve_block_mmv: selected sub-dictionary is rank deficient; bins:";
                for (int b : bins)
                    msg << ' ' << b;
                throw IllConditionedSystem(msg.str(), bins);
            }
            r_factor(col, col) = tail;
            q.col(col) = v / tail;
            qh_y.row(col) = q.col(col).adjoint() * observations;
        }
        selected.push_back(best);
        is_selected[static_cast<std::size_t>(best)] = 1;
        solution.iterations += 1;

        const Eigen::Index cols = static_cast<Eigen::Index>(selected.size()) * block_size;
        residual = observations - q.leftCols(cols) * qh_y.topRows(cols);
        const double prev_norm = res_norm;
        res_norm = residual.norm();

        if (stop.kind == StoppingRule::Kind::kPlateau &&
            prev_norm - res_norm < stop.plateau_delta * prev_norm)
            break;
    }

    solution.residual_norm = res_norm;
    if (selected.empty())
        return solution;

    const Eigen::Index cols = static_cast<Eigen::Index>(selected.size()) * block_size;
    const CMat coeffs = r_factor.topLeftCorner(cols, cols)
                            .triangularView<Eigen::Upper>()
                            .solve(qh_y.topRows(cols));

    std::vector<int> order(selected.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return selected[static_cast<std::size_t>(a)] <
                                         selected[static_cast<std::size_t>(b)]; });
    for (int i : order) {
        RecoveredBlock block;
        block.bin = selected[static_cast<std::size_t>(i)];
        block.coefficients = coeffs.middleRows(static_cast<Eigen::Index>(i) * block_size,
                                               block_size);
        solution.blocks.push_back(std::move(block));
    }
    return solution;
}

} // namespace ofdmsense

#endif // OFDMSENSE_SOLVER_HPP
