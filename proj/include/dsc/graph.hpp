#pragma once

#include <cstddef>
#include <vector>

#include "dsc/matrix.hpp"

namespace dsc {

/// Self-tuning affinity graph over a set of embeddings.
struct AffinityGraph {
    Matrix affinity;            // A, symmetric, A_ii = 1
    Matrix transition;          // W = D^-1 A, row-stochastic
    std::vector<double> sigmas;   // local scales, floored at `sigma_floor`
    std::vector<double> degrees;  // row sums of A
    double sigma_floor = 0.0;
    std::size_t floored = 0;      // how many sigmas hit the floor
};

/// A_ij = exp(-|h_i - h_j|^2 / (sigma_i sigma_j)), sigma_i = distance from h_i to its
/// M-th nearest other point, floored at 1e-12 * (1 + median pairwise distance).
/// Requires N > M. Logs a warning when any sigma is floored (duplicate-heavy data).
AffinityGraph build_affinity(const Matrix& h, std::size_t m);

/// Row-normalises a non-negative matrix; a zero row is an isolated vertex (InvalidInput).
Matrix degree_normalize(const Matrix& a);

}  // namespace dsc
