#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dsc/matrix.hpp"

namespace dsc {

/// Eigenpairs of a symmetric matrix. `vectors` holds one unit eigenvector per column,
/// ordered by ascending eigenvalue; ties keep their original (diagonal) order.
/// Each column is signed so that its largest-magnitude entry is positive.
struct EigenDecomposition {
    std::vector<double> values;
    Matrix vectors;
};

/// Cyclic Jacobi eigensolver for small symmetric matrices (D up to a few dozen).
/// Throws InvalidInput for non-square/asymmetric input and NumericalFailure after
/// 100 sweeps without convergence.
EigenDecomposition sym_eig(const Matrix& s);

/// Householder tridiagonalisation followed by implicit QL. Same contract as sym_eig,
/// O(n^3) with a small constant; used for graph-sized problems.
EigenDecomposition sym_eig_large(const Matrix& s);

/// Min-cost perfect assignment on a square cost matrix: result[row] = column.
std::vector<std::size_t> hungarian(const Matrix& cost);

double assignment_cost(const Matrix& cost, std::span<const std::size_t> assignment);

/// Projects mean-centred rows onto the leading principal components, ordered by
/// decreasing explained variance. If `dims` exceeds the numerical rank the output is
/// truncated to the rank and a warning is logged.
Matrix pca_project(const Matrix& x, std::size_t dims);

/// Modified Gram-Schmidt on the columns, left to right. Columns that are numerically
/// dependent on earlier ones are a NumericalFailure.
Matrix orthonormalize_columns(const Matrix& a);

}  // namespace dsc
