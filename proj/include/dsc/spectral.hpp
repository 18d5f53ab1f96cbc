#pragma once

#include <cstddef>
#include <vector>

#include "dsc/matrix.hpp"

namespace dsc {

struct PowerIterationResult {
    Matrix embedding;                  // H^(T)
    std::size_t iterations = 0;        // T
    std::vector<double> accelerations; // a^(t) for t = 2..T
};

/// Repeated smoothing H^(t) = W H^(t-1). The column-sum velocity is
/// v^(t) = (H^(t) - H^(t-1))^T 1 and the acceleration a^(t) = |v^(t) - v^(t-1)|_inf.
/// Stops at the first t >= 2 with a^(t) <= a_hat, or at t_max.
PowerIterationResult power_iterate(const Matrix& w, const Matrix& h0, double a_hat = 0.01,
                                   std::size_t t_max = 15);

/// Symmetric form of a reversible random-walk matrix.
/// For W = D^-1 A with symmetric A, returns S = D^{1/2} W D^{-1/2} and D^{-1/2}
/// (degrees recovered up to a per-component scale, which cancels).
struct SymmetrizedWalk {
    Matrix symmetric;
    std::vector<double> inv_sqrt_degree;
};
SymmetrizedWalk symmetrize_walk(const Matrix& w);

/// Orthonormal basis (N x K) of the span of W's K leading eigenvectors.
Matrix leading_eigenspace(const Matrix& w, std::size_t k);

/// Fraction of each column's squared norm lying in the span of W's top-K eigenvectors.
std::vector<double> subspace_energy(const Matrix& z, const Matrix& w, std::size_t k);

/// Relaxed normalised cut: orthonormal N x K basis for the K smallest eigenvectors of
/// L = I - W. Cluster its rows with kmeans to get the SC-Ncut baseline.
Matrix ncut_baseline(const Matrix& w, std::size_t k);

}  // namespace dsc
