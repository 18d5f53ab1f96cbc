#include "dsc/spectral.hpp"

#include <cmath>
#include <string>

#include "dsc/errors.hpp"
#include "dsc/numerics.hpp"

namespace dsc {
namespace {

constexpr double kRowSumTol = 1e-8;
constexpr std::size_t kMaxDenseEig = 2000;

void require_row_stochastic(const Matrix& w, const char* who) {
    if (w.rows() != w.cols()) throw InvalidInput(std::string(who) + ": W must be square");
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double s = 0.0;
        for (double v : w.row(i)) {
            if (v < 0.0 || !std::isfinite(v)) {
                throw InvalidInput(std::string(who) + ": W has a negative or non-finite entry in row " +
                                   std::to_string(i));
            }
            s += v;
        }
        if (std::abs(s - 1.0) > kRowSumTol) {
            throw InvalidInput(std::string(who) + ": W is not row-stochastic (row " + std::to_string(i) +
                               " sums to " + std::to_string(s) + ")");
        }
    }
}

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> s(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) s[c] += row[c];
    }
    return s;
}

}  // namespace

PowerIterationResult power_iterate(const Matrix& w, const Matrix& h0, double a_hat, std::size_t t_max) {
    require_row_stochastic(w, "power_iterate");
    if (h0.rows() != w.rows()) {
        throw InvalidInput("power_iterate: H0 has " + std::to_string(h0.rows()) + " rows, W is " +
                           std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
    }
    if (!(a_hat >= 0.0)) throw InvalidInput("power_iterate: a_hat must be non-negative");
    if (t_max < 1) throw InvalidInput("power_iterate: t_max must be >= 1");
    probe::count_power_iteration();

    PowerIterationResult result;
    Matrix h = h0;
    std::vector<double> velocity_prev;
    for (std::size_t t = 1; t <= t_max; ++t) {
        Matrix next = matmul(w, h);
        const std::vector<double> before = column_sums(h);
        std::vector<double> velocity = column_sums(next);
        for (std::size_t c = 0; c < velocity.size(); ++c) velocity[c] -= before[c];
        h = std::move(next);
        result.iterations = t;
        if (t >= 2) {
            double accel = 0.0;
            for (std::size_t c = 0; c < velocity.size(); ++c) {
                accel = std::max(accel, std::abs(velocity[c] - velocity_prev[c]));
            }
            result.accelerations.push_back(accel);
            if (accel <= a_hat) break;
        }
        velocity_prev = std::move(velocity);
    }
    result.embedding = std::move(h);
    return result;
}

SymmetrizedWalk symmetrize_walk(const Matrix& w) {
    require_row_stochastic(w, "symmetrize_walk");
    const std::size_t n = w.rows();
    // Reversibility gives d_j / d_i = W_ij / W_ji along every edge. Ratios are chained along a
    // maximum spanning tree of min(W_ij, W_ji) so that tiny entries never carry the scale.
    std::vector<double> degree(n, 0.0);
    std::vector<bool> in_tree(n, false);
    std::vector<double> key(n, -1.0);
    std::vector<std::size_t> parent(n, n);
    for (std::size_t added = 0; added < n; ++added) {
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j)
            if (!in_tree[j] && (next == n || key[j] > key[next])) next = j;
        in_tree[next] = true;
        if (key[next] <= 0.0) {
            degree[next] = 1.0;  // root of a new component
        } else {
            const std::size_t i = parent[next];
            degree[next] = degree[i] * w(i, next) / w(next, i);
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            const double fwd = w(next, j), back = w(j, next);
            const double strength = std::min(fwd, back);
            if (strength > key[j]) {
                key[j] = strength;
                parent[j] = next;
            }
        }
    }

    SymmetrizedWalk out;
    out.symmetric = Matrix(n, n);
    out.inv_sqrt_degree.resize(n);
    std::vector<double> sqrt_degree(n);
    for (std::size_t i = 0; i < n; ++i) {
        sqrt_degree[i] = std::sqrt(degree[i]);
        out.inv_sqrt_degree[i] = 1.0 / sqrt_degree[i];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.symmetric(i, j) = sqrt_degree[i] * w(i, j) * out.inv_sqrt_degree[j];

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = out.symmetric(i, j), b = out.symmetric(j, i);
            if (std::abs(a - b) > 1e-8 * std::max(std::abs(a), std::abs(b)) + 1e-14) {
                throw InvalidInput("symmetrize_walk: W is not reversible at (" + std::to_string(i) +
                                   "," + std::to_string(j) + ")");
            }
            out.symmetric(i, j) = out.symmetric(j, i) = 0.5 * (a + b);
        }
    }
    return out;
}

Matrix leading_eigenspace(const Matrix& w, std::size_t k) {
    const std::size_t n = w.rows();
    if (k == 0 || k > n) {
        throw InvalidInput("leading_eigenspace: K=" + std::to_string(k) + " out of range for N=" +
                           std::to_string(n));
    }
    if (n > kMaxDenseEig) {
        throw InvalidInput("leading_eigenspace: N=" + std::to_string(n) + " exceeds dense limit " +
                           std::to_string(kMaxDenseEig));
    }
    const SymmetrizedWalk sym = symmetrize_walk(w);
    const EigenDecomposition eig = sym_eig_large(sym.symmetric);
    // Right eigenvectors of W are D^{-1/2} times those of the symmetric form.
    Matrix u(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t src = n - 1 - c;
        for (std::size_t r = 0; r < n; ++r) u(r, c) = sym.inv_sqrt_degree[r] * eig.vectors(r, src);
    }
    return orthonormalize_columns(u);
}

std::vector<double> subspace_energy(const Matrix& z, const Matrix& w, std::size_t k) {
    if (k > w.rows()) {
        throw InvalidInput("subspace_energy: K=" + std::to_string(k) + " exceeds N=" +
                           std::to_string(w.rows()));
    }
    if (z.rows() != w.rows()) throw InvalidInput("subspace_energy: Z and W row counts differ");
    const Matrix basis = leading_eigenspace(w, k);
    const Matrix coeff = matmul_tn(basis, z);  // K x D
    std::vector<double> energy(z.cols(), 0.0);
    for (std::size_t c = 0; c < z.cols(); ++c) {
        double inside = 0.0, total = 0.0;
        for (std::size_t i = 0; i < k; ++i) inside += coeff(i, c) * coeff(i, c);
        for (std::size_t r = 0; r < z.rows(); ++r) total += z(r, c) * z(r, c);
        energy[c] = total > 0.0 ? std::min(1.0, inside / total) : 0.0;
    }
    return energy;
}

Matrix ncut_baseline(const Matrix& w, std::size_t k) {
    if (k == 0 || k >= w.rows()) {
        throw InvalidInput("ncut_baseline: need 0 < K < N, got K=" + std::to_string(k) + ", N=" +
                           std::to_string(w.rows()));
    }
    // Smallest eigenvalues of I - W are the largest of W.
    return leading_eigenspace(w, k);
}

}  // namespace dsc
