#include "dsc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dsc/errors.hpp"
#include "dsc/log.hpp"

namespace dsc {
namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalTol = 1e-12;
constexpr double kSymmetryTol = 1e-10;

void require_symmetric(const Matrix& s, const char* who) {
    if (s.rows() != s.cols()) {
        throw InvalidInput(std::string(who) + ": matrix is " + std::to_string(s.rows()) + "x" +
                           std::to_string(s.cols()) + ", expected square");
    }
    if (s.rows() == 0) throw InvalidInput(std::string(who) + ": empty matrix");
    const double scale = std::max(1.0, max_abs(s));
    for (std::size_t i = 0; i < s.rows(); ++i) {
        for (std::size_t j = i + 1; j < s.cols(); ++j) {
            if (std::abs(s(i, j) - s(j, i)) > kSymmetryTol * scale) {
                throw InvalidInput(std::string(who) + ": matrix not symmetric at (" +
                                   std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    if (!s.all_finite()) throw InvalidInput(std::string(who) + ": non-finite entry");
}

// Sorts eigenpairs ascending (stable on original position) and fixes signs.
EigenDecomposition finalize(std::vector<double> values, const Matrix& vectors) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t d = 0; d < n; ++d) {
        const std::size_t src = order[d];
        out.values[d] = values[src];
        std::size_t pivot = 0;
        for (std::size_t k = 1; k < n; ++k) {
            if (std::abs(vectors(k, src)) > std::abs(vectors(pivot, src))) pivot = k;
        }
        const double sign = vectors(pivot, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k) out.vectors(k, d) = sign * vectors(k, src);
    }
    return out;
}

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace

EigenDecomposition sym_eig(const Matrix& s) {
    require_symmetric(s, "sym_eig");
    probe::count_eigensolve();
    const std::size_t n = s.rows();
    Matrix a = s;
    // Exact symmetrisation so rotations act on a truly symmetric matrix.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
    Matrix v = Matrix::identity(n);

    const double tol = kOffDiagonalTol * std::max(1.0, frobenius_norm(s));
    int sweep = 0;
    while (off_diagonal_norm(a) >= tol) {
        if (++sweep > kMaxSweeps) {
            throw NumericalFailure("sym_eig: no convergence after " + std::to_string(kMaxSweeps) +
                                   " sweeps");
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::hypot(1.0, tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
    return finalize(std::move(values), v);
}

EigenDecomposition sym_eig_large(const Matrix& s) {
    require_symmetric(s, "sym_eig_large");
    probe::count_eigensolve();
    const int n = static_cast<int>(s.rows());
    Matrix v = s;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) v(i, j) = v(j, i) = 0.5 * (v(i, j) + v(j, i));
    std::vector<double> d(n), e(n);

    // Householder reduction to tridiagonal form.
    for (int j = 0; j < n; ++j) d[j] = v(n - 1, j);
    for (int i = n - 1; i > 0; --i) {
        double scale = 0.0, h = 0.0;
        for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (int j = 0; j < i; ++j) {
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (int k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (int j = 0; j < i; ++j) e[j] = 0.0;
            for (int j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (int k = j + 1; k <= i - 1; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (int j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (int j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (int k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }
    for (int i = 0; i < n - 1; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (int k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
            for (int j = 0; j <= i; ++j) {
                double g = 0.0;
                for (int k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
                for (int k = 0; k <= i; ++k) v(k, j) -= g * d[k];
            }
        }
        for (int k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (int j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;

    // Implicit QL on the tridiagonal matrix.
    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    double f = 0.0, tst1 = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    for (int l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        int m = l;
        while (m < n) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > 30 * n + 100) {
                    throw NumericalFailure("sym_eig_large: QL iteration did not converge");
                }
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (int i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = c, c3 = c;
                const double el1 = e[l + 1];
                double sn = 0.0, s2 = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    c3 = c2;
                    c2 = c;
                    s2 = sn;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = sn * r;
                    sn = e[i] / r;
                    c = p / r;
                    p = c * d[i] - sn * g;
                    d[i + 1] = h + sn * (c * g + sn * d[i]);
                    for (int k = 0; k < n; ++k) {
                        h = v(k, i + 1);
                        v(k, i + 1) = sn * v(k, i) + c * h;
                        v(k, i) = c * v(k, i) - sn * h;
                    }
                }
                p = -sn * s2 * c3 * el1 * e[l] / dl1;
                e[l] = sn * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }

    return finalize(std::move(d), v);
}

std::vector<std::size_t> hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols()) {
        throw InvalidInput("hungarian: cost matrix is " + std::to_string(cost.rows()) + "x" +
                           std::to_string(cost.cols()) + ", expected square");
    }
    if (!cost.all_finite()) throw InvalidInput("hungarian: non-finite cost");
    const std::size_t n = cost.rows();
    if (n == 0) return {};

    // Shortest augmenting paths with row/column potentials; indices are 1-based, 0 is a sentinel.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

double assignment_cost(const Matrix& cost, std::span<const std::size_t> assignment) {
    double total = 0.0;
    for (std::size_t r = 0; r < assignment.size(); ++r) total += cost(r, assignment[r]);
    return total;
}

Matrix pca_project(const Matrix& x, std::size_t dims) {
    const std::size_t n = x.rows(), p = x.cols();
    if (n == 0 || p == 0) throw InvalidInput("pca_project: empty input");
    if (dims == 0) throw InvalidInput("pca_project: dims must be positive");

    Matrix centred = x;
    for (std::size_t c = 0; c < p; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
        mean /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) centred(r, c) -= mean;
    }
    Matrix cov = matmul_tn(centred, centred);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j) cov(i, j) = cov(j, i) = 0.5 * (cov(i, j) + cov(j, i));

    const EigenDecomposition eig = p <= 64 ? sym_eig(cov) : sym_eig_large(cov);
    const double top = std::max(eig.values.back(), 0.0);
    std::size_t rank = 0;
    for (double lambda : eig.values) {
        if (lambda > 1e-12 * std::max(top, 1e-300)) ++rank;
    }
    if (top == 0.0) rank = 0;
    if (dims > rank) {
        log::warn("pca_project: requested " + std::to_string(dims) + " components but data rank is " +
                  std::to_string(rank) + "; reducing");
        dims = rank;
    }

    Matrix basis(p, dims);
    for (std::size_t k = 0; k < dims; ++k) {
        const std::size_t src = p - 1 - k;
        for (std::size_t r = 0; r < p; ++r) basis(r, k) = eig.vectors(r, src);
    }
    return matmul(centred, basis);
}

Matrix orthonormalize_columns(const Matrix& a) {
    Matrix q = a;
    const std::size_t n = a.rows(), k = a.cols();
    for (std::size_t j = 0; j < k; ++j) {
        const double original = std::sqrt([&] {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += a(r, j) * a(r, j);
            return s;
        }());
        // Two passes of modified Gram-Schmidt keep the basis orthogonal to rounding.
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < j; ++i) {
                double dot = 0.0;
                for (std::size_t r = 0; r < n; ++r) dot += q(r, i) * q(r, j);
                for (std::size_t r = 0; r < n; ++r) q(r, j) -= dot * q(r, i);
            }
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm += q(r, j) * q(r, j);
        norm = std::sqrt(norm);
        if (norm <= 1e-12 * std::max(original, 1e-300)) {
            throw NumericalFailure("orthonormalize_columns: column " + std::to_string(j) +
                                   " is linearly dependent");
        }
        for (std::size_t r = 0; r < n; ++r) q(r, j) /= norm;
    }
    return q;
}

}  // namespace dsc
