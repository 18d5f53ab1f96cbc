#include "dsc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsc/errors.hpp"
#include "dsc/log.hpp"

namespace dsc {

AffinityGraph build_affinity(const Matrix& h, std::size_t m) {
    const std::size_t n = h.rows();
    if (m == 0) throw InvalidInput("build_affinity: M must be >= 1");
    if (n <= m) {
        throw InvalidInput("build_affinity: need more than M=" + std::to_string(m) + " points, got " +
                           std::to_string(n));
    }
    if (!h.all_finite()) throw InvalidInput("build_affinity: non-finite embedding");
    probe::count_graph();

    const Matrix sq = pairwise_sq_dists(h);

    std::vector<double> upper;
    upper.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) upper.push_back(sq(i, j));
    auto mid = upper.begin() + static_cast<long>(upper.size() / 2);
    std::nth_element(upper.begin(), mid, upper.end());
    const double median_dist = std::sqrt(*mid);

    AffinityGraph g;
    g.sigma_floor = 1e-12 * (1.0 + median_dist);
    g.sigmas.resize(n);
    std::vector<double> others(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) others[k++] = sq(i, j);
        }
        std::nth_element(others.begin(), others.begin() + static_cast<long>(m - 1), others.end());
        const double sigma = std::sqrt(others[m - 1]);
        if (sigma < g.sigma_floor) {
            g.sigmas[i] = g.sigma_floor;
            ++g.floored;
        } else {
            g.sigmas[i] = sigma;
        }
    }
    if (g.floored > 0) {
        log::warn("build_affinity: " + std::to_string(g.floored) + " of " + std::to_string(n) +
                  " local scales hit the floor (duplicate points)");
    }

    g.affinity = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        g.affinity(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = std::exp(-sq(i, j) / (g.sigmas[i] * g.sigmas[j]));
            g.affinity(i, j) = a;
            g.affinity(j, i) = a;
        }
    }
    g.transition = degree_normalize(g.affinity);
    g.degrees.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : g.affinity.row(i)) s += v;
        g.degrees[i] = s;
    }
    return g;
}

Matrix degree_normalize(const Matrix& a) {
    probe::count_graph();
    if (a.rows() != a.cols()) throw InvalidInput("degree_normalize: matrix not square");
    Matrix w = a;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double v : a.row(i)) {
            if (v < 0.0 || !std::isfinite(v)) {
                throw InvalidInput("degree_normalize: negative or non-finite entry in row " +
                                   std::to_string(i));
            }
            s += v;
        }
        if (!(s > 0.0)) {
            throw InvalidInput("degree_normalize: row " + std::to_string(i) + " is zero (isolated vertex)");
        }
        for (double& v : w.row(i)) v /= s;
    }
    return w;
}

}  // namespace dsc
