#include "dsc/greedy.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "dsc/errors.hpp"
#include "dsc/numerics.hpp"

namespace dsc {
namespace {

// Recomputes centroids as cluster means, refilling empty clusters with the point farthest
// from its own centroid (taken from a cluster that keeps at least one member).
void update_centroids(const Matrix& z, std::vector<int>& assign, Matrix& centroids) {
    const std::size_t k = centroids.rows(), d = z.cols(), n = z.rows();
    auto recompute = [&] {
        std::vector<std::size_t> counts(k, 0);
        centroids = Matrix(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            ++counts[c];
            auto row = z.row(i);
            for (std::size_t j = 0; j < d; ++j) centroids(c, j) += row[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t j = 0; j < d; ++j) centroids(c, j) /= static_cast<double>(counts[c]);
        }
        return counts;
    };

    auto counts = recompute();
    for (std::size_t empty = 0; empty < k; ++empty) {
        if (counts[empty] != 0) continue;
        std::size_t far = n;
        double far_dist = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            if (counts[c] < 2) continue;
            const double dist = row_sq_dist(z, i, centroids, c);
            if (dist > far_dist) {
                far_dist = dist;
                far = i;
            }
        }
        if (far == n) break;  // fewer points than clusters; nothing to move
        --counts[static_cast<std::size_t>(assign[far])];
        assign[far] = static_cast<int>(empty);
        counts = recompute();
    }
}

}  // namespace

std::vector<int> nearest_centroid(const Matrix& z, const Matrix& centroids) {
    if (z.cols() != centroids.cols()) {
        throw InvalidInput("nearest_centroid: embedding width " + std::to_string(z.cols()) +
                           " vs centroid width " + std::to_string(centroids.cols()));
    }
    std::vector<int> out(z.rows(), 0);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            const double dist = row_sq_dist(z, i, centroids, c);
            if (dist < best) {
                best = dist;
                out[i] = static_cast<int>(c);
            }
        }
    }
    return out;
}

double kmeans_objective(const Matrix& z, const std::vector<int>& assignments, const Matrix& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        s += row_sq_dist(z, i, centroids, static_cast<std::size_t>(assignments[i]));
    }
    return s;
}

Matrix kmeans_plus_plus(const Matrix& z, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = z.rows();
    Matrix centers(k, z.cols());
    std::vector<bool> chosen(n, false);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto take = [&](std::size_t idx, std::size_t slot) {
        chosen[idx] = true;
        auto src = z.row(idx);
        std::copy(src.begin(), src.end(), centers.row(slot).begin());
        for (std::size_t i = 0; i < n; ++i) dist[i] = std::min(dist[i], row_sq_dist(z, i, z, idx));
    };

    take(std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n))), 0);
    for (std::size_t slot = 1; slot < k; ++slot) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += dist[i];
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist[i];
                if (dist[i] > 0.0 && acc >= target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                for (std::size_t i = n; i-- > 0;) {
                    if (dist[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) free.push_back(i);
            const auto j = std::min(free.size() - 1,
                                    static_cast<std::size_t>(unit(rng) * static_cast<double>(free.size())));
            pick = free[j];
        }
        take(pick, slot);
    }
    return centers;
}

ClusterState lloyd(const Matrix& z, Matrix centroids, std::size_t max_iter,
                   std::vector<double>* objective_trace) {
    ClusterState state;
    state.assignments = nearest_centroid(z, centroids);
    bool converged = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
        update_centroids(z, state.assignments, centroids);
        if (objective_trace) objective_trace->push_back(kmeans_objective(z, state.assignments, centroids));
        std::vector<int> next = nearest_centroid(z, centroids);
        if (next == state.assignments) {
            converged = true;
            break;
        }
        state.assignments = std::move(next);
    }
    if (!converged) update_centroids(z, state.assignments, centroids);
    state.centroids = std::move(centroids);
    state.objective = kmeans_objective(z, state.assignments, state.centroids);
    return state;
}

ClusterState kmeans(const Matrix& z, std::size_t k, std::uint64_t seed, KmeansOptions options) {
    if (k == 0) throw InvalidInput("kmeans: K must be >= 1");
    if (k > z.rows()) {
        throw InvalidInput("kmeans: K=" + std::to_string(k) + " exceeds N=" + std::to_string(z.rows()));
    }
    if (!z.all_finite()) throw InvalidInput("kmeans: non-finite embedding");
    std::mt19937_64 rng(seed);
    ClusterState best;
    bool have = false;
    for (std::size_t run = 0; run < std::max<std::size_t>(1, options.n_init); ++run) {
        ClusterState s = lloyd(z, kmeans_plus_plus(z, k, rng), options.max_iter);
        if (!have || s.objective < best.objective) {
            best = std::move(s);
            have = true;
        }
    }
    return best;
}

Matrix scatter_matrix(const Matrix& z, const ClusterState& state) {
    if (state.assignments.size() != z.rows() || state.centroids.cols() != z.cols()) {
        throw InvalidInput("scatter_matrix: cluster state does not match embedding");
    }
    Matrix dev = z;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto c = static_cast<std::size_t>(state.assignments[i]);
        auto row = dev.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] -= state.centroids(c, j);
    }
    Matrix s = matmul_tn(dev, dev);
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = i + 1; j < s.cols(); ++j) s(i, j) = s(j, i) = 0.5 * (s(i, j) + s(j, i));
    return s;
}

GreedyRotation solve_rotation(const Matrix& scatter) {
    EigenDecomposition eig = sym_eig(scatter);
    return {std::move(eig.vectors), std::move(eig.values), scatter};
}

GreedyTarget build_target(const Matrix& z, const GreedyRotation& rot, const ClusterState& state) {
    const std::size_t d = rot.dim();
    if (z.cols() != d || state.assignments.size() != z.rows()) {
        throw InvalidInput("build_target: shapes are inconsistent");
    }
    GreedyTarget out;
    out.targets = matmul(z, rot.rotation);
    const std::vector<double> worst = rot.rotation.col(d - 1);
    std::vector<double> centroid_proj(state.centroids.rows(), 0.0);
    for (std::size_t c = 0; c < state.centroids.rows(); ++c)
        for (std::size_t j = 0; j < d; ++j) centroid_proj[c] += state.centroids(c, j) * worst[j];
    out.pull.resize(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        out.pull[i] = centroid_proj[static_cast<std::size_t>(state.assignments[i])];
        out.targets(i, d - 1) = out.pull[i];
    }
    return out;
}

namespace {

double residual_columns(const Matrix& fx, const GreedyRotation& rot, const Matrix& targets,
                        std::size_t first, std::size_t last) {
    if (fx.cols() != rot.dim() || targets.rows() != fx.rows() || targets.cols() != rot.dim()) {
        throw InvalidInput("loss: shapes are inconsistent");
    }
    const Matrix r = matmul(fx, rot.rotation) - targets;
    double s = 0.0;
    for (std::size_t i = 0; i < r.rows(); ++i)
        for (std::size_t c = first; c < last; ++c) s += r(i, c) * r(i, c);
    return s;
}

}  // namespace

double greedy_loss(const Matrix& fx, const GreedyRotation& rot, const Matrix& targets) {
    return residual_columns(fx, rot, targets, rot.dim() - 1, rot.dim());
}

double spectral_loss(const Matrix& fx, const GreedyRotation& rot, const Matrix& targets) {
    return residual_columns(fx, rot, targets, 0, rot.dim() - 1);
}

double joint_loss(const Matrix& fx, const GreedyRotation& rot, const Matrix& targets) {
    return residual_columns(fx, rot, targets, 0, rot.dim());
}

}  // namespace dsc
