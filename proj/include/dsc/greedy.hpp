#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dsc/matrix.hpp"

namespace dsc {

/// Hard partition of the rows of an embedding.
struct ClusterState {
    std::vector<int> assignments;  // in [0, K)
    Matrix centroids;              // K x D
    double objective = 0.0;        // sum of squared distances to assigned centroids
};

struct KmeansOptions {
    std::size_t n_init = 10;
    std::size_t max_iter = 300;
};

/// Best of `n_init` kmeans++-seeded Lloyd runs (lowest objective, earliest restart on ties).
ClusterState kmeans(const Matrix& z, std::size_t k, std::uint64_t seed, KmeansOptions options = {});

/// D^2-weighted seeding. Once every remaining point coincides with a chosen centre the
/// rest are taken uniformly from the unchosen points.
Matrix kmeans_plus_plus(const Matrix& z, std::size_t k, std::mt19937_64& rng);

/// Lloyd iterations from the given centres until assignments stop changing. An empty
/// cluster takes the point farthest from its current centroid. If `objective_trace` is
/// given, the objective after each centroid update is appended.
ClusterState lloyd(const Matrix& z, Matrix centroids, std::size_t max_iter,
                   std::vector<double>* objective_trace = nullptr);

/// Index of the nearest centroid for every row (lowest index on ties).
std::vector<int> nearest_centroid(const Matrix& z, const Matrix& centroids);

double kmeans_objective(const Matrix& z, const std::vector<int>& assignments, const Matrix& centroids);

/// Within-class scatter S = sum_k sum_{z in C_k} (z - mu_k)^T (z - mu_k).
Matrix scatter_matrix(const Matrix& z, const ClusterState& state);

/// Eigenbasis of the scatter matrix. Column d of `rotation` is the eigenvector with the
/// d-th smallest eigenvalue, so the last column is the direction with the worst
/// cluster structure.
struct GreedyRotation {
    Matrix rotation;
    std::vector<double> eigenvalues;
    Matrix scatter;

    std::size_t dim() const { return rotation.cols(); }
};

GreedyRotation solve_rotation(const Matrix& scatter);

/// Y = Z V with its last column replaced by y, where y_n is the projection of sample n's
/// centroid on the worst direction.
struct GreedyTarget {
    Matrix targets;
    std::vector<double> pull;
};

GreedyTarget build_target(const Matrix& z, const GreedyRotation& rot, const ClusterState& state);

/// Squared error on the last rotated coordinate: |(FX V - Y) e_D|^2.
double greedy_loss(const Matrix& fx, const GreedyRotation& rot, const Matrix& targets);
/// Squared error on the first D-1 rotated coordinates.
double spectral_loss(const Matrix& fx, const GreedyRotation& rot, const Matrix& targets);
/// |FX V - Y|_F^2; equals spectral_loss + greedy_loss.
double joint_loss(const Matrix& fx, const GreedyRotation& rot, const Matrix& targets);

}  // namespace dsc
