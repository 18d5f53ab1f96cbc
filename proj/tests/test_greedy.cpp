#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "dsc/data.hpp"
#include "dsc/errors.hpp"
#include "dsc/greedy.hpp"
#include "dsc/metrics.hpp"
#include "dsc/numerics.hpp"

using dsc::Matrix;

namespace {

Matrix gaussian(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(r, c);
    for (double& v : m.values()) v = g(rng);
    return m;
}

Matrix orthogonal(std::size_t d, std::uint64_t seed) {
    Matrix q = gaussian(d, d, seed);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0;
            for (std::size_t i = 0; i < d; ++i) dot += q(i, j) * q(i, k);
            for (std::size_t i = 0; i < d; ++i) q(i, j) -= dot * q(i, k);
        }
        double n = 0;
        for (std::size_t i = 0; i < d; ++i) n += q(i, j) * q(i, j);
        for (std::size_t i = 0; i < d; ++i) q(i, j) /= std::sqrt(n);
    }
    return q;
}

double diag_sum(const Matrix& m) {
    double t = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
    return t;
}

// Centroids and objective recomputed by hand from the assignments.
void check_consistent(const Matrix& z, const dsc::ClusterState& s, std::size_t k) {
    std::vector<double> count(k, 0.0);
    Matrix sum(k, z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        count[s.assignments[r]] += 1;
        for (std::size_t c = 0; c < z.cols(); ++c) sum(s.assignments[r], c) += z(r, c);
    }
    double obj = 0;
    for (std::size_t j = 0; j < k; ++j) {
        CHECK(count[j] > 0);
        for (std::size_t c = 0; c < z.cols(); ++c) CHECK(std::abs(s.centroids(j, c) - sum(j, c) / count[j]) < 1e-10);
    }
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c) {
            const double d = z(r, c) - s.centroids(s.assignments[r], c);
            obj += d * d;
        }
    CHECK(std::abs(obj - s.objective) < 1e-10 * std::max(1.0, obj));
}

}  // namespace

TEST_CASE("kmeans on four points on a line") {
    const Matrix z{{0}, {0.1}, {10}, {10.1}};
    const auto s = dsc::kmeans(z, 2, 0);
    std::vector<double> c{s.centroids(0, 0), s.centroids(1, 0)};
    std::sort(c.begin(), c.end());
    CHECK(c[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(c[1] == doctest::Approx(10.05).epsilon(1e-12));
    CHECK(s.objective == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(s.assignments[0] == s.assignments[1]);
    CHECK(s.assignments[2] == s.assignments[3]);
    CHECK(s.assignments[0] != s.assignments[2]);
}

TEST_CASE("kmeans with K = N gives singletons") {
    const Matrix z = gaussian(7, 3, 2);
    const auto s = dsc::kmeans(z, 7, 1);
    CHECK(s.objective == 0.0);
    CHECK(std::set<int>(s.assignments.begin(), s.assignments.end()).size() == 7);
    CHECK_THROWS_AS(dsc::kmeans(z, 8, 1), dsc::InvalidInput);
}

TEST_CASE("kmeans is homogeneous under duplication") {
    const dsc::Dataset ds = dsc::synth_blobs(20, Matrix{{0, 0}, {6, 0}, {0, 6}}, 0.7, 3);
    const Matrix& z = ds.features;
    Matrix twice(2 * z.rows(), z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c) twice(r, c) = twice(r + z.rows(), c) = z(r, c);
    const auto a = dsc::kmeans(z, 3, 4);
    const auto b = dsc::kmeans(twice, 3, 4);
    CHECK(b.objective == doctest::Approx(2 * a.objective).epsilon(1e-10));
    // Same centroid set regardless of ids.
    for (std::size_t i = 0; i < 3; ++i) {
        double best = 1e300;
        for (std::size_t j = 0; j < 3; ++j) {
            const double dx = a.centroids(i, 0) - b.centroids(j, 0), dy = a.centroids(i, 1) - b.centroids(j, 1);
            best = std::min(best, dx * dx + dy * dy);
        }
        CHECK(best < 1e-20);
    }
}

TEST_CASE("kmeans state invariants and determinism") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix z = gaussian(120, 4, seed);
        const auto s = dsc::kmeans(z, 5, seed);
        check_consistent(z, s, 5);
        CHECK(s.objective == doctest::Approx(dsc::kmeans_objective(z, s.assignments, s.centroids)));
        const auto again = dsc::kmeans(z, 5, seed);
        CHECK(again.assignments == s.assignments);
        CHECK(again.centroids == s.centroids);
    }
}

TEST_CASE("lloyd never increases the objective") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix z = gaussian(200, 3, seed + 20);
        std::mt19937_64 rng(seed);
        const Matrix init = dsc::kmeans_plus_plus(z, 6, rng);
        std::vector<double> trace_values;
        const auto s = dsc::lloyd(z, init, 300, &trace_values);
        REQUIRE_FALSE(trace_values.empty());
        for (std::size_t i = 1; i < trace_values.size(); ++i) CHECK(trace_values[i] <= trace_values[i - 1] + 1e-12);
        CHECK(trace_values.back() == doctest::Approx(s.objective));
        check_consistent(z, s, 6);
    }
}

TEST_CASE("lloyd repairs an empty cluster") {
    const Matrix z{{0}, {1}, {2}, {10}};
    const auto s = dsc::lloyd(z, Matrix{{1}, {100}}, 300);
    check_consistent(z, s, 2);
}

TEST_CASE("kmeans_plus_plus handles coincident points") {
    const Matrix z{{1, 1}, {1, 1}, {1, 1}, {2, 2}};
    std::mt19937_64 rng(0);
    const Matrix c = dsc::kmeans_plus_plus(z, 3, rng);
    CHECK(c.rows() == 3);
    const auto s = dsc::kmeans(z, 3, 0);
    CHECK(s.objective == 0.0);
    check_consistent(z, s, 3);
}

TEST_CASE("nearest_centroid breaks ties to the lowest index") {
    const Matrix c{{0}, {2}};
    CHECK(dsc::nearest_centroid(Matrix{{1}, {-1}, {1.5}}, c) == std::vector<int>{0, 0, 1});
}

TEST_CASE("scatter_matrix") {
    dsc::ClusterState one;
    one.assignments = {0, 0};
    one.centroids = Matrix{{1, 0}};
    const Matrix s = dsc::scatter_matrix(Matrix{{0, 0}, {2, 0}}, one);
    CHECK(s == Matrix{{2, 0}, {0, 0}});

    dsc::ClusterState exact;
    exact.assignments = {0, 1, 0};
    exact.centroids = Matrix{{1, 2}, {3, 4}};
    CHECK(dsc::scatter_matrix(Matrix{{1, 2}, {3, 4}, {1, 2}}, exact) == Matrix(2, 2));

    const Matrix z = gaussian(80, 3, 5);
    const auto state = dsc::kmeans(z, 4, 5);
    CHECK(diag_sum(dsc::scatter_matrix(z, state)) == doctest::Approx(state.objective).epsilon(1e-10));
}

TEST_CASE("solve_rotation") {
    const auto r = dsc::solve_rotation(Matrix{{2, 0}, {0, 0}});
    CHECK(r.eigenvalues == std::vector<double>{0, 2});
    CHECK(std::abs(r.rotation(1, 0)) == 1.0);
    CHECK(std::abs(r.rotation(0, 1)) == 1.0);
    CHECK(r.rotation(0, 0) == 0.0);
    CHECK(r.rotation(1, 1) == 0.0);

    const auto iso = dsc::solve_rotation(Matrix{{4, 0, 0}, {0, 4, 0}, {0, 0, 4}});
    CHECK(iso.eigenvalues == std::vector<double>(3, 4.0));
    CHECK(iso.rotation == Matrix::identity(3));
}

TEST_CASE("rotation invariants on real clusterings") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix z = gaussian(150, 5, seed + 7, 2.0);
        const auto state = dsc::kmeans(z, 4, seed);
        const Matrix s = dsc::scatter_matrix(z, state);
        const auto rot = dsc::solve_rotation(s);
        const Matrix& v = rot.rotation;
        CHECK(dsc::max_abs(dsc::matmul_tn(v, v) - Matrix::identity(5)) < 1e-10);

        double sum = 0;
        for (double e : rot.eigenvalues) sum += e;
        CHECK(std::abs(sum - state.objective) < 1e-8 * std::max(1.0, state.objective));
        CHECK(std::abs(diag_sum(dsc::matmul_nt(dsc::matmul(v, s), v)) - state.objective) < 1e-8 * state.objective);
        CHECK(rot.eigenvalues.back() == *std::max_element(rot.eigenvalues.begin(), rot.eigenvalues.end()));

        // Last column is the worst direction: S v_D = lambda_D v_D.
        for (std::size_t r = 0; r < 5; ++r) {
            double sv = 0;
            for (std::size_t c = 0; c < 5; ++c) sv += s(r, c) * v(c, 4);
            CHECK(std::abs(sv - rot.eigenvalues.back() * v(r, 4)) < 1e-8 * std::max(1.0, state.objective));
        }

        // Isometry.
        const Matrix zv = dsc::matmul(z, v);
        const Matrix d0 = dsc::pairwise_sq_dists(z), d1 = dsc::pairwise_sq_dists(zv);
        CHECK(dsc::max_abs(d0 - d1) < 1e-8);

        // Similarity: rotating Z keeps the eigenvalue list.
        const Matrix q = orthogonal(5, seed + 90);
        const Matrix zq = dsc::matmul(z, q);
        dsc::ClusterState moved = state;
        moved.centroids = dsc::matmul(state.centroids, q);
        const auto rq = dsc::solve_rotation(dsc::scatter_matrix(zq, moved));
        for (std::size_t d = 0; d < 5; ++d) CHECK(std::abs(rq.eigenvalues[d] - rot.eigenvalues[d]) < 1e-8);
    }
}

TEST_CASE("build_target") {
    dsc::ClusterState one;
    one.assignments = {0, 0};
    one.centroids = Matrix{{1, 0}};
    const Matrix z{{0, 0}, {2, 0}};
    const auto rot = dsc::solve_rotation(dsc::scatter_matrix(z, one));
    const auto t = dsc::build_target(z, rot, one);
    // v_D = +-e1 so the centroid projection is +-1; the sign of v_D flips both columns alike.
    const double sign = rot.rotation(0, 1);
    CHECK(t.targets == Matrix{{0, sign}, {0, sign}});
    CHECK(t.pull == std::vector<double>{sign, sign});

    // Points at their centroids: Y = ZV.
    dsc::ClusterState exact;
    exact.assignments = {0, 1, 0};
    exact.centroids = Matrix{{1, 2}, {3, 4}};
    const Matrix ze{{1, 2}, {3, 4}, {1, 2}};
    const auto r2 = dsc::solve_rotation(Matrix{{3, 1}, {1, 2}});
    CHECK(dsc::build_target(ze, r2, exact).targets == dsc::matmul(ze, r2.rotation));
}

TEST_CASE("target support is bounded by K") {
    const Matrix z = gaussian(100, 3, 14);
    const auto state = dsc::kmeans(z, 4, 14);
    const auto rot = dsc::solve_rotation(dsc::scatter_matrix(z, state));
    const auto t = dsc::build_target(z, rot, state);
    CHECK(std::set<double>(t.pull.begin(), t.pull.end()).size() <= 4);
    // Only the last column is replaced.
    const Matrix zv = dsc::matmul(z, rot.rotation);
    for (std::size_t r = 0; r < 100; ++r) {
        CHECK(t.targets(r, 0) == zv(r, 0));
        CHECK(t.targets(r, 1) == zv(r, 1));
        CHECK(t.targets(r, 2) == t.pull[r]);
    }
}

TEST_CASE("losses") {
    const Matrix fx = gaussian(30, 3, 1);
    const auto state = dsc::kmeans(fx, 3, 1);
    const auto rot = dsc::solve_rotation(dsc::scatter_matrix(fx, state));
    const auto t = dsc::build_target(fx, rot, state);
    CHECK(dsc::spectral_loss(fx, rot, t.targets) == 0.0);
    CHECK(dsc::greedy_loss(fx, rot, t.targets) > 0.0);
    CHECK(std::abs(dsc::spectral_loss(fx, rot, t.targets) + dsc::greedy_loss(fx, rot, t.targets) -
                   dsc::joint_loss(fx, rot, t.targets)) < 1e-10);

    // Last rotated column already equal to y.
    const Matrix y = dsc::matmul(fx, rot.rotation);
    CHECK(dsc::greedy_loss(fx, rot, y) == 0.0);

    // Perturbing the first D-1 target columns leaves greedy_loss alone.
    Matrix perturbed = t.targets;
    for (std::size_t r = 0; r < 30; ++r) {
        perturbed(r, 0) += 3.0;
        perturbed(r, 1) -= 1.0;
    }
    CHECK(dsc::greedy_loss(fx, rot, perturbed) == dsc::greedy_loss(fx, rot, t.targets));
}

TEST_CASE("target entropy drops below the rotated column") {
    const dsc::Dataset ds = dsc::synth_blobs(128, Matrix{{0, 0, 0}, {6, 0, 0}, {0, 6, 0}, {0, 0, 6}}, 1.0, 2);
    const auto state = dsc::kmeans(ds.features, 4, 2);
    const auto rot = dsc::solve_rotation(dsc::scatter_matrix(ds.features, state));
    const auto t = dsc::build_target(ds.features, rot, state);
    const auto last = dsc::matmul(ds.features, rot.rotation).col(2);
    const auto e = dsc::entropy_compare(last, t.pull);
    REQUIRE(e.occupied_x > 4);
    CHECK(e.hy <= std::log(4.0) + 1e-12);
    CHECK(e.hy < e.hx);
}
