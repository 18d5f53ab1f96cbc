#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dsc {

/// Dense row-major matrix of doubles. Value type; copying copies the storage.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    Matrix(const Matrix& other);
    Matrix(Matrix&&) noexcept = default;
    Matrix& operator=(const Matrix& other);
    Matrix& operator=(Matrix&&) noexcept = default;

    static Matrix identity(std::size_t n);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> col(std::size_t c) const;
    void set_col(std::size_t c, std::span<const double> values);

    /// Rows picked by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;

    bool all_finite() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double frobenius_norm(const Matrix& a);
double trace(const Matrix& a);
double max_abs(const Matrix& a);

/// Squared Euclidean distance between rows i of a and j of b.
double row_sq_dist(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j);

/// Full N x N matrix of squared distances between the rows of x.
Matrix pairwise_sq_dists(const Matrix& x);

/// Counters used to verify complexity contracts (e.g. inference never builds an N x N object).
namespace probe {
struct Counters {
    std::size_t largest_matrix = 0;  // largest rows*cols allocated since reset
    std::size_t pairwise = 0;        // pairwise_sq_dists calls
    std::size_t eigensolves = 0;     // sym_eig / sym_eig_large calls
    std::size_t graphs = 0;          // build_affinity / degree_normalize calls
    std::size_t power_iterations = 0;
};
void reset();
Counters snapshot();
void count_eigensolve();
void count_graph();
void count_power_iteration();
}  // namespace probe

}  // namespace dsc
