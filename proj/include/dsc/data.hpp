#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsc/matrix.hpp"

namespace dsc {

using Labels = std::vector<int>;

/// Feature matrix (one sample per row) with optional ground truth.
/// Labels, when present, are compacted to 0..K_true-1 with every class non-empty.
struct Dataset {
    Matrix features;
    std::optional<Labels> labels;
    std::string name;
    std::string source;

    std::size_t size() const { return features.rows(); }
    std::size_t width() const { return features.cols(); }
    std::size_t num_classes() const;

    Dataset subset(std::span<const std::size_t> indices) const;
};

/// Relabels to consecutive ids in ascending order of the original values.
Labels compact_labels(const Labels& labels);

/// Throws InvalidInput if the dataset violates its invariants.
void validate(const Dataset& ds);

/// IDX (MNIST distribution format). Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels = std::nullopt);

/// Writes IDX image/label files; pixels are clamped to [0,1] and quantised to bytes.
void save_idx(const Dataset& ds, const std::filesystem::path& images,
              const std::optional<std::filesystem::path>& labels = std::nullopt,
              std::uint32_t image_rows = 0, std::uint32_t image_cols = 0);

/// Numeric CSV with an optional header row. Features are z-scored per column
/// (constant columns become zero). `label_column` is a header name, or a zero-based
/// column index when the file has no header.
Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::string>& label_column = std::nullopt);

/// Writes features as f0..f{P-1} plus a trailing `label` column when labels exist.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Gaussian blobs, `n_per_cluster` samples around each row of `centers`.
Dataset synth_blobs(std::size_t n_per_cluster, const Matrix& centers, double stddev,
                    std::uint64_t seed);

/// Two concentric noisy rings in the plane; label = ring index (0 inner, 1 outer).
Dataset synth_circles(std::size_t n_per_ring, double r_inner, double r_outer, double noise_std,
                      std::uint64_t seed);

/// Deterministic split; the first part gets floor(N * fraction) samples. Stratified by
/// label when every class has at least two members, otherwise a plain shuffle with a warning.
std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed);

}  // namespace dsc
