#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dsc {

/// Counts table: rows are true classes, columns predicted clusters (ids compacted).
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> labels,
                                                       std::span<const int> preds);

/// Clustering accuracy under the best one-to-one matching of clusters to classes.
double acc(std::span<const int> labels, std::span<const int> preds);

/// Normalised mutual information, I(U;V) / sqrt(H(U) H(V)), natural logs.
/// 1 for identical partitions; 0 when one side is a single cluster and the other is not.
double nmi(std::span<const int> labels, std::span<const int> preds);

/// Fraction of samples whose cluster changed, after matching ids between the two runs.
double changed_fraction(std::span<const int> prev, std::span<const int> curr);

/// Plug-in entropies of two columns quantised on a shared uniform grid over their
/// pooled range. Empty bins contribute nothing.
struct EntropyComparison {
    double hx = 0.0;
    double hy = 0.0;
    double step = 0.0;           // bin width
    std::size_t occupied_x = 0;  // non-empty bins of x
    std::size_t occupied_y = 0;
};

EntropyComparison entropy_compare(std::span<const double> x, std::span<const double> y,
                                  std::size_t bins = 256);

struct EvalReport {
    double acc = 0.0;
    double nmi = 0.0;
    std::vector<std::vector<std::size_t>> confusion;
    double changed_fraction = 0.0;
};

EvalReport evaluate(std::span<const int> labels, std::span<const int> preds,
                    std::optional<std::span<const int>> previous = std::nullopt);

/// "key = value" lines.
std::string to_text(const EvalReport& report);
std::string csv_header();
std::string to_csv_row(const EvalReport& report);

}  // namespace dsc
