#include "dsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "dsc/errors.hpp"
#include "dsc/matrix.hpp"
#include "dsc/numerics.hpp"

namespace dsc {
namespace {

void require_same_length(std::span<const int> a, std::span<const int> b, const char* who) {
    if (a.size() != b.size()) {
        throw InvalidInput(std::string(who) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()));
    }
}

std::vector<std::size_t> compact(std::span<const int> ids, std::size_t& count) {
    std::map<int, std::size_t> index;
    for (int v : ids) index.emplace(v, 0);
    std::size_t next = 0;
    for (auto& [key, id] : index) id = next++;
    count = next;
    std::vector<std::size_t> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = index.at(ids[i]);
    return out;
}

// Largest total overlap achievable by a one-to-one matching of columns to rows.
std::size_t best_matching(const std::vector<std::vector<std::size_t>>& table) {
    const std::size_t rows = table.size();
    const std::size_t cols = rows ? table[0].size() : 0;
    const std::size_t n = std::max(rows, cols);
    Matrix cost(n, n, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) cost(r, c) = -static_cast<double>(table[r][c]);
    const auto assignment = hungarian(cost);
    std::size_t matched = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (assignment[r] < cols) matched += table[r][assignment[r]];
    }
    return matched;
}

double entropy_of_counts(const std::vector<std::size_t>& counts, double n) {
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> labels,
                                                       std::span<const int> preds) {
    require_same_length(labels, preds, "confusion_matrix");
    std::size_t k_true = 0, k_pred = 0;
    const auto l = compact(labels, k_true);
    const auto p = compact(preds, k_pred);
    std::vector<std::vector<std::size_t>> table(k_true, std::vector<std::size_t>(k_pred, 0));
    for (std::size_t i = 0; i < l.size(); ++i) ++table[l[i]][p[i]];
    return table;
}

double acc(std::span<const int> labels, std::span<const int> preds) {
    require_same_length(labels, preds, "acc");
    if (labels.empty()) return 0.0;
    return static_cast<double>(best_matching(confusion_matrix(labels, preds))) /
           static_cast<double>(labels.size());
}

double nmi(std::span<const int> labels, std::span<const int> preds) {
    require_same_length(labels, preds, "nmi");
    if (labels.empty()) return 0.0;
    const auto table = confusion_matrix(labels, preds);
    const double n = static_cast<double>(labels.size());
    const std::size_t ku = table.size(), kv = table[0].size();

    std::vector<std::size_t> row_sum(ku, 0), col_sum(kv, 0);
    for (std::size_t r = 0; r < ku; ++r)
        for (std::size_t c = 0; c < kv; ++c) {
            row_sum[r] += table[r][c];
            col_sum[c] += table[r][c];
        }
    const double hu = entropy_of_counts(row_sum, n);
    const double hv = entropy_of_counts(col_sum, n);

    // Identical up to relabelling: every row and column has exactly one non-zero cell.
    if (ku == kv) {
        bool identical = true;
        for (std::size_t r = 0; r < ku && identical; ++r) {
            std::size_t nonzero = 0;
            for (std::size_t c = 0; c < kv; ++c) nonzero += table[r][c] != 0;
            identical = nonzero == 1;
        }
        if (identical) return 1.0;
    }
    if (hu == 0.0 || hv == 0.0) return 0.0;

    double mi = 0.0;
    for (std::size_t r = 0; r < ku; ++r) {
        for (std::size_t c = 0; c < kv; ++c) {
            if (table[r][c] == 0) continue;
            const double pij = static_cast<double>(table[r][c]) / n;
            mi += pij * std::log(pij * n * n / (static_cast<double>(row_sum[r]) * static_cast<double>(col_sum[c])));
        }
    }
    return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

double changed_fraction(std::span<const int> prev, std::span<const int> curr) {
    require_same_length(prev, curr, "changed_fraction");
    if (prev.empty()) return 0.0;
    const std::size_t kept = best_matching(confusion_matrix(prev, curr));
    return static_cast<double>(prev.size() - kept) / static_cast<double>(prev.size());
}

EntropyComparison entropy_compare(std::span<const double> x, std::span<const double> y, std::size_t bins) {
    if (bins < 2) throw InvalidInput("entropy_compare: need at least 2 bins");
    if (x.empty() || y.empty()) throw InvalidInput("entropy_compare: empty column");
    double lo = x[0], hi = x[0];
    for (double v : x) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : y) lo = std::min(lo, v), hi = std::max(hi, v);

    EntropyComparison out;
    out.step = (hi - lo) / static_cast<double>(bins);
    auto quantize = [&](std::span<const double> col, std::size_t& occupied) {
        std::vector<std::size_t> counts(bins, 0);
        for (double v : col) {
            std::size_t b = 0;
            if (out.step > 0.0) {
                b = std::min(bins - 1, static_cast<std::size_t>(std::floor((v - lo) / out.step)));
            }
            ++counts[b];
        }
        occupied = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(),
                                                          [](std::size_t c) { return c > 0; }));
        return entropy_of_counts(counts, static_cast<double>(col.size()));
    };
    out.hx = quantize(x, out.occupied_x);
    out.hy = quantize(y, out.occupied_y);
    return out;
}

EvalReport evaluate(std::span<const int> labels, std::span<const int> preds,
                    std::optional<std::span<const int>> previous) {
    EvalReport r;
    r.acc = acc(labels, preds);
    r.nmi = nmi(labels, preds);
    r.confusion = confusion_matrix(labels, preds);
    r.changed_fraction = previous ? changed_fraction(*previous, preds) : 0.0;
    return r;
}

std::string to_text(const EvalReport& report) {
    std::ostringstream os;
    os << std::setprecision(6) << std::fixed;
    os << "acc = " << report.acc << '\n';
    os << "nmi = " << report.nmi << '\n';
    os << "changed_fraction = " << report.changed_fraction << '\n';
    os << "confusion = ";
    for (std::size_t r = 0; r < report.confusion.size(); ++r) {
        if (r) os << ';';
        for (std::size_t c = 0; c < report.confusion[r].size(); ++c) {
            os << (c ? " " : "") << report.confusion[r][c];
        }
    }
    os << '\n';
    return os.str();
}

std::string csv_header() { return "acc,nmi,changed_fraction"; }

std::string to_csv_row(const EvalReport& report) {
    std::ostringstream os;
    os << std::setprecision(10) << report.acc << ',' << report.nmi << ',' << report.changed_fraction;
    return os.str();
}

}  // namespace dsc
