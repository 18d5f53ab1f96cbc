#include "dsc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "dsc/errors.hpp"
#include "dsc/log.hpp"

namespace dsc {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::string hex(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
    return os.str();
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
    if (bytes.size() < offset + 4) {
        throw FormatError(path.string() + ": truncated IDX header (" + std::to_string(bytes.size()) +
                          " bytes)");
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b, 4);
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string_view rest = line;
    while (true) {
        const auto comma = rest.find(',');
        cells.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return cells;
}

std::optional<double> parse_number(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    const char* begin = cell.data();
    if (*begin == '+') ++begin;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

void standardize_columns(Matrix& x) {
    const std::size_t n = x.rows();
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        for (std::size_t r = 0; r < n; ++r) x(r, c) = sd > 0.0 ? (x(r, c) - mean) / sd : 0.0;
    }
}

}  // namespace

std::size_t Dataset::num_classes() const {
    if (!labels || labels->empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.features = features.select_rows(indices);
    if (labels) {
        Labels l(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) l[i] = (*labels)[indices[i]];
        out.labels = compact_labels(l);
    }
    out.name = name;
    out.source = source;
    return out;
}

Labels compact_labels(const Labels& labels) {
    std::map<int, int> ids;
    for (int l : labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [key, id] : ids) id = next++;
    Labels out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids.at(labels[i]);
    return out;
}

void validate(const Dataset& ds) {
    if (!ds.features.all_finite()) throw InvalidInput(ds.name + ": non-finite feature value");
    if (!ds.labels) return;
    if (ds.labels->size() != ds.size()) {
        throw InvalidInput(ds.name + ": " + std::to_string(ds.labels->size()) + " labels for " +
                           std::to_string(ds.size()) + " samples");
    }
    std::vector<std::size_t> counts(ds.num_classes(), 0);
    for (int l : *ds.labels) {
        if (l < 0) throw InvalidInput(ds.name + ": negative label");
        ++counts[static_cast<std::size_t>(l)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw InvalidInput(ds.name + ": class " + std::to_string(k) + " is empty");
    }
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels) {
    const auto bytes = read_all(images);
    const std::uint32_t magic = read_be32(bytes, 0, images);
    if (magic != kIdxImageMagic) {
        throw FormatError(images.string() + ": bad image magic, expected " + hex(kIdxImageMagic) +
                          ", found " + hex(magic));
    }
    const std::uint32_t count = read_be32(bytes, 4, images);
    const std::uint32_t rows = read_be32(bytes, 8, images);
    const std::uint32_t cols = read_be32(bytes, 12, images);
    const std::size_t width = std::size_t{rows} * cols;
    const std::size_t expected = 16 + std::size_t{count} * width;
    if (bytes.size() < expected) {
        throw FormatError(images.string() + ": payload holds " + std::to_string(bytes.size() - 16) +
                          " bytes, header promises " + std::to_string(expected - 16));
    }

    Dataset ds;
    ds.features = Matrix(count, width);
    for (std::size_t i = 0; i < std::size_t{count} * width; ++i) {
        ds.features.data()[i] = static_cast<double>(bytes[16 + i]) / 255.0;
    }
    ds.name = images.stem().string();
    ds.source = images.string();

    if (labels) {
        const auto lbytes = read_all(*labels);
        const std::uint32_t lmagic = read_be32(lbytes, 0, *labels);
        if (lmagic != kIdxLabelMagic) {
            throw FormatError(labels->string() + ": bad label magic, expected " + hex(kIdxLabelMagic) +
                              ", found " + hex(lmagic));
        }
        const std::uint32_t lcount = read_be32(lbytes, 4, *labels);
        if (lcount != count) {
            throw FormatError(labels->string() + ": " + std::to_string(lcount) + " labels for " +
                              std::to_string(count) + " images");
        }
        if (lbytes.size() < 8 + std::size_t{lcount}) {
            throw FormatError(labels->string() + ": truncated label payload");
        }
        Labels l(lcount);
        for (std::size_t i = 0; i < lcount; ++i) l[i] = lbytes[8 + i];
        ds.labels = compact_labels(l);
        ds.source += "," + labels->string();
    }
    return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images,
              const std::optional<std::filesystem::path>& labels, std::uint32_t image_rows,
              std::uint32_t image_cols) {
    if (image_rows == 0 || image_cols == 0) {
        image_rows = 1;
        image_cols = static_cast<std::uint32_t>(ds.width());
    }
    if (std::size_t{image_rows} * image_cols != ds.width()) {
        throw InvalidInput("save_idx: image shape does not match feature width");
    }
    std::ofstream out(images, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + images.string());
    write_be32(out, kIdxImageMagic);
    write_be32(out, static_cast<std::uint32_t>(ds.size()));
    write_be32(out, image_rows);
    write_be32(out, image_cols);
    for (double v : ds.features.values()) {
        out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    if (labels) {
        if (!ds.labels) throw InvalidInput("save_idx: dataset has no labels");
        std::ofstream lout(*labels, std::ios::binary);
        if (!lout) throw InvalidInput("cannot write " + labels->string());
        write_be32(lout, kIdxLabelMagic);
        write_be32(lout, static_cast<std::uint32_t>(ds.size()));
        for (int l : *ds.labels) lout.put(static_cast<char>(l));
    }
}

Dataset load_csv(const std::filesystem::path& path, const std::optional<std::string>& label_column) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
        line_numbers.push_back(line_no);
    }
    if (rows.empty()) throw FormatError(path.string() + ": empty CSV");

    std::optional<std::vector<std::string>> header;
    if (std::any_of(rows.front().begin(), rows.front().end(),
                    [](const std::string& c) { return !parse_number(c); })) {
        header = rows.front();
        rows.erase(rows.begin());
        line_numbers.erase(line_numbers.begin());
    }
    if (rows.empty()) throw FormatError(path.string() + ": no data rows");

    const std::size_t width = header ? header->size() : rows.front().size();
    std::optional<std::size_t> label_idx;
    if (label_column) {
        if (header) {
            const auto it = std::find(header->begin(), header->end(), *label_column);
            if (it == header->end()) {
                throw InvalidInput(path.string() + ": no column named '" + *label_column + "'");
            }
            label_idx = static_cast<std::size_t>(it - header->begin());
        } else {
            std::size_t idx = 0;
            const auto [ptr, ec] = std::from_chars(label_column->data(),
                                                   label_column->data() + label_column->size(), idx);
            if (ec != std::errc() || ptr != label_column->data() + label_column->size() ||
                idx >= width) {
                throw InvalidInput(path.string() + ": label column '" + *label_column +
                                   "' is not a valid index for a headerless file");
            }
            label_idx = idx;
        }
    }

    const std::size_t p = width - (label_idx ? 1 : 0);
    Matrix x(rows.size(), p);
    Labels labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            throw FormatError(path.string() + ": row " + std::to_string(r) + " (line " +
                              std::to_string(line_numbers[r]) + ") has " +
                              std::to_string(rows[r].size()) + " cells, expected " +
                              std::to_string(width));
        }
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < width; ++c) {
            const auto value = parse_number(rows[r][c]);
            if (!value) {
                throw FormatError(path.string() + ": non-numeric cell '" + rows[r][c] + "' at row " +
                                  std::to_string(r) + ", column " + std::to_string(c));
            }
            if (label_idx && c == *label_idx) {
                labels.push_back(static_cast<int>(std::lround(*value)));
            } else {
                x(r, out_c++) = *value;
            }
        }
    }
    standardize_columns(x);

    Dataset ds;
    ds.features = std::move(x);
    if (label_idx) ds.labels = compact_labels(labels);
    ds.name = path.stem().string();
    ds.source = path.string();
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    for (std::size_t c = 0; c < ds.width(); ++c) out << (c ? "," : "") << 'f' << c;
    if (ds.labels) out << (ds.width() ? "," : "") << "label";
    out << '\n' << std::setprecision(17);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t c = 0; c < ds.width(); ++c) out << (c ? "," : "") << ds.features(r, c);
        if (ds.labels) out << (ds.width() ? "," : "") << (*ds.labels)[r];
        out << '\n';
    }
    if (!out) throw InvalidInput("write failed: " + path.string());
}

Dataset synth_blobs(std::size_t n_per_cluster, const Matrix& centers, double stddev,
                    std::uint64_t seed) {
    if (!(stddev > 0.0)) throw InvalidInput("synth_blobs: stddev must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, stddev);
    const std::size_t k = centers.rows(), p = centers.cols();
    Dataset ds;
    ds.features = Matrix(k * n_per_cluster, p);
    ds.labels = Labels(k * n_per_cluster);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n_per_cluster; ++i) {
            const std::size_t r = c * n_per_cluster + i;
            for (std::size_t j = 0; j < p; ++j) ds.features(r, j) = centers(c, j) + noise(rng);
            (*ds.labels)[r] = static_cast<int>(c);
        }
    }
    ds.name = "blobs";
    ds.source = "synth_blobs(seed=" + std::to_string(seed) + ")";
    return ds;
}

Dataset synth_circles(std::size_t n_per_ring, double r_inner, double r_outer, double noise_std,
                      std::uint64_t seed) {
    if (!(r_inner < r_outer)) throw InvalidInput("synth_circles: r_inner must be < r_outer");
    if (noise_std < 0.0) throw InvalidInput("synth_circles: noise_std must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset ds;
    ds.features = Matrix(2 * n_per_ring, 2);
    ds.labels = Labels(2 * n_per_ring);
    const double radii[2] = {r_inner, r_outer};
    for (std::size_t ring = 0; ring < 2; ++ring) {
        for (std::size_t i = 0; i < n_per_ring; ++i) {
            const std::size_t r = ring * n_per_ring + i;
            const double t = angle(rng);
            const double nx = noise(rng), ny = noise(rng);
            ds.features(r, 0) = radii[ring] * std::cos(t) + noise_std * nx;
            ds.features(r, 1) = radii[ring] * std::sin(t) + noise_std * ny;
            (*ds.labels)[r] = static_cast<int>(ring);
        }
    }
    ds.name = "circles";
    ds.source = "synth_circles(seed=" + std::to_string(seed) + ")";
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw InvalidInput("split: fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.size();
    const auto first_total = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction));
    std::mt19937_64 rng(seed);

    bool stratify = ds.labels.has_value();
    std::vector<std::vector<std::size_t>> groups;
    if (stratify) {
        groups.resize(ds.num_classes());
        for (std::size_t i = 0; i < n; ++i) groups[static_cast<std::size_t>((*ds.labels)[i])].push_back(i);
        for (const auto& g : groups) {
            if (g.size() < 2) {
                log::warn("split: a class has fewer than 2 members; falling back to unstratified split");
                stratify = false;
                break;
            }
        }
    }
    if (!stratify) {
        groups.assign(1, std::vector<std::size_t>(n));
        std::iota(groups[0].begin(), groups[0].end(), 0);
    }

    // Per-group quotas: floor shares, remainder handed out by largest fractional part.
    std::vector<std::size_t> quota(groups.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double exact = static_cast<double>(groups[g].size()) * fraction;
        quota[g] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[g];
        remainders.emplace_back(exact - std::floor(exact), g);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < first_total && i < remainders.size(); ++i, ++assigned) {
        ++quota[remainders[i].second];
    }

    std::vector<std::size_t> first, second;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto members = groups[g];
        std::shuffle(members.begin(), members.end(), rng);
        first.insert(first.end(), members.begin(), members.begin() + static_cast<long>(quota[g]));
        second.insert(second.end(), members.begin() + static_cast<long>(quota[g]), members.end());
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {ds.subset(first), ds.subset(second)};
}

}  // namespace dsc
