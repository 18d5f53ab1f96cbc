#include "dsc/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "dsc/errors.hpp"
#include "dsc/log.hpp"
#include "dsc/numerics.hpp"
#include "dsc/spectral.hpp"

namespace dsc {
namespace {

constexpr std::size_t kLloydMaxIter = 300;
constexpr std::size_t kEntropyBins = 256;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

KmeansOptions kmeans_options(const RunConfig& cfg) { return {cfg.n_init, kLloydMaxIter}; }

void require_labels(const Dataset& ds, const char* who) {
    if (!ds.labels) throw InvalidInput(std::string(who) + ": dataset has no labels");
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << std::setprecision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
    if (!out) throw InvalidInput("write failed: " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t count = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc()) throw FormatError(path.string() + ": bad number '" + cell + "'");
            values.push_back(v);
            ++count;
        }
        if (rows == 0) cols = count;
        if (count != cols) throw FormatError(path.string() + ": ragged row " + std::to_string(rows));
        ++rows;
    }
    return Matrix(rows, cols, std::move(values));
}

std::vector<std::size_t> chunk_indices(const std::vector<std::size_t>& order, std::size_t chunk_len,
                                       std::size_t iteration) {
    const std::size_t n = order.size();
    std::vector<std::size_t> chunk(chunk_len);
    const std::size_t start = ((iteration - 1) * chunk_len) % n;
    for (std::size_t j = 0; j < chunk_len; ++j) chunk[j] = order[(start + j) % n];
    return chunk;
}

}  // namespace

Mode parse_mode(std::string_view name) {
    if (name == "ae_kmeans") return Mode::ae_kmeans;
    if (name == "ae_ncut") return Mode::ae_ncut;
    if (name == "ae_se") return Mode::ae_se;
    if (name == "ae_gk") return Mode::ae_gk;
    if (name == "dsc") return Mode::dsc;
    throw InvalidConfig("unknown mode '" + std::string(name) +
                        "' (expected ae_kmeans, ae_ncut, ae_se, ae_gk or dsc)");
}

std::string_view mode_name(Mode mode) {
    switch (mode) {
        case Mode::ae_kmeans: return "ae_kmeans";
        case Mode::ae_ncut: return "ae_ncut";
        case Mode::ae_se: return "ae_se";
        case Mode::ae_gk: return "ae_gk";
        case Mode::dsc: return "dsc";
    }
    return "dsc";
}

std::size_t resolve_clusters(const Dataset& ds, const RunConfig& cfg) {
    const std::size_t k = cfg.clusters != 0 ? cfg.clusters : ds.num_classes();
    if (k == 0) throw InvalidConfig("number of clusters not set and dataset has no labels");
    if (k > ds.size()) throw InvalidConfig("more clusters than samples");
    return k;
}

PretrainResult run_pretrain(const Dataset& ds, const RunConfig& cfg) {
    validate(cfg);
    validate(ds);
    const auto widths = mirrored_widths(ds.width(), cfg.hidden_widths, cfg.embedding_dim);
    PretrainResult result{init_model(widths, mix_seed(cfg.seed, 1)), {}};
    PretrainConfig pc;
    pc.epochs = cfg.pretrain_epochs;
    pc.batch_size = cfg.pretrain_batch;
    pc.adam = {cfg.lr, cfg.beta1, cfg.beta2};
    pc.seed = mix_seed(cfg.seed, 2);
    result.log = pretrain(result.model, ds.features, pc);
    return result;
}

RunArtifacts run_cluster(const Dataset& ds, const MlpModel& pretrained, const RunConfig& cfg, Mode mode,
                         const IterationObserver& observer) {
    validate(cfg);
    validate(ds);
    if (mode == Mode::ae_kmeans || mode == Mode::ae_ncut) {
        throw InvalidConfig("run_cluster: mode " + std::string(mode_name(mode)) + " has no training loop");
    }
    if (pretrained.input_width() != ds.width()) {
        throw InvalidInput("run_cluster: checkpoint expects width " + std::to_string(pretrained.input_width()) +
                           ", dataset has " + std::to_string(ds.width()));
    }
    const std::size_t k = resolve_clusters(ds, cfg);
    const std::size_t n = ds.size();
    const Matrix& x = ds.features;

    RunArtifacts art;
    art.mode = mode;
    art.model = pretrained;
    AdamState adam(art.model, {cfg.lr, cfg.beta1, cfg.beta2});

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 3));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::size_t chunk_len = std::min(cfg.chunk_size, n);

    Matrix full = encode(art.model, x);
    art.initial_assignments = kmeans(full, k, mix_seed(cfg.seed, 4), kmeans_options(cfg)).assignments;
    std::vector<int> previous = art.initial_assignments;

    const Matrix identity = Matrix::identity(art.model.embedding_dim());
    for (std::size_t it = 1; it <= cfg.max_outer_iters; ++it) {
        const std::vector<std::size_t> chunk = chunk_indices(order, chunk_len, it);
        const Matrix xc = x.select_rows(chunk);
        const Matrix h = encode(art.model, xc);

        IterationRecord rec;
        rec.iteration = it;
        rec.chunk_rows = chunk.size();
        Matrix z;
        if (mode == Mode::ae_gk) {
            z = h;
        } else {
            const AffinityGraph graph = build_affinity(h, cfg.neighbors);
            PowerIterationResult pi = power_iterate(graph.transition, h, cfg.a_hat, cfg.t_max);
            rec.power_steps = pi.iterations;
            z = std::move(pi.embedding);
        }

        const ClusterState state = kmeans(z, k, mix_seed(cfg.seed, 100 + it), kmeans_options(cfg));
        const GreedyRotation rot = solve_rotation(scatter_matrix(z, state));
        const GreedyTarget target = build_target(z, rot, state);

        rec.kmeans_objective = state.objective;
        rec.rotated_trace = trace(matmul_tn(rot.rotation, matmul(rot.scatter, rot.rotation)));
        rec.spectral_loss = spectral_loss(h, rot, target.targets);
        rec.greedy_loss = greedy_loss(h, rot, target.targets);
        rec.joint_loss = joint_loss(h, rot, target.targets);
        const std::vector<double> worst = matmul(z, rot.rotation).col(rot.dim() - 1);
        const EntropyComparison ent = entropy_compare(worst, target.pull, kEntropyBins);
        rec.entropy_x = ent.hx;
        rec.entropy_y = ent.hy;

        if (observer) observer(IterationView{it, chunk, h, z, state, rot, target});

        const JointStepConfig step{cfg.train_batch, cfg.batches_per_iter, mix_seed(cfg.seed, 5), it};
        switch (mode) {
            case Mode::dsc:
                rec.train_loss = train_joint_step(art.model, adam, xc,
                                                  {rot.rotation, target.targets, TargetColumns::all}, step);
                break;
            case Mode::ae_se:
                rec.train_loss = train_joint_step(art.model, adam, xc, {identity, z, TargetColumns::all}, step);
                break;
            case Mode::ae_gk:
                rec.train_loss = train_joint_step(
                    art.model, adam, xc, {rot.rotation, target.targets, TargetColumns::last_only}, step);
                break;
            default:
                break;
        }

        full = encode(art.model, x);
        std::vector<int> current = nearest_centroid(full, state.centroids);
        rec.changed_fraction = changed_fraction(previous, current);
        if (ds.labels) {
            rec.acc = acc(*ds.labels, current);
            rec.nmi = nmi(*ds.labels, current);
        }
        art.iterations.push_back(rec);
        art.centroids = state.centroids;
        art.rotation = rot;
        previous = std::move(current);
        if (rec.changed_fraction < cfg.convergence_threshold) {
            art.converged = true;
            break;
        }
    }
    if (!art.converged) {
        log::warn("run_cluster: no convergence after " + std::to_string(cfg.max_outer_iters) +
                  " outer iterations");
    }

    art.assignments = previous;
    if (mode == Mode::ae_se) {
        // Posthoc kmeans on the learned spectral embeddings.
        ClusterState posthoc = kmeans(full, k, mix_seed(cfg.seed, 6), kmeans_options(cfg));
        art.assignments = std::move(posthoc.assignments);
        art.centroids = std::move(posthoc.centroids);
    }
    if (cfg.final_kmeans) {
        art.final_kmeans_assignments = kmeans(full, k, mix_seed(cfg.seed, 7), kmeans_options(cfg)).assignments;
        if (ds.labels) art.final_kmeans_report = evaluate(*ds.labels, *art.final_kmeans_assignments);
    }
    if (ds.labels) {
        art.report = evaluate(*ds.labels, art.assignments, std::span<const int>(art.iterations.empty()
                                                                                    ? art.initial_assignments
                                                                                    : previous));
        art.report->changed_fraction = art.iterations.empty() ? 0.0 : art.iterations.back().changed_fraction;
    }
    return art;
}

EvalReport run_ablation(const Dataset& ds, const MlpModel& pretrained, const RunConfig& cfg, Mode mode) {
    validate(cfg);
    require_labels(ds, "run_ablation");
    const std::size_t k = resolve_clusters(ds, cfg);
    switch (mode) {
        case Mode::ae_kmeans: {
            const ClusterState s = kmeans(encode(pretrained, ds.features), k, mix_seed(cfg.seed, 8),
                                          kmeans_options(cfg));
            return evaluate(*ds.labels, s.assignments);
        }
        case Mode::ae_ncut: {
            const AffinityGraph g = build_affinity(encode(pretrained, ds.features), cfg.neighbors);
            const Matrix c = ncut_baseline(g.transition, k);
            const ClusterState s = kmeans(c, k, mix_seed(cfg.seed, 9), kmeans_options(cfg));
            return evaluate(*ds.labels, s.assignments);
        }
        default: {
            const RunArtifacts art = run_cluster(ds, pretrained, cfg, mode);
            return *art.report;
        }
    }
}

InferenceResult run_infer(const Dataset& ds, const MlpModel& model, const Matrix& centroids) {
    if (ds.width() != model.input_width()) {
        throw InvalidInput("run_infer: data width " + std::to_string(ds.width()) + " but model expects " +
                           std::to_string(model.input_width()));
    }
    if (centroids.cols() != model.embedding_dim()) {
        throw InvalidInput("run_infer: centroids do not match the embedding dimension");
    }
    InferenceResult out;
    out.assignments = nearest_centroid(encode(model, ds.features), centroids);
    if (ds.labels) out.report = evaluate(*ds.labels, out.assignments);
    return out;
}

RunArtifacts run_baseline(const Dataset& ds, const RunConfig& cfg, std::string_view method) {
    validate(cfg);
    validate(ds);
    const std::size_t k = resolve_clusters(ds, cfg);
    RunArtifacts art;
    art.converged = true;
    ClusterState s;
    if (method == "kmeans") {
        art.mode = Mode::ae_kmeans;
        s = kmeans(ds.features, k, mix_seed(cfg.seed, 10), kmeans_options(cfg));
    } else if (method == "ncut") {
        art.mode = Mode::ae_ncut;
        const AffinityGraph g = build_affinity(ds.features, cfg.neighbors);
        s = kmeans(ncut_baseline(g.transition, k), k, mix_seed(cfg.seed, 11), kmeans_options(cfg));
    } else {
        throw InvalidConfig("unknown baseline method '" + std::string(method) + "' (expected kmeans or ncut)");
    }
    art.assignments = s.assignments;
    art.centroids = s.centroids;
    if (ds.labels) art.report = evaluate(*ds.labels, art.assignments);
    return art;
}

Matrix export_embeddings(const Matrix& embeddings, std::span<const int> assigned,
                         const std::optional<Labels>& labels, std::size_t dims,
                         const std::filesystem::path& path) {
    if (dims == 0 || dims > embeddings.cols()) {
        throw InvalidInput("export_embeddings: dims must lie in [1, " + std::to_string(embeddings.cols()) + "]");
    }
    if (assigned.size() != embeddings.rows() || (labels && labels->size() != embeddings.rows())) {
        throw InvalidInput("export_embeddings: row count mismatch");
    }
    const Matrix pcs = pca_project(embeddings, dims);
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    for (std::size_t c = 0; c < pcs.cols(); ++c) out << "pc" << (c + 1) << ',';
    out << "assigned_cluster" << (labels ? ",true_label" : "") << '\n';
    out << std::setprecision(17);
    for (std::size_t r = 0; r < pcs.rows(); ++r) {
        for (std::size_t c = 0; c < pcs.cols(); ++c) out << pcs(r, c) << ',';
        out << assigned[r];
        if (labels) out << ',' << (*labels)[r];
        out << '\n';
    }
    if (!out) throw InvalidInput("write failed: " + path.string());
    return pcs;
}

void save_artifacts(const RunArtifacts& art, const RunConfig& cfg, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InvalidInput("cannot create " + dir.string() + ": " + ec.message());

    if (!art.model.layers.empty()) save_checkpoint(art.model, dir / "model.dscm");
    write_matrix_csv(art.centroids, dir / "centroids.csv");
    if (art.rotation) write_matrix_csv(art.rotation->rotation, dir / "rotation.csv");

    {
        std::ofstream out(dir / "assignments.csv");
        out << "index,cluster\n";
        for (std::size_t i = 0; i < art.assignments.size(); ++i) out << i << ',' << art.assignments[i] << '\n';
    }
    {
        std::ofstream out(dir / "iterations.csv");
        out << "iteration,chunk_rows,power_steps,kmeans_objective,rotated_trace,spectral_loss,greedy_loss,"
               "joint_loss,train_loss,entropy_x,entropy_y,changed_fraction,acc,nmi\n";
        out << std::setprecision(12);
        for (const auto& r : art.iterations) {
            out << r.iteration << ',' << r.chunk_rows << ',' << r.power_steps << ',' << r.kmeans_objective << ','
                << r.rotated_trace << ',' << r.spectral_loss << ',' << r.greedy_loss << ',' << r.joint_loss << ','
                << r.train_loss << ',' << r.entropy_x << ',' << r.entropy_y << ',' << r.changed_fraction << ','
                << (r.acc ? std::to_string(*r.acc) : "") << ',' << (r.nmi ? std::to_string(*r.nmi) : "") << '\n';
        }
    }
    {
        std::ofstream out(dir / "report.txt");
        out << "mode = " << mode_name(art.mode) << '\n';
        out << "iterations = " << art.iterations.size() << '\n';
        out << "converged = " << (art.converged ? "true" : "false") << '\n';
        if (art.report) out << to_text(*art.report);
        if (art.final_kmeans_report) {
            out << "final_kmeans_acc = " << art.final_kmeans_report->acc << '\n';
            out << "final_kmeans_nmi = " << art.final_kmeans_report->nmi << '\n';
        }
    }
    if (art.report) {
        std::ofstream out(dir / "report.csv");
        out << "mode,iterations,converged," << csv_header() << '\n';
        out << mode_name(art.mode) << ',' << art.iterations.size() << ',' << (art.converged ? 1 : 0) << ','
            << to_csv_row(*art.report) << '\n';
    }
    std::ofstream(dir / "config.txt") << format_config(cfg);
}

LoadedArtifacts load_artifacts(const std::filesystem::path& dir) {
    LoadedArtifacts out;
    out.model = load_checkpoint(dir / "model.dscm");
    out.centroids = read_matrix_csv(dir / "centroids.csv");
    if (std::filesystem::exists(dir / "rotation.csv")) out.rotation = read_matrix_csv(dir / "rotation.csv");
    std::ifstream in(dir / "assignments.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        out.assignments.push_back(std::stoi(line.substr(comma + 1)));
    }
    return out;
}

}  // namespace dsc
