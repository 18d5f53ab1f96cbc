#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsc/autoencoder.hpp"
#include "dsc/config.hpp"
#include "dsc/data.hpp"
#include "dsc/graph.hpp"
#include "dsc/greedy.hpp"
#include "dsc/metrics.hpp"

namespace dsc {

/// Training variants: the full method and the ablations that isolate its parts.
enum class Mode {
    ae_kmeans,  // kmeans on pretrained embeddings
    ae_ncut,    // normalised cut on the pretrained-embedding graph
    ae_se,      // encoder regressed onto the full spectral embedding, posthoc kmeans
    ae_gk,      // greedy loss only, targets from autoencoder embeddings
    dsc,        // joint loss on spectral embeddings
};

Mode parse_mode(std::string_view name);
std::string_view mode_name(Mode mode);

struct PretrainResult {
    MlpModel model;
    TrainingLog log;
};

/// Initialises a mirrored autoencoder for the dataset width and pretrains it.
PretrainResult run_pretrain(const Dataset& ds, const RunConfig& cfg);

/// Everything recorded for one outer iteration of the clustering loop.
struct IterationRecord {
    std::size_t iteration = 0;
    std::size_t chunk_rows = 0;
    std::size_t power_steps = 0;
    double kmeans_objective = 0.0;
    double rotated_trace = 0.0;   // trace(V^T S V)
    double spectral_loss = 0.0;   // chunk losses before the update (sum of squares)
    double greedy_loss = 0.0;
    double joint_loss = 0.0;
    double train_loss = 0.0;      // last mini-batch loss of the update
    double entropy_x = 0.0;       // quantised entropy of the worst rotated coordinate
    double entropy_y = 0.0;       // ... and of its pulled target
    double changed_fraction = 0.0;
    std::optional<double> acc;
    std::optional<double> nmi;
};

/// Read-only view handed to an observer after targets are built, before the update.
struct IterationView {
    std::size_t iteration;
    const std::vector<std::size_t>& chunk;
    const Matrix& embeddings;  // f(X_chunk) before the update
    const Matrix& spectral;    // Z
    const ClusterState& state;
    const GreedyRotation& rotation;
    const GreedyTarget& target;
};

using IterationObserver = std::function<void(const IterationView&)>;

struct RunArtifacts {
    Mode mode = Mode::dsc;
    MlpModel model;
    Matrix centroids;                  // in the embedding space of `model`
    std::optional<GreedyRotation> rotation;
    std::vector<int> initial_assignments;
    std::vector<int> assignments;      // final full-dataset clustering
    std::vector<IterationRecord> iterations;
    bool converged = false;            // false when max_outer_iters fired
    std::optional<EvalReport> report;
    std::optional<std::vector<int>> final_kmeans_assignments;
    std::optional<EvalReport> final_kmeans_report;
};

/// The clustering loop. Each outer iteration takes the next chunk of a seeded shuffle of
/// the dataset, builds targets from it, updates the encoder, then reassigns every sample
/// to its nearest centroid. Stops once fewer than `convergence_threshold` of the samples
/// change cluster.
RunArtifacts run_cluster(const Dataset& ds, const MlpModel& pretrained, const RunConfig& cfg,
                         Mode mode = Mode::dsc, const IterationObserver& observer = {});

/// Runs one variant and scores it against the dataset labels.
EvalReport run_ablation(const Dataset& ds, const MlpModel& pretrained, const RunConfig& cfg, Mode mode);

struct InferenceResult {
    std::vector<int> assignments;
    std::optional<EvalReport> report;
};

/// Out-of-sample assignment: encode, then nearest stored centroid. Builds no graph.
InferenceResult run_infer(const Dataset& ds, const MlpModel& model, const Matrix& centroids);

/// Raw-feature baselines: "kmeans" or "ncut".
RunArtifacts run_baseline(const Dataset& ds, const RunConfig& cfg, std::string_view method);

/// PCA of the embeddings to `dims` columns, written as pc1..pcN,assigned_cluster[,true_label].
/// Returns the projected coordinates.
Matrix export_embeddings(const Matrix& embeddings, std::span<const int> assigned,
                         const std::optional<Labels>& labels, std::size_t dims,
                         const std::filesystem::path& path);

/// Artifact directory I/O: model.dscm, centroids.csv, rotation.csv, assignments.csv,
/// iterations.csv, report.txt, report.csv, config.txt.
void save_artifacts(const RunArtifacts& artifacts, const RunConfig& cfg, const std::filesystem::path& dir);

struct LoadedArtifacts {
    MlpModel model;
    Matrix centroids;
    std::optional<Matrix> rotation;
    std::vector<int> assignments;
};

LoadedArtifacts load_artifacts(const std::filesystem::path& dir);

std::size_t resolve_clusters(const Dataset& ds, const RunConfig& cfg);

}  // namespace dsc
