#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dsc {

/// Every tunable of a run. Defaults follow the reference training protocol; the layer
/// widths are dense stand-ins for a convolutional encoder.
struct RunConfig {
    std::size_t embedding_dim = 10;
    std::vector<std::size_t> hidden_widths{500, 500, 2000};  // encoder hidden layers; decoder mirrors
    std::size_t neighbors = 7;           // M: local scale = distance to M-th neighbour
    double a_hat = 0.01;                 // power-iteration acceleration threshold
    std::size_t t_max = 15;              // power-iteration cap
    std::size_t pretrain_epochs = 200;
    std::size_t pretrain_batch = 256;
    std::size_t train_batch = 32;
    std::size_t batches_per_iter = 40;
    std::size_t chunk_size = 1280;       // must equal train_batch * batches_per_iter
    std::size_t clusters = 0;            // K; 0 = number of ground-truth classes
    double convergence_threshold = 0.005;
    std::size_t max_outer_iters = 100;
    std::size_t n_init = 10;
    std::uint64_t seed = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    bool final_kmeans = false;           // also report a fresh full-dataset kmeans at the end

    bool operator==(const RunConfig&) const = default;
};

/// Throws InvalidConfig on any violated constraint.
void validate(const RunConfig& cfg);

/// Flat "key = value" text, '#' starts a comment, unknown keys are errors. Keys not present
/// keep their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& cfg);

}  // namespace dsc
