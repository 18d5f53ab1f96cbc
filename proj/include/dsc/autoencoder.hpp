#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dsc/data.hpp"
#include "dsc/matrix.hpp"

namespace dsc {

enum class Activation : std::uint8_t { linear = 0, relu = 1 };

/// y = act(x W^T + b); weights are out x in.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::linear;

    std::size_t in() const { return weights.cols(); }
    std::size_t out() const { return weights.rows(); }
    bool operator==(const DenseLayer&) const = default;
};

/// Dense autoencoder. Layers [0, encoder_end) form the encoder f, the rest the decoder g.
struct MlpModel {
    std::vector<DenseLayer> layers;
    std::size_t encoder_end = 0;

    std::size_t input_width() const { return layers.front().in(); }
    std::size_t embedding_dim() const { return layers[encoder_end - 1].out(); }
    std::size_t output_width() const { return layers.back().out(); }
    std::size_t parameter_count() const;
    bool operator==(const MlpModel&) const = default;
};

/// Checks layer chaining and the encoder/decoder split; throws InvalidConfig.
void validate(const MlpModel& model);

/// Mirrored autoencoder from widths such as {P, 500, 500, 2000, D, 2000, 500, 500, P}.
/// Hidden layers use relu; the embedding and output layers are linear. Weights are drawn
/// from U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases start at zero.
MlpModel init_model(std::span<const std::size_t> widths, std::uint64_t seed);

/// Convenience: {P, hidden..., D, reversed hidden..., P}.
std::vector<std::size_t> mirrored_widths(std::size_t input, std::span<const std::size_t> hidden,
                                         std::size_t embedding);

Matrix encode(const MlpModel& model, const Matrix& x);
Matrix decode(const MlpModel& model, const Matrix& h);
Matrix reconstruct(const MlpModel& model, const Matrix& x);

/// Parameter-shaped gradient buffers.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;

    explicit Gradients(const MlpModel& model);
    void zero();
};

/// Which rotated coordinates of f(X)V - Y enter the regression loss.
enum class TargetColumns {
    all,         // joint loss (spectral + greedy)
    all_but_last,  // masked spectral loss
    last_only,   // greedy loss
};

/// Regression target for the encoder: minimise |(f(X) V - Y) M|^2 where M selects columns.
struct RegressionTarget {
    const Matrix& rotation;  // D x D
    const Matrix& targets;   // N x D
    TargetColumns columns = TargetColumns::all;
};

/// Mean squared reconstruction error over all entries of the batch.
double reconstruction_loss(const MlpModel& model, const Matrix& x);
double reconstruction_loss_and_grad(const MlpModel& model, const Matrix& x, Gradients& grad);

/// Selected squared residuals of f(X)V - Y divided by (N * D). Only encoder gradients are
/// produced; decoder entries of `grad` are zeroed.
double regression_loss(const MlpModel& model, const Matrix& x, const RegressionTarget& target);
double regression_loss_and_grad(const MlpModel& model, const Matrix& x,
                                const RegressionTarget& target, Gradients& grad);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moments mirror the model's parameter shapes.
class AdamState {
public:
    AdamState(const MlpModel& model, AdamConfig config);

    /// One update of every parameter, or of the encoder layers only.
    void step(MlpModel& model, const Gradients& grad, bool encoder_only = false);

    std::uint64_t steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    Gradients m_;
    Gradients v_;
    std::uint64_t steps_ = 0;
};

struct PretrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 256;
    AdamConfig adam;
    std::uint64_t seed = 0;
};

struct TrainingLog {
    double initial_loss = 0.0;
    std::vector<double> epoch_losses;  // mean batch loss per epoch
};

/// Minimises the reconstruction loss with Adam; batch order is shuffled per (seed, epoch).
TrainingLog pretrain(MlpModel& model, const Matrix& x, const PretrainConfig& config);

struct JointStepConfig {
    std::size_t batch_size = 32;
    std::size_t batches = 40;
    std::uint64_t seed = 0;  // mixes with the outer iteration to order the batches
    std::uint64_t iteration = 0;
};

/// `batches` encoder-only Adam steps on mini-batches of the chunk (cycling through a
/// shuffled order). Rows of `target.targets` align with rows of `x_chunk`.
/// Returns the loss of the final mini-batch.
double train_joint_step(MlpModel& model, AdamState& adam, const Matrix& x_chunk,
                        const RegressionTarget& target, const JointStepConfig& config);

enum class LossKind { reconstruction, regression };

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t masked = 0;  // parameters whose perturbation crossed a relu kink
};

/// Central-difference check (h = 1e-5) of every parameter's analytic gradient.
/// Relative error is |a - n| / max(|a|, |n|, 1e-7). Parameters whose +-h perturbation flips
/// any relu on/off pattern are skipped and counted as masked.
GradCheckReport grad_check(const MlpModel& model, LossKind kind, const Matrix& x,
                           const RegressionTarget* target = nullptr, double h = 1e-5);

/// Binary checkpoint ("DSCM", version 1, little-endian).
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);
std::vector<unsigned char> serialize(const MlpModel& model);
MlpModel deserialize(std::span<const unsigned char> bytes);

}  // namespace dsc
