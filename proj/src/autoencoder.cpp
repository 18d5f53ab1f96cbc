#include "dsc/autoencoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "dsc/errors.hpp"

namespace dsc {
namespace {

constexpr std::size_t kEvalBatch = 256;
constexpr std::uint32_t kCheckpointVersion = 1;

struct Trace {
    std::vector<Matrix> inputs;  // inputs[l] feeds layer l
    std::vector<Matrix> pre;     // pre-activation of layer l
};

Matrix apply_layer(const DenseLayer& layer, const Matrix& a, Matrix* pre_out) {
    Matrix z = matmul_nt(a, layer.weights);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
    }
    if (pre_out) *pre_out = z;
    if (layer.activation == Activation::relu) {
        for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
    }
    return z;
}

Matrix run_layers(const MlpModel& model, const Matrix& x, std::size_t first, std::size_t last,
                  Trace* trace) {
    if (x.cols() != model.layers[first].in()) {
        throw InvalidInput("forward: input width " + std::to_string(x.cols()) + " but layer " +
                           std::to_string(first) + " expects " +
                           std::to_string(model.layers[first].in()));
    }
    if (trace) {
        trace->inputs.assign(model.layers.size(), Matrix());
        trace->pre.assign(model.layers.size(), Matrix());
    }
    Matrix a = x;
    for (std::size_t l = first; l < last; ++l) {
        if (trace) trace->inputs[l] = a;
        a = apply_layer(model.layers[l], a, trace ? &trace->pre[l] : nullptr);
    }
    return a;
}

// Back-propagates d(loss)/d(output of layer last-1) down to layer `first`.
void backward(const MlpModel& model, const Trace& trace, Matrix d_out, std::size_t first,
              std::size_t last, Gradients& grad) {
    for (std::size_t l = last; l-- > first;) {
        const DenseLayer& layer = model.layers[l];
        if (layer.activation == Activation::relu) {
            const Matrix& pre = trace.pre[l];
            for (std::size_t i = 0; i < d_out.size(); ++i) {
                if (!(pre.data()[i] > 0.0)) d_out.data()[i] = 0.0;
            }
        }
        grad.weights[l] = matmul_tn(d_out, trace.inputs[l]);
        auto& gb = grad.bias[l];
        std::fill(gb.begin(), gb.end(), 0.0);
        for (std::size_t r = 0; r < d_out.rows(); ++r) {
            auto row = d_out.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
        }
        if (l > first) d_out = matmul(d_out, layer.weights);
    }
}

Matrix batched(const MlpModel& model, const Matrix& x, std::size_t first, std::size_t last) {
    if (x.cols() != model.layers[first].in()) {
        throw InvalidInput("forward: input width " + std::to_string(x.cols()) + " but model expects " +
                           std::to_string(model.layers[first].in()));
    }
    const std::size_t width = model.layers[last - 1].out();
    Matrix out(x.rows(), width);
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < x.rows(); start += kEvalBatch) {
        const std::size_t stop = std::min(x.rows(), start + kEvalBatch);
        idx.resize(stop - start);
        std::iota(idx.begin(), idx.end(), start);
        const Matrix part = run_layers(model, x.select_rows(idx), first, last, nullptr);
        std::copy(part.values().begin(), part.values().end(), out.data() + start * width);
    }
    return out;
}

bool column_selected(TargetColumns columns, std::size_t c, std::size_t d) {
    switch (columns) {
        case TargetColumns::all: return true;
        case TargetColumns::all_but_last: return c + 1 < d;
        case TargetColumns::last_only: return c + 1 == d;
    }
    return true;
}

void check_target(const MlpModel& model, const Matrix& x, const RegressionTarget& target) {
    const std::size_t d = model.embedding_dim();
    if (target.rotation.rows() != d || target.rotation.cols() != d) {
        throw InvalidInput("regression target: rotation must be " + std::to_string(d) + "x" +
                           std::to_string(d));
    }
    if (target.targets.rows() != x.rows() || target.targets.cols() != d) {
        throw InvalidInput("regression target: targets must be " + std::to_string(x.rows()) + "x" +
                           std::to_string(d));
    }
}

// Residual f(X)V - Y with unselected columns zeroed, plus the normalised loss.
double masked_residual(const Matrix& fx, const RegressionTarget& target, Matrix& residual) {
    residual = matmul(fx, target.rotation) - target.targets;
    const std::size_t d = residual.cols();
    double loss = 0.0;
    for (std::size_t r = 0; r < residual.rows(); ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            double& e = residual(r, c);
            if (column_selected(target.columns, c, d)) {
                loss += e * e;
            } else {
                e = 0.0;
            }
        }
    }
    return loss / static_cast<double>(residual.rows() * d);
}

void require_finite(double loss, const std::string& where) {
    if (!std::isfinite(loss)) throw NumericalFailure("non-finite loss at " + where);
}

std::vector<bool> relu_pattern(const MlpModel& model, const Trace& trace) {
    std::vector<bool> pattern;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (model.layers[l].activation != Activation::relu || trace.pre[l].empty()) continue;
        for (double v : trace.pre[l].values()) pattern.push_back(v > 0.0);
    }
    return pattern;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    const unsigned char* take(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
        }
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint32_t u32() {
        const unsigned char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
        return v;
    }
    double f64() {
        const unsigned char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
        return std::bit_cast<double>(v);
    }
    std::uint8_t u8() { return *take(1); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

void validate(const MlpModel& model) {
    if (model.layers.empty()) throw InvalidConfig("model has no layers");
    if (model.encoder_end == 0 || model.encoder_end > model.layers.size()) {
        throw InvalidConfig("encoder_end " + std::to_string(model.encoder_end) + " out of range");
    }
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        if (layer.bias.size() != layer.out()) {
            throw InvalidConfig("layer " + std::to_string(l) + ": bias length mismatch");
        }
        if (l > 0 && model.layers[l - 1].out() != layer.in()) {
            throw InvalidConfig("layer " + std::to_string(l) + ": input width " +
                                std::to_string(layer.in()) + " does not chain with previous output " +
                                std::to_string(model.layers[l - 1].out()));
        }
    }
}

std::vector<std::size_t> mirrored_widths(std::size_t input, std::span<const std::size_t> hidden,
                                         std::size_t embedding) {
    std::vector<std::size_t> widths{input};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(embedding);
    widths.insert(widths.end(), hidden.rbegin(), hidden.rend());
    widths.push_back(input);
    return widths;
}

MlpModel init_model(std::span<const std::size_t> widths, std::uint64_t seed) {
    if (widths.size() < 3 || widths.size() % 2 == 0) {
        throw InvalidConfig("init_model: need an odd number (>= 3) of widths, got " +
                            std::to_string(widths.size()));
    }
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] == 0) throw InvalidConfig("init_model: zero width");
        if (widths[i] != widths[widths.size() - 1 - i]) {
            throw InvalidConfig("init_model: widths are not mirrored around the embedding layer");
        }
    }
    const std::size_t n_layers = widths.size() - 1;
    const std::size_t embed = n_layers / 2;  // index of the embedding layer
    std::mt19937_64 rng(seed);
    MlpModel model;
    model.encoder_end = embed;
    for (std::size_t l = 0; l < n_layers; ++l) {
        DenseLayer layer;
        layer.weights = Matrix(widths[l + 1], widths[l]);
        layer.bias.assign(widths[l + 1], 0.0);
        const double limit = std::sqrt(6.0 / static_cast<double>(widths[l]));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : layer.weights.values()) w = dist(rng);
        const bool linear = (l + 1 == embed) || (l + 1 == n_layers);
        layer.activation = linear ? Activation::linear : Activation::relu;
        model.layers.push_back(std::move(layer));
    }
    return model;
}

Matrix encode(const MlpModel& model, const Matrix& x) {
    return batched(model, x, 0, model.encoder_end);
}

Matrix decode(const MlpModel& model, const Matrix& h) {
    if (model.encoder_end == model.layers.size()) throw InvalidInput("decode: model has no decoder");
    return batched(model, h, model.encoder_end, model.layers.size());
}

Matrix reconstruct(const MlpModel& model, const Matrix& x) {
    return batched(model, x, 0, model.layers.size());
}

Gradients::Gradients(const MlpModel& model) {
    for (const auto& layer : model.layers) {
        weights.emplace_back(layer.out(), layer.in());
        bias.emplace_back(layer.out(), 0.0);
    }
}

void Gradients::zero() {
    for (auto& w : weights) std::fill(w.values().begin(), w.values().end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

double reconstruction_loss(const MlpModel& model, const Matrix& x) {
    const Matrix out = reconstruct(model, x);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double e = out.data()[i] - x.data()[i];
        s += e * e;
    }
    return s / static_cast<double>(x.size());
}

double reconstruction_loss_and_grad(const MlpModel& model, const Matrix& x, Gradients& grad) {
    Trace trace;
    Matrix diff = run_layers(model, x, 0, model.layers.size(), &trace) - x;
    double loss = 0.0;
    for (double v : diff.values()) loss += v * v;
    const double norm = static_cast<double>(x.size());
    loss /= norm;
    for (double& v : diff.values()) v *= 2.0 / norm;
    backward(model, trace, std::move(diff), 0, model.layers.size(), grad);
    return loss;
}

double regression_loss(const MlpModel& model, const Matrix& x, const RegressionTarget& target) {
    check_target(model, x, target);
    Matrix residual;
    return masked_residual(encode(model, x), target, residual);
}

double regression_loss_and_grad(const MlpModel& model, const Matrix& x,
                                const RegressionTarget& target, Gradients& grad) {
    check_target(model, x, target);
    Trace trace;
    const Matrix fx = run_layers(model, x, 0, model.encoder_end, &trace);
    Matrix residual;
    const double loss = masked_residual(fx, target, residual);
    const double scale = 2.0 / static_cast<double>(residual.size());
    for (double& v : residual.values()) v *= scale;
    Matrix d_fx = matmul_nt(residual, target.rotation);
    grad.zero();
    backward(model, trace, std::move(d_fx), 0, model.encoder_end, grad);
    return loss;
}

AdamState::AdamState(const MlpModel& model, AdamConfig config)
    : config_(config), m_(model), v_(model) {}

void AdamState::step(MlpModel& model, const Gradients& grad, bool encoder_only) {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    const std::size_t n_layers = encoder_only ? model.encoder_end : model.layers.size();
    auto update = [&](double* p, const double* g, double* m, double* v, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    };
    for (std::size_t l = 0; l < n_layers; ++l) {
        auto& layer = model.layers[l];
        update(layer.weights.data(), grad.weights[l].data(), m_.weights[l].data(),
               v_.weights[l].data(), layer.weights.size());
        update(layer.bias.data(), grad.bias[l].data(), m_.bias[l].data(), v_.bias[l].data(),
               layer.bias.size());
    }
}

TrainingLog pretrain(MlpModel& model, const Matrix& x, const PretrainConfig& config) {
    if (config.batch_size == 0) throw InvalidConfig("pretrain: batch_size must be >= 1");
    if (x.cols() != model.input_width()) {
        throw InvalidInput("pretrain: data width " + std::to_string(x.cols()) +
                           " does not match model input " + std::to_string(model.input_width()));
    }
    TrainingLog log;
    log.initial_loss = reconstruction_loss(model, x);
    require_finite(log.initial_loss, "initial evaluation");

    AdamState adam(model, config.adam);
    Gradients grad(model);
    std::vector<std::size_t> order(x.rows());
    std::vector<std::size_t> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(epoch)};
        std::mt19937_64 rng(seq);
        std::shuffle(order.begin(), order.end(), rng);

        double total = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.assign(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(stop));
            const double loss = reconstruction_loss_and_grad(model, x.select_rows(batch), grad);
            require_finite(loss, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(n_batches));
            adam.step(model, grad);
            total += loss;
            ++n_batches;
        }
        log.epoch_losses.push_back(n_batches ? total / static_cast<double>(n_batches) : 0.0);
    }
    return log;
}

double train_joint_step(MlpModel& model, AdamState& adam, const Matrix& x_chunk,
                        const RegressionTarget& target, const JointStepConfig& config) {
    check_target(model, x_chunk, target);
    if (config.batch_size == 0 || config.batches == 0) {
        throw InvalidConfig("train_joint_step: batch_size and batches must be >= 1");
    }
    std::vector<std::size_t> order(x_chunk.rows());
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(config.iteration), 0x6a6f696eu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    Gradients grad(model);
    double loss = 0.0;
    std::size_t cursor = 0;
    std::vector<std::size_t> batch;
    for (std::size_t b = 0; b < config.batches; ++b) {
        batch.clear();
        const std::size_t take = std::min(config.batch_size, order.size());
        for (std::size_t i = 0; i < take; ++i) {
            batch.push_back(order[cursor]);
            cursor = (cursor + 1) % order.size();
        }
        const Matrix xb = x_chunk.select_rows(batch);
        const Matrix yb = target.targets.select_rows(batch);
        const RegressionTarget sub{target.rotation, yb, target.columns};
        loss = regression_loss_and_grad(model, xb, sub, grad);
        require_finite(loss, "joint iteration " + std::to_string(config.iteration) + ", batch " +
                                 std::to_string(b));
        adam.step(model, grad, /*encoder_only=*/true);
    }
    return loss;
}

GradCheckReport grad_check(const MlpModel& model, LossKind kind, const Matrix& x,
                           const RegressionTarget* target, double h) {
    if (kind == LossKind::regression && target == nullptr) {
        throw InvalidInput("grad_check: regression loss needs a target");
    }
    const std::size_t last = kind == LossKind::reconstruction ? model.layers.size() : model.encoder_end;

    auto evaluate = [&](const MlpModel& m, std::vector<bool>* pattern) {
        Trace trace;
        const Matrix out = run_layers(m, x, 0, last, &trace);
        if (pattern) *pattern = relu_pattern(m, trace);
        if (kind == LossKind::reconstruction) {
            double s = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double e = out.data()[i] - x.data()[i];
                s += e * e;
            }
            return s / static_cast<double>(x.size());
        }
        Matrix residual;
        return masked_residual(out, *target, residual);
    };

    Gradients analytic(model);
    if (kind == LossKind::reconstruction) {
        reconstruction_loss_and_grad(model, x, analytic);
    } else {
        regression_loss_and_grad(model, x, *target, analytic);
    }

    std::vector<bool> base_pattern, pattern;
    evaluate(model, &base_pattern);

    GradCheckReport report;
    MlpModel probe = model;
    auto check = [&](double& param, double grad_value) {
        const double saved = param;
        param = saved + h;
        const double plus = evaluate(probe, &pattern);
        const bool kink_plus = pattern != base_pattern;
        param = saved - h;
        const double minus = evaluate(probe, &pattern);
        const bool kink_minus = pattern != base_pattern;
        param = saved;
        if (kink_plus || kink_minus) {
            ++report.masked;
            return;
        }
        const double numeric = (plus - minus) / (2.0 * h);
        // Components far below the loss scale are lost in central-difference roundoff,
        // so they are judged against the loss instead of themselves.
        const double floor = std::max(1e-7, 1e-5 * std::max(std::abs(plus), std::abs(minus)));
        const double denom = std::max({std::abs(grad_value), std::abs(numeric), floor});
        report.max_relative_error = std::max(report.max_relative_error, std::abs(grad_value - numeric) / denom);
        ++report.checked;
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& layer = probe.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            check(layer.weights.data()[i], analytic.weights[l].data()[i]);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) check(layer.bias[i], analytic.bias[l][i]);
    }
    return report;
}

std::vector<unsigned char> serialize(const MlpModel& model) {
    validate(model);
    std::vector<unsigned char> out{'D', 'S', 'C', 'M'};
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& layer : model.layers) {
        put_u32(out, static_cast<std::uint32_t>(layer.out()));
        put_u32(out, static_cast<std::uint32_t>(layer.in()));
        out.push_back(static_cast<unsigned char>(layer.activation));
        for (double w : layer.weights.values()) put_f64(out, w);
        for (double b : layer.bias) put_f64(out, b);
    }
    put_u32(out, static_cast<std::uint32_t>(model.encoder_end));
    return out;
}

MlpModel deserialize(std::span<const unsigned char> bytes) {
    Reader in(bytes);
    const unsigned char* magic = in.take(4);
    if (!std::equal(magic, magic + 4, "DSCM")) throw FormatError("checkpoint: bad magic");
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t n_layers = in.u32();
    MlpModel model;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const std::uint32_t out = in.u32();
        const std::uint32_t inw = in.u32();
        const std::uint8_t tag = in.u8();
        if (tag > 1) throw FormatError("checkpoint: unknown activation tag " + std::to_string(tag));
        DenseLayer layer;
        layer.activation = static_cast<Activation>(tag);
        layer.weights = Matrix(out, inw);
        for (double& w : layer.weights.values()) w = in.f64();
        layer.bias.resize(out);
        for (double& b : layer.bias) b = in.f64();
        model.layers.push_back(std::move(layer));
    }
    model.encoder_end = in.u32();
    if (!in.done()) throw FormatError("checkpoint: trailing bytes");
    try {
        validate(model);
    } catch (const InvalidConfig& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return model;
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("write failed: " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open checkpoint " + path.string());
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize(bytes);
}

}  // namespace dsc
