#pragma once

#include "sdfkit/mesh.hpp"
#include "sdfkit/sampling.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace sdfkit {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 512;
    double learning_rate = 1e-3;
    // Learning rate decays exponentially per step to learning_rate * final_lr_fraction.
    double final_lr_fraction = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 1;
    int fourier_count = 128;     // m; 0 feeds raw coordinates to the first layer
    double fourier_scale = 0.6;  // standard deviation of the frequency matrix
    int layer_count = 4;         // fully connected layers, output layer included
    int hidden_width = 256;

    void validate() const;
};

struct DenseLayer {
    Eigen::MatrixXf weights;  // out x in
    Eigen::VectorXf bias;     // out
};

// Fourier-feature MLP: p -> [cos(2 pi B p), sin(2 pi B p)] -> (Linear, ReLU)* -> Linear.
// Parameters are float32 (the serialized precision); forward() and input_gradient()
// run in double on a mirrored copy so finite differences are meaningful.
class NeuralSdfModel {
public:
    NeuralSdfModel() = default;
    NeuralSdfModel(Eigen::MatrixXf fourier, std::vector<DenseLayer> layers, NormalizationTransform norm = {},
                   TrainConfig config = {});

    const Eigen::MatrixXf& fourier() const { return fourier_; }  // m x 3
    const std::vector<DenseLayer>& layers() const { return layers_; }
    const NormalizationTransform& norm() const { return norm_; }
    const TrainConfig& config() const { return config_; }
    void set_norm(const NormalizationTransform& n) { norm_ = n; }

    int fourier_count() const { return int(fourier_.rows()); }
    int input_width() const { return fourier_count() > 0 ? 2 * fourier_count() : 3; }
    std::size_t parameter_count() const;

    double forward(const Vec3& p) const;
    std::vector<double> forward(std::span<const Vec3> points) const;
    // d forward / d p, exact reverse mode (ReLU derivative at 0 taken as 0).
    std::vector<Vec3> input_gradient(std::span<const Vec3> points) const;
    void forward_and_gradient(std::span<const Vec3> points, std::span<double> values, std::span<Vec3> gradients) const;
    // Hidden-unit on/off states at p, all hidden layers concatenated. The model is
    // smooth on any segment along which this pattern does not change.
    std::vector<std::uint8_t> activation_pattern(const Vec3& p) const;

    // Mutable access for the optimizer; call refresh() after changing parameters.
    Eigen::MatrixXf& mutable_fourier() { return fourier_; }
    std::vector<DenseLayer>& mutable_layers() { return layers_; }
    void refresh();

    // Single-precision evaluation for throughput-bound callers (simulation,
    // benchmarks). Values agree with the double path to float rounding.
    // `gradients` may be empty.
    void evaluate_f32(std::span<const Vec3> points, std::span<double> values, std::span<Vec3> gradients) const;

private:
    template <typename S>
    struct Mirror {
        using Scalar = S;
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> fourier;  // 2 pi B
        std::vector<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> weights;
        std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>> bias;
    };
    template <typename S>
    static void evaluate(const Mirror<S>& net, std::span<const Vec3> points, std::span<double> values,
                         std::span<Vec3> gradients);
    void evaluate(std::span<const Vec3> points, std::span<double> values, std::span<Vec3> gradients) const;

    Eigen::MatrixXf fourier_;
    std::vector<DenseLayer> layers_;
    NormalizationTransform norm_;
    TrainConfig config_;

    Mirror<double> f64_;
    Mirror<float> f32_;
};

// gamma(p) = [cos(2 pi B p), sin(2 pi B p)], length 2m.
Eigen::VectorXd fourier_features(const Vec3& p, const Eigen::MatrixXf& fourier);

NeuralSdfModel init_model(const TrainConfig& cfg);

struct TrainHistory {
    double initial_validation_loss = 0.0;
    std::vector<double> train_loss;       // mean |f - d| over each epoch's batches
    std::vector<double> validation_loss;  // mean |f - d| on the held-out split after each epoch
    double seconds = 0.0;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double validation_loss)>;

// Adam on the mean absolute error. Deterministic for a fixed cfg.seed.
TrainHistory train(NeuralSdfModel& model, const SdfDataset& data, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

// Mean |f(p) - d| over samples.
double mean_abs_error(const NeuralSdfModel& model, std::span<const SdfSample> samples);

// "NSDF", u32 version, u32 length + JSON header, then f32 little-endian tensors
// (B, then weights and bias per layer), row-major.
void save_model(const NeuralSdfModel& model, const std::filesystem::path& path);
NeuralSdfModel load_model(const std::filesystem::path& path);

}  // namespace sdfkit
