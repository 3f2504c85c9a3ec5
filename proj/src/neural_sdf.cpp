#include "sdfkit/neural_sdf.hpp"

#include "sdfkit/binary_io.hpp"
#include "sdfkit/rng.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace sdfkit {

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Every chunk is padded to this many columns so each point sees the same
// product kernels, whatever the batch size or its position in the batch.
constexpr std::size_t kEvalChunk = 64;

nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"final_lr_fraction", c.final_lr_fraction},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_epsilon", c.adam_epsilon},
            {"seed", c.seed},
            {"fourier_count", c.fourier_count},
            {"fourier_scale", c.fourier_scale},
            {"layer_count", c.layer_count},
            {"hidden_width", c.hidden_width}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs");
    c.batch_size = j.at("batch_size");
    c.learning_rate = j.at("learning_rate");
    c.final_lr_fraction = j.value("final_lr_fraction", 1.0);
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.adam_epsilon = j.at("adam_epsilon");
    c.seed = j.at("seed");
    c.fourier_count = j.at("fourier_count");
    c.fourier_scale = j.at("fourier_scale");
    c.layer_count = j.at("layer_count");
    c.hidden_width = j.at("hidden_width");
    return c;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw Error("epochs must be non-negative");
    if (batch_size <= 0) throw Error("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
    if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) throw Error("final_lr_fraction must lie in (0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw Error("adam_epsilon must be positive");
    if (fourier_count < 0) throw Error("fourier_count must be non-negative");
    if (!(fourier_scale >= 0.0)) throw Error("fourier_scale must be non-negative");
    if (layer_count < 1) throw Error("layer_count must be at least 1");
    if (hidden_width <= 0) throw Error("hidden_width must be positive");
}

NeuralSdfModel::NeuralSdfModel(Eigen::MatrixXf fourier, std::vector<DenseLayer> layers, NormalizationTransform norm,
                               TrainConfig config)
    : fourier_(std::move(fourier)), layers_(std::move(layers)), norm_(norm), config_(config) {
    if (fourier_.size() > 0 && fourier_.cols() != 3) throw Error("Fourier matrix must have 3 columns");
    if (fourier_.size() == 0) fourier_.resize(0, 3);
    if (layers_.empty()) throw Error("model needs at least one layer");
    Eigen::Index width = input_width();
    for (const auto& l : layers_) {
        if (l.weights.cols() != width || l.bias.size() != l.weights.rows() || l.weights.rows() == 0)
            throw Error("inconsistent layer shapes");
        width = l.weights.rows();
    }
    if (width != 1) throw Error("output layer must have width 1");
    refresh();
}

void NeuralSdfModel::refresh() {
    auto fill = [this](auto& mirror) {
        using S = typename std::decay_t<decltype(mirror)>::Scalar;
        mirror.fourier = (S(kTwoPi) * fourier_.cast<S>()).eval();
        mirror.weights.clear();
        mirror.bias.clear();
        for (const auto& l : layers_) {
            mirror.weights.push_back(l.weights.cast<S>());
            mirror.bias.push_back(l.bias.cast<S>());
        }
    };
    fill(f64_);
    fill(f32_);
}

std::size_t NeuralSdfModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += std::size_t(l.weights.size() + l.bias.size());
    return n;
}

template <typename S>
void NeuralSdfModel::evaluate(const Mirror<S>& net, std::span<const Vec3> points, std::span<double> values,
                              std::span<Vec3> gradients) {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    const bool want_grad = !gradients.empty();
    const Eigen::Index m = net.fourier.rows();
    const std::size_t nl = net.weights.size();
    std::vector<Mat> pre(nl);
    Mat x, phase, c, s, g, act, grad_p;

    for (std::size_t begin = 0; begin < points.size(); begin += kEvalChunk) {
        const auto b = Eigen::Index(std::min(kEvalChunk, points.size() - begin));
        Mat p = Mat::Zero(3, Eigen::Index(kEvalChunk));
        for (Eigen::Index i = 0; i < b; ++i) p.col(i) = points[begin + std::size_t(i)].cast<S>();
        if (m > 0) {
            phase.noalias() = net.fourier * p;
            c = phase.array().cos();
            s = phase.array().sin();
            x.resize(2 * m, Eigen::Index(kEvalChunk));
            x.topRows(m) = c;
            x.bottomRows(m) = s;
        } else {
            x = p;
        }
        const Mat* in = &x;
        for (std::size_t l = 0; l < nl; ++l) {
            pre[l].noalias() = net.weights[l] * *in;
            pre[l].colwise() += net.bias[l];
            if (l + 1 < nl) {
                act = pre[l].cwiseMax(S(0));
                in = &act;
            }
        }
        for (Eigen::Index i = 0; i < b; ++i) values[begin + std::size_t(i)] = double(pre[nl - 1](0, i));
        if (!want_grad) continue;

        g = net.weights[nl - 1].transpose() * Eigen::Matrix<S, 1, Eigen::Dynamic>::Ones(Eigen::Index(kEvalChunk));
        for (std::size_t l = nl - 1; l-- > 0;) {
            g = (pre[l].array() > S(0)).select(g, S(0));
            g = net.weights[l].transpose() * g;
        }
        if (m > 0) {
            const Mat dphase = c.cwiseProduct(g.bottomRows(m)) - s.cwiseProduct(g.topRows(m));
            grad_p.noalias() = net.fourier.transpose() * dphase;
        } else {
            grad_p = g;
        }
        for (Eigen::Index i = 0; i < b; ++i) gradients[begin + std::size_t(i)] = grad_p.col(i).template cast<double>();
    }
}

void NeuralSdfModel::evaluate(std::span<const Vec3> points, std::span<double> values, std::span<Vec3> gradients) const {
    evaluate(f64_, points, values, gradients);
}

void NeuralSdfModel::evaluate_f32(std::span<const Vec3> points, std::span<double> values,
                                  std::span<Vec3> gradients) const {
    if (values.size() != points.size() || (!gradients.empty() && gradients.size() != points.size()))
        throw Error("evaluate_f32: output spans must match the input size");
    evaluate(f32_, points, values, gradients);
}

double NeuralSdfModel::forward(const Vec3& p) const {
    double v = 0.0;
    evaluate({&p, 1}, {&v, 1}, {});
    return v;
}

std::vector<double> NeuralSdfModel::forward(std::span<const Vec3> points) const {
    std::vector<double> out(points.size());
    evaluate(points, out, {});
    return out;
}

std::vector<Vec3> NeuralSdfModel::input_gradient(std::span<const Vec3> points) const {
    std::vector<double> values(points.size());
    std::vector<Vec3> out(points.size());
    evaluate(points, values, out);
    return out;
}

void NeuralSdfModel::forward_and_gradient(std::span<const Vec3> points, std::span<double> values,
                                          std::span<Vec3> gradients) const {
    if (values.size() != points.size() || gradients.size() != points.size())
        throw Error("forward_and_gradient: output spans must match the input size");
    evaluate(points, values, gradients);
}

std::vector<std::uint8_t> NeuralSdfModel::activation_pattern(const Vec3& p) const {
    std::vector<std::uint8_t> out;
    Eigen::VectorXd x;
    if (fourier_count() > 0) {
        const Eigen::VectorXd phase = f64_.fourier * p;
        x.resize(2 * phase.size());
        x << phase.array().cos(), phase.array().sin();
    } else {
        x = p;
    }
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        Eigen::VectorXd pre = f64_.weights[l] * x + f64_.bias[l];
        for (Eigen::Index i = 0; i < pre.size(); ++i) out.push_back(pre[i] > 0.0);
        x = pre.cwiseMax(0.0);
    }
    return out;
}

Eigen::VectorXd fourier_features(const Vec3& p, const Eigen::MatrixXf& fourier) {
    const Eigen::VectorXd phase = kTwoPi * (fourier.cast<double>() * p);
    Eigen::VectorXd out(2 * phase.size());
    out << phase.array().cos(), phase.array().sin();
    return out;
}

NeuralSdfModel init_model(const TrainConfig& cfg) {
    cfg.validate();
    Rng rng = make_rng(cfg.seed, 10);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::MatrixXf fourier(cfg.fourier_count, 3);
    for (Eigen::Index i = 0; i < fourier.rows(); ++i)
        for (Eigen::Index j = 0; j < 3; ++j) fourier(i, j) = float(cfg.fourier_scale * gauss(rng));

    std::vector<DenseLayer> layers;
    int in = cfg.fourier_count > 0 ? 2 * cfg.fourier_count : 3;
    for (int l = 0; l < cfg.layer_count; ++l) {
        const int out = l + 1 == cfg.layer_count ? 1 : cfg.hidden_width;
        DenseLayer layer{Eigen::MatrixXf(out, in), Eigen::VectorXf::Zero(out)};
        const double std_dev = std::sqrt(2.0 / in);
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = float(std_dev * gauss(rng));
        layers.push_back(std::move(layer));
        in = out;
    }
    return NeuralSdfModel(std::move(fourier), std::move(layers), {}, cfg);
}

namespace {

// Float32 batch forward/backward used by the optimizer.
class Trainer {
public:
    explicit Trainer(const NeuralSdfModel& model) : model_(model) {
        two_pi_b_ = float(kTwoPi) * model.fourier();
        const auto& layers = model.layers();
        pre_.resize(layers.size());
        act_.resize(layers.size());
        for (const auto& l : layers) {
            m_w_.push_back(Eigen::MatrixXf::Zero(l.weights.rows(), l.weights.cols()));
            v_w_.push_back(Eigen::MatrixXf::Zero(l.weights.rows(), l.weights.cols()));
            m_b_.push_back(Eigen::VectorXf::Zero(l.bias.size()));
            v_b_.push_back(Eigen::VectorXf::Zero(l.bias.size()));
        }
        grad_w_.resize(layers.size());
        grad_b_.resize(layers.size());
    }

    // Writes predictions for the columns of p into out (1 x b).
    void forward(NeuralSdfModel& model, const Eigen::MatrixXf& p) {
        const Eigen::Index m = model.fourier_count();
        const Eigen::Index b = p.cols();
        if (m > 0) {
            phase_.noalias() = two_pi_b_ * p;
            act_[0].resize(2 * m, b);
            act_[0].topRows(m) = phase_.array().cos();
            act_[0].bottomRows(m) = phase_.array().sin();
        } else {
            act_[0] = p;
        }
        const auto& layers = model.layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            pre_[l].noalias() = layers[l].weights * act_[l];
            pre_[l].colwise() += layers[l].bias;
            if (l + 1 < layers.size()) act_[l + 1] = pre_[l].cwiseMax(0.0f);
        }
    }

    const Eigen::MatrixXf& output() const { return pre_.back(); }

    // Backpropagates the L1 loss of the last forward() and takes one Adam step.
    void step(NeuralSdfModel& model, const Eigen::RowVectorXf& target, const TrainConfig& cfg, double lr_now) {
        auto& layers = model.mutable_layers();
        const Eigen::Index b = target.size();
        grad_ = (pre_.back() - target).array().sign() / float(b);
        for (std::size_t l = layers.size(); l-- > 0;) {
            grad_w_[l].noalias() = grad_ * act_[l].transpose();
            grad_b_[l] = grad_.rowwise().sum();
            if (l > 0) {
                back_.noalias() = layers[l].weights.transpose() * grad_;
                grad_ = (pre_[l - 1].array() > 0.0f).select(back_, 0.0f);
            }
        }
        ++t_;
        const float b1 = float(cfg.beta1), b2 = float(cfg.beta2), eps = float(cfg.adam_epsilon);
        const float corr1 = 1.0f - float(std::pow(cfg.beta1, double(t_)));
        const float corr2 = 1.0f - float(std::pow(cfg.beta2, double(t_)));
        const float lr = float(lr_now);
        auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
            m = b1 * m + (1.0f - b1) * g;
            v.array() = b2 * v.array() + (1.0f - b2) * g.array().square();
            param.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
        };
        for (std::size_t l = 0; l < layers.size(); ++l) {
            adam(layers[l].weights, m_w_[l], v_w_[l], grad_w_[l]);
            adam(layers[l].bias, m_b_[l], v_b_[l], grad_b_[l]);
        }
    }

private:
    const NeuralSdfModel& model_;
    Eigen::MatrixXf two_pi_b_, phase_, grad_, back_;
    std::vector<Eigen::MatrixXf> pre_, act_;
    std::vector<Eigen::MatrixXf> m_w_, v_w_, grad_w_;
    std::vector<Eigen::VectorXf> m_b_, v_b_, grad_b_;
    long t_ = 0;
};

void gather(const std::vector<SdfSample>& data, std::span<const std::uint32_t> idx, Eigen::MatrixXf& p,
            Eigen::RowVectorXf& d) {
    const auto b = Eigen::Index(idx.size());
    p.resize(3, b);
    d.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& s = data[idx[std::size_t(i)]];
        p.col(i) = s.p.cast<float>();
        d(i) = float(s.d);
    }
}

double float_mae(Trainer& trainer, NeuralSdfModel& model, const std::vector<SdfSample>& samples) {
    if (samples.empty()) return 0.0;
    std::vector<std::uint32_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0u);
    Eigen::MatrixXf p;
    Eigen::RowVectorXf d;
    double total = 0.0;
    for (std::size_t begin = 0; begin < idx.size(); begin += 8192) {
        const auto n = std::min<std::size_t>(8192, idx.size() - begin);
        gather(samples, std::span(idx).subspan(begin, n), p, d);
        trainer.forward(model, p);
        total += double((trainer.output() - d).cwiseAbs().sum());
    }
    return total / double(samples.size());
}

}  // namespace

TrainHistory train(NeuralSdfModel& model, const SdfDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.train.empty()) throw Error("cannot train on an empty dataset");
    const auto start = std::chrono::steady_clock::now();
    TrainHistory hist;
    Trainer trainer(model);
    hist.initial_validation_loss = float_mae(trainer, model, data.validation);

    std::vector<std::uint32_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0u);
    Eigen::MatrixXf p;
    Eigen::RowVectorXf d;
    const std::size_t batches_per_epoch = (order.size() + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size);
    const double total_steps = double(batches_per_epoch) * cfg.epochs;
    std::size_t step_count = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = make_rng(cfg.seed, 1000 + std::uint64_t(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(cfg.batch_size)) {
            const auto n = std::min<std::size_t>(std::size_t(cfg.batch_size), order.size() - begin);
            gather(data.train, std::span(order).subspan(begin, n), p, d);
            trainer.forward(model, p);
            const double batch_loss = double((trainer.output() - d).cwiseAbs().sum());
            if (!std::isfinite(batch_loss)) {
                std::ostringstream msg;
                msg << "training diverged (non-finite loss) at epoch " << epoch << " with learning rate "
                    << cfg.learning_rate;
                throw Error(msg.str());
            }
            loss_sum += batch_loss;
            const double lr = cfg.learning_rate * std::pow(cfg.final_lr_fraction, double(step_count++) / total_steps);
            trainer.step(model, d, cfg, lr);
        }
        hist.train_loss.push_back(loss_sum / double(order.size()));
        hist.validation_loss.push_back(float_mae(trainer, model, data.validation));
        if (!std::isfinite(hist.validation_loss.back())) {
            std::ostringstream msg;
            msg << "training diverged (non-finite validation loss) at epoch " << epoch << " with learning rate "
                << cfg.learning_rate;
            throw Error(msg.str());
        }
        if (on_epoch) on_epoch(epoch, hist.train_loss.back(), hist.validation_loss.back());
    }
    model.refresh();
    hist.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return hist;
}

double mean_abs_error(const NeuralSdfModel& model, std::span<const SdfSample> samples) {
    if (samples.empty()) return 0.0;
    std::vector<Vec3> pts;
    pts.reserve(samples.size());
    for (const auto& s : samples) pts.push_back(s.p);
    const auto pred = model.forward(pts);
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) total += std::abs(pred[i] - samples[i].d);
    return total / double(samples.size());
}

void save_model(const NeuralSdfModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    nlohmann::json widths = nlohmann::json::array();
    widths.push_back(model.input_width());
    for (const auto& l : model.layers()) widths.push_back(l.weights.rows());
    const auto& n = model.norm();
    const nlohmann::json header = {
        {"widths", widths},
        {"fourier_count", model.fourier_count()},
        {"fourier_scale", model.config().fourier_scale},
        {"seed", model.config().seed},
        {"activation", "relu"},
        {"normalization", {{"scale", n.scale}, {"offset", {n.offset.x(), n.offset.y(), n.offset.z()}}}},
        {"train_config", config_to_json(model.config())},
    };
    io::write_magic(out, "NSDF");
    io::write_pod(out, kModelVersion);
    io::write_string(out, header.dump());
    auto write_rowmajor = [&](const auto& mat) {
        const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = mat;
        out.write(reinterpret_cast<const char*>(rm.data()), std::streamsize(rm.size() * sizeof(float)));
    };
    write_rowmajor(model.fourier());
    for (const auto& l : model.layers()) {
        write_rowmajor(l.weights);
        out.write(reinterpret_cast<const char*>(l.bias.data()), std::streamsize(l.bias.size() * sizeof(float)));
    }
    if (!out) throw Error("write failed for " + path.string());
}

NeuralSdfModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model " + path.string());
    io::expect_magic(in, "NSDF");
    if (const auto v = io::read_pod<std::uint32_t>(in, "version"); v != kModelVersion)
        throw FormatError("unsupported model version " + std::to_string(v));

    std::vector<Eigen::Index> widths;
    Eigen::Index m = 0;
    NormalizationTransform norm;
    TrainConfig cfg;
    try {
        const auto header = nlohmann::json::parse(io::read_string(in, "model header"));
        for (const auto& w : header.at("widths")) widths.push_back(w.get<Eigen::Index>());
        m = header.at("fourier_count");
        norm.scale = header.at("normalization").at("scale");
        for (int k = 0; k < 3; ++k) norm.offset[k] = header.at("normalization").at("offset").at(k);
        cfg = config_from_json(header.at("train_config"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad model header: ") + e.what());
    }
    if (widths.size() < 2 || m < 0 || widths[0] != (m > 0 ? 2 * m : 3) || widths.back() != 1)
        throw FormatError("inconsistent model widths");
    for (auto w : widths)
        if (w <= 0 || w > (1 << 16)) throw FormatError("implausible layer width");

    auto read_rowmajor = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
        if (rm.size() && !in.read(reinterpret_cast<char*>(rm.data()), std::streamsize(rm.size() * sizeof(float))))
            throw FormatError("model tensors truncated");
        return Eigen::MatrixXf(rm);
    };
    Eigen::MatrixXf fourier = read_rowmajor(m, 3);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        DenseLayer layer;
        layer.weights = read_rowmajor(widths[l], widths[l - 1]);
        layer.bias = read_rowmajor(widths[l], 1);
        layers.push_back(std::move(layer));
    }
    return NeuralSdfModel(std::move(fourier), std::move(layers), norm, cfg);
}

}  // namespace sdfkit
