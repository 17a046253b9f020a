#pragma once

// Feedforward ReLU network trained by mini-batch SGD under a triangular cyclical learning rate.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/error.hpp"
#include "flowcast/rng.hpp"

namespace flowcast {

struct MlpConfig {
    std::vector<std::size_t> hidden = {256, 128, 64, 32};
    double lr_min = 0.00001;
    double lr_max = 0.001;
    double step_size = 1000000.0;  ///< optimizer steps per half cycle
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;

    void validate() const {
        for (auto h : hidden) {
            if (h == 0) throw Error("MLP layer sizes must be positive");
        }
        if (!(lr_min > 0.0 && lr_min < lr_max)) throw Error("MLP learning-rate bounds need 0 < lr_min < lr_max");
        if (!(step_size > 0.0)) throw Error("MLP step_size must be positive");
        if (batch_size == 0) throw Error("MLP batch_size must be positive");
    }
};

/// Triangular cyclical learning rate: lr_min at step 0, lr_max at step_size, lr_min at 2*step_size.
inline double cyclical_learning_rate(std::uint64_t step, double lr_min, double lr_max, double step_size) {
    const double s = static_cast<double>(step);
    const double cycle = std::floor(1.0 + s / (2.0 * step_size));
    const double x = std::abs(s / step_size - 2.0 * cycle + 1.0);
    return lr_min + (lr_max - lr_min) * std::max(0.0, 1.0 - x);
}

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;

    friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
        return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
               a.bias == b.bias;
    }
};

/// ReLU on every hidden layer, identity on the single output. Activations are column-major
/// (features x batch).
class Network {
public:
    Network() = default;

    /// He-normal initialization: weights ~ N(0, 2 / fan_in), biases 0.
    Network(std::size_t inputs, const std::vector<std::size_t>& hidden, Rng& rng) {
        std::size_t fan_in = inputs;
        auto sizes = hidden;
        sizes.push_back(1);
        for (auto out : sizes) {
            DenseLayer layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
            const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
                for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = sd * standard_normal(rng);
            }
            layers_.push_back(std::move(layer));
            fan_in = out;
        }
    }

    explicit Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::size_t inputs() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols()); }

    Eigen::RowVectorXd forward(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd a = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Eigen::MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
            a = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
        }
        return a.row(0);
    }

    /// Mean squared error over the batch.
    double loss(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y) const {
        return (forward(x) - y).squaredNorm() / static_cast<double>(y.size());
    }

    /// Returns the batch MSE and writes dLoss/dparameter into `grad` (shaped like the layers).
    double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y, std::vector<DenseLayer>& grad) const {
        const std::size_t L = layers_.size();
        std::vector<Eigen::MatrixXd> acts(L + 1), pre(L);
        acts[0] = x;
        for (std::size_t l = 0; l < L; ++l) {
            pre[l] = (layers_[l].weight * acts[l]).colwise() + layers_[l].bias;
            acts[l + 1] = l + 1 < L ? Eigen::MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
        }
        const double batch = static_cast<double>(y.size());
        const Eigen::RowVectorXd err = acts[L].row(0) - y;
        Eigen::MatrixXd delta = (2.0 / batch) * err;
        grad.resize(L);
        for (std::size_t l = L; l-- > 0;) {
            if (l + 1 < L) delta = delta.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
            grad[l].weight = delta * acts[l].transpose();
            grad[l].bias = delta.rowwise().sum();
            if (l > 0) delta = layers_[l].weight.transpose() * delta;
        }
        return err.squaredNorm() / batch;
    }

    friend bool operator==(const Network&, const Network&) = default;

private:
    std::vector<DenseLayer> layers_;
};

/// Per-column affine scaling fitted on training rows; constant columns keep scale 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(std::span<const double> x, std::size_t cols) {
        Standardizer s{std::vector<double>(cols, 0.0), std::vector<double>(cols, 1.0)};
        const std::size_t rows = cols == 0 ? 0 : x.size() / cols;
        if (rows == 0) return s;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) s.mean[c] += x[r * cols + c];
        }
        for (auto& m : s.mean) m /= static_cast<double>(rows);
        std::vector<double> var(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = x[r * cols + c] - s.mean[c];
                var[c] += d * d;
            }
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const double sd = std::sqrt(var[c] / static_cast<double>(rows));
            s.scale[c] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
        }
        return s;
    }

    double apply(std::size_t c, double v) const { return (v - mean[c]) / scale[c]; }
    double invert(std::size_t c, double v) const { return v * scale[c] + mean[c]; }

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct MlpModel {
    MlpConfig config;
    Network network;
    Standardizer inputs;
    Standardizer label;  ///< single column

    std::size_t width() const { return inputs.mean.size(); }

    /// Standardizes the rows, runs the network and maps the output back to bit/s.
    std::vector<double> predict_rows(std::span<const double> x, std::size_t cols) const {
        if (cols != width()) throw Error("row width does not match model width");
        const std::size_t rows = x.size() / cols;
        std::vector<double> out(rows);
        constexpr std::size_t chunk = 1024;
        for (std::size_t begin = 0; begin < rows; begin += chunk) {
            const std::size_t n = std::min(chunk, rows - begin);
            Eigen::MatrixXd batch(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < cols; ++c) {
                    batch(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = inputs.apply(c, x[(begin + i) * cols + c]);
                }
            }
            const auto yhat = network.forward(batch);
            for (std::size_t i = 0; i < n; ++i) out[begin + i] = label.invert(0, yhat(static_cast<Eigen::Index>(i)));
        }
        return out;
    }

    double predict(std::span<const double> row) const { return predict_rows(row, row.size()).front(); }
};

/// Network a model with this config starts from before any update.
inline Network initialize_network(std::size_t inputs, const MlpConfig& config) {
    Rng rng = make_rng(config.seed, 0);
    return Network(inputs, config.hidden, rng);
}

/// Mini-batch SGD on standardized inputs and labels. The learning rate follows the cyclical
/// schedule per optimizer step. `loss_trace` receives the mean batch loss of each epoch.
inline MlpModel train_mlp(const TrainingView& train, const MlpConfig& config = {},
                          std::vector<double>* loss_trace = nullptr) {
    config.validate();
    const std::size_t n = train.rows();
    if (n == 0) throw Error("cannot train an MLP on an empty training set");
    const std::size_t cols = train.cols;

    MlpModel model{config, initialize_network(cols, config), Standardizer::fit(train.x, cols),
                   Standardizer::fit(train.y, 1)};
    if (loss_trace) loss_trace->clear();

    Rng rng = make_rng(config.seed, 1);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::vector<DenseLayer> grad;
    std::uint64_t step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t b = std::min(config.batch_size, n - begin);
            Eigen::MatrixXd x(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(b));
            Eigen::RowVectorXd y(static_cast<Eigen::Index>(b));
            for (std::size_t k = 0; k < b; ++k) {
                const std::size_t r = order[begin + k];
                for (std::size_t c = 0; c < cols; ++c) {
                    x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = model.inputs.apply(c, train.at(r, c));
                }
                y(static_cast<Eigen::Index>(k)) = model.label.apply(0, train.y[r]);
            }
            const double loss = model.network.loss_and_gradient(x, y, grad);
            if (!std::isfinite(loss)) {
                throw Error("MLP training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step));
            }
            const double lr = cyclical_learning_rate(step, config.lr_min, config.lr_max, config.step_size);
            auto& layers = model.network.layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                layers[l].weight -= lr * grad[l].weight;
                layers[l].bias -= lr * grad[l].bias;
            }
            loss_sum += loss;
            ++batches;
            ++step;
        }
        if (loss_trace) loss_trace->push_back(loss_sum / static_cast<double>(batches));
    }
    return model;
}

}  // namespace flowcast
