#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "flowcast/models/tree.hpp"

namespace flowcast {

struct GbtConfig {
    std::size_t n_rounds = 100;
    std::size_t max_depth = 20;
    double learning_rate = 0.01;
    double alpha = 1.0;   ///< L1 penalty on leaf weights
    double lambda = 1.0;  ///< L2 penalty on leaf weights
    double colsample_bytree = 0.9;
    std::size_t min_samples_leaf = 1;
    std::optional<double> base_score;  ///< defaults to the mean training label
    std::uint64_t seed = 0;

    void validate() const {
        if (max_depth < 1) throw Error("GBT max_depth must be at least 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw Error("GBT learning_rate must be in (0, 1]");
        if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0)) throw Error("GBT colsample_bytree must be in (0, 1]");
        if (alpha < 0.0 || lambda < 0.0) throw Error("GBT alpha and lambda must be non-negative");
        if (min_samples_leaf < 1) throw Error("GBT min_samples_leaf must be at least 1");
    }
};

struct GbtModel {
    GbtConfig config;
    double base_score = 0.0;
    std::vector<RegressionTree> trees;
    std::size_t input_width = 0;

    std::size_t width() const { return input_width; }

    /// base_score + learning_rate * sum of tree outputs, accumulated round by round as in training.
    double predict(std::span<const double> row) const {
        if (row.size() != input_width) throw Error("row width does not match model width");
        double f = base_score;
        for (const auto& t : trees) f += config.learning_rate * t.predict(row);
        return f;
    }
};

/// Stagewise boosting of regression trees on squared error (gradient F - y, hessian 1) with
/// regularized leaf weights. Each round samples ceil(colsample_bytree * width) columns.
/// When `mse_trace` is given it receives the training MSE after 0..n_rounds rounds.
inline GbtModel train_gbt(const TrainingView& train, const GbtConfig& config = {},
                          std::vector<double>* mse_trace = nullptr) {
    config.validate();
    const std::size_t n = train.rows();
    if (n == 0) throw Error("cannot train gradient boosting on an empty training set");

    GbtModel model;
    model.config = config;
    model.input_width = train.cols;
    model.base_score = config.base_score.value_or(
        std::accumulate(train.y.begin(), train.y.end(), 0.0) / static_cast<double>(n));
    model.config.base_score = model.base_score;

    std::vector<double> f(n, model.base_score), grad(n);
    const std::vector<double> hess(n, 1.0);
    auto mse = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (f[i] - train.y[i]) * (f[i] - train.y[i]);
        return s / static_cast<double>(n);
    };
    if (mse_trace) {
        mse_trace->clear();
        mse_trace->push_back(mse());
    }
    if (config.n_rounds == 0) return model;

    const ColumnIndex index(train);
    const RegularizedGain criterion{config.alpha, config.lambda};
    const auto n_cols = std::min<std::size_t>(
        train.cols, static_cast<std::size_t>(std::ceil(config.colsample_bytree * static_cast<double>(train.cols) - 1e-9)));

    GrowConfig grow;
    grow.max_depth = config.max_depth;
    grow.min_samples_leaf = static_cast<double>(config.min_samples_leaf);

    std::vector<std::uint32_t> all(train.cols);
    std::iota(all.begin(), all.end(), 0u);
    for (std::size_t round = 0; round < config.n_rounds; ++round) {
        Rng rng = make_rng(config.seed, round);
        grow.columns = all;
        if (n_cols < train.cols) {
            for (std::size_t k = 0; k < n_cols; ++k) std::swap(grow.columns[k], grow.columns[k + uniform_index(rng, train.cols - k)]);
            grow.columns.resize(n_cols);
            std::sort(grow.columns.begin(), grow.columns.end());
        }
        for (std::size_t i = 0; i < n; ++i) grad[i] = f[i] - train.y[i];
        auto grown = grow_tree(train, index, grad, hess, {}, grow, criterion, &rng);
        const auto& nodes = grown.tree.nodes();
        for (std::size_t i = 0; i < n; ++i) {
            f[i] += config.learning_rate * nodes[static_cast<std::size_t>(grown.row_leaf[i])].value;
        }
        model.trees.push_back(std::move(grown.tree));
        if (mse_trace) mse_trace->push_back(mse());
    }
    return model;
}

}  // namespace flowcast
