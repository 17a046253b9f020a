#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "flowcast/models/tree.hpp"
#include "flowcast/parallel.hpp"

namespace flowcast {

struct ForestConfig {
    std::size_t n_trees = 30;
    std::size_t max_depth = 10;
    std::size_t min_samples_leaf = 1;
    bool bootstrap = true;
    double features_per_split = 1.0 / 3.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_trees < 1) throw Error("forest n_trees must be at least 1");
        if (max_depth < 1) throw Error("forest max_depth must be at least 1");
        if (min_samples_leaf < 1) throw Error("forest min_samples_leaf must be at least 1");
        if (!(features_per_split > 0.0 && features_per_split <= 1.0)) throw Error("features_per_split must be in (0, 1]");
    }

    std::size_t features_per_node(std::size_t width) const {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(features_per_split * static_cast<double>(width) + 1e-9)));
    }
};

struct ForestModel {
    ForestConfig config;
    std::vector<RegressionTree> trees;

    std::size_t width() const { return trees.empty() ? 0 : trees.front().width(); }

    /// Arithmetic mean of the member trees, summed in tree order.
    double predict(std::span<const double> row) const {
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict(row);
        return sum / static_cast<double>(trees.size());
    }
};

/// Bagged CART ensemble. Tree i draws its bootstrap sample and per-split feature subsets from
/// substream (seed, i), so the result does not depend on `jobs`.
inline ForestModel train_rf(const TrainingView& train, const ForestConfig& config = {}, std::size_t jobs = 1) {
    config.validate();
    if (train.rows() == 0) throw Error("cannot train a random forest on an empty training set");
    const ColumnIndex index(train);
    const std::vector<double> ones(train.rows(), 1.0);

    GrowConfig grow;
    grow.max_depth = config.max_depth;
    grow.min_samples_leaf = static_cast<double>(config.min_samples_leaf);
    grow.features_per_node = config.features_per_node(train.cols);

    ForestModel model{config, std::vector<RegressionTree>(config.n_trees)};
    parallel_for(config.n_trees, jobs, [&](std::size_t t) {
        Rng rng = make_rng(config.seed, t);
        std::vector<std::uint32_t> weight;
        if (config.bootstrap) {
            weight.assign(train.rows(), 0);
            for (std::size_t k = 0; k < train.rows(); ++k) ++weight[uniform_index(rng, train.rows())];
        }
        model.trees[t] = grow_tree(train, index, train.y, ones, weight, grow, VarianceReduction{}, &rng).tree;
    });
    return model;
}

}  // namespace flowcast
