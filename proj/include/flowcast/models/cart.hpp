#pragma once

#include <vector>

#include "flowcast/models/tree.hpp"

namespace flowcast {

struct CartConfig {
    std::size_t max_depth = 12;
    std::size_t min_samples_leaf = 1;
    double min_variance_reduction = 0.0;

    void validate() const {
        if (max_depth < 1) throw Error("CART max_depth must be at least 1");
        if (min_samples_leaf < 1) throw Error("CART min_samples_leaf must be at least 1");
    }
};

struct CartModel {
    CartConfig config;
    RegressionTree tree;

    double predict(std::span<const double> row) const { return tree.predict(row); }
    std::size_t width() const { return tree.width(); }
};

/// Greedy squared-error CART on the full training set. Leaves predict the mean label.
inline CartModel train_cart(const TrainingView& train, const CartConfig& config = {}) {
    config.validate();
    if (train.rows() == 0) throw Error("cannot train CART on an empty training set");
    const ColumnIndex index(train);
    const std::vector<double> ones(train.rows(), 1.0);
    GrowConfig grow;
    grow.max_depth = config.max_depth;
    grow.min_samples_leaf = static_cast<double>(config.min_samples_leaf);
    grow.min_gain = config.min_variance_reduction;
    auto grown = grow_tree(train, index, train.y, ones, {}, grow, VarianceReduction{});
    return {config, std::move(grown.tree)};
}

}  // namespace flowcast
