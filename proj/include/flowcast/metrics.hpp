#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/error.hpp"

namespace flowcast {

namespace detail {
inline void check_lengths(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) {
        throw Error("metric inputs differ in length: " + std::to_string(y.size()) + " vs " + std::to_string(yhat.size()));
    }
    if (y.empty()) throw Error("metric inputs are empty");
}
}  // namespace detail

inline double mae(std::span<const double> y, std::span<const double> yhat) {
    detail::check_lengths(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
    detail::check_lengths(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

struct MetricPair {
    double mae = 0.0;
    double rmse = 0.0;

    friend bool operator==(const MetricPair&, const MetricPair&) = default;
};

inline MetricPair score(std::span<const double> y, std::span<const double> yhat) { return {mae(y, yhat), rmse(y, yhat)}; }

/// 1 - model/base; positive when the model beats the baseline. Not defined for base == 0.
inline std::optional<double> relative_error(double model_error, double base_error) {
    if (!(base_error > 0.0)) return std::nullopt;
    return 1.0 - model_error / base_error;
}

/// Persistence forecast: the next slot's bitrate is predicted to be the current one.
inline std::vector<double> baseline_predict(const EncodedDataset& ds) {
    if (ds.bitrate_column == kNoColumn) throw SchemaError("dataset has no current-bitrate column for the baseline");
    std::vector<double> out(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) out[i] = ds.row(i)[ds.bitrate_column];
    return out;
}

}  // namespace flowcast
