#pragma once

// Repeated train/test evaluation of forecasting models against the persistence baseline,
// across aggregation windows.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/flow_table.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/models/model.hpp"
#include "flowcast/parallel.hpp"

namespace flowcast {

/// Windows (seconds) of the reference experiment.
inline const std::vector<double>& default_windows() {
    static const std::vector<double> w = {0.03, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                                          0.7,  0.8,  0.9, 1.0, 2.0, 3.0, 4.0};
    return w;
}

using ModelConfig = std::variant<CartConfig, ForestConfig, GbtConfig, MlpConfig>;

struct ModelSpec {
    std::string name;
    ModelConfig config;
};

inline ModelSpec default_spec(ModelKind kind) {
    switch (kind) {
        case ModelKind::cart: return {"DT", CartConfig{}};
        case ModelKind::forest: return {"RF", ForestConfig{}};
        case ModelKind::gbt: return {"GBT", GbtConfig{}};
        case ModelKind::mlp: return {"MLP", MlpConfig{}};
    }
    throw Error("unknown model kind");
}

/// Trains `config` with its seed replaced by `seed`.
inline Model train_model(const TrainingView& train, ModelConfig config, std::uint64_t seed, std::size_t jobs = 1) {
    return std::visit([&](auto c) -> Model {
        using C = decltype(c);
        if constexpr (std::is_same_v<C, CartConfig>) {
            return train_cart(train, c);
        } else if constexpr (std::is_same_v<C, ForestConfig>) {
            c.seed = seed;
            return train_rf(train, c, jobs);
        } else if constexpr (std::is_same_v<C, GbtConfig>) {
            c.seed = seed;
            return train_gbt(train, c);
        } else {
            c.seed = seed;
            return train_mlp(train, c);
        }
    }, config);
}

struct ExperimentConfig {
    std::vector<double> windows = default_windows();
    std::vector<ModelSpec> models;
    std::size_t repetitions = 5;
    std::uint64_t seed = 1;
    FeatureMode mode = FeatureMode::full;
    std::size_t cap = kDefaultCardinalityCap;
    double train_fraction = 0.8;
    bool fit_schema_on_train = false;      ///< fit the one-hot vocabulary on training rows only
    std::optional<double> capture_duration;  ///< defaults to the last packet time
    std::size_t jobs = 1;

    void validate() const {
        if (windows.empty()) throw Error("no windows given");
        if (repetitions < 1) throw Error("repetitions must be at least 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("train fraction must be in (0, 1)");
        if (cap < 1) throw Error("cardinality cap must be at least 1");
        if (jobs < 1) throw Error("jobs must be at least 1");
    }
};

struct EvalCell {
    double window = 0.0;
    std::string model;
    std::size_t repetition = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    MetricPair metrics;
    double train_us_per_sample = 0.0;  ///< wall time, hardware dependent
    double predict_us_per_sample = 0.0;
};

struct BaselineCell {
    double window = 0.0;
    std::size_t repetition = 0;
    std::size_t test_rows = 0;
    MetricPair metrics;
};

struct EvalSummary {
    double window = 0.0;
    std::string model;
    MetricPair mean;       ///< mean over repetitions
    MetricPair base_mean;  ///< baseline mean over the same test partitions
    std::optional<double> relative_mae;
    std::optional<double> relative_rmse;
};

struct WindowInfo {
    double window = 0.0;
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
    std::size_t flows = 0;
    std::size_t encoded_width = 0;
};

struct EvalReport {
    std::vector<WindowInfo> windows;
    std::vector<EvalCell> cells;          ///< ordered by (window, model, repetition)
    std::vector<BaselineCell> baseline;   ///< ordered by (window, repetition)
    std::vector<EvalSummary> summaries;   ///< ordered by (window, model)

    const EvalSummary* find(double window, std::string_view model) const {
        for (const auto& s : summaries) {
            if (s.window == window && s.model == model) return &s;
        }
        return nullptr;
    }
};

namespace detail {

inline double elapsed_us(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - since).count();
}

inline std::string cell_context(double window, std::string_view model, std::size_t rep) {
    return "window " + text::format_double(window) + " s, model " + std::string(model) + ", repetition " +
           std::to_string(rep);
}

inline MetricPair mean_of(std::span<const MetricPair> v) {
    MetricPair m;
    for (const auto& p : v) {
        m.mae += p.mae;
        m.rmse += p.rmse;
    }
    m.mae /= static_cast<double>(v.size());
    m.rmse /= static_cast<double>(v.size());
    return m;
}

}  // namespace detail

/// Evaluates the models on one feature table: for each repetition r the rows are split with
/// seed + r and every model and the baseline are scored on the same test rows.
inline void evaluate_table(const FeatureTable& table, double window, const ExperimentConfig& config, EvalReport& report) {
    if (table.rows() < 2) throw Error("window " + text::format_double(window) + " s: fewer than 2 labeled records");
    const std::size_t reps = config.repetitions;
    const std::size_t n_models = config.models.size();

    std::vector<SplitIndices> splits;
    for (std::size_t r = 0; r < reps; ++r) splits.push_back(split_indices(table.rows(), config.train_fraction, config.seed + r));

    std::optional<EncodingSchema> shared;
    if (!config.fit_schema_on_train) shared = build_schema(table, config.cap);

    // Encodes one repetition's partitions; done per task so only in-flight splits are resident.
    auto encode_split = [&](std::size_t r) {
        const auto& s = splits[r];
        const EncodingSchema schema = shared ? *shared : build_schema(table, config.cap, s.train);
        return std::pair{encode(table, schema, s.train), encode(table, schema, s.test)};
    };

    std::vector<BaselineCell> base(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        const auto test = encode(table, shared ? *shared : build_schema(table, config.cap, splits[r].train), splits[r].test);
        const auto yhat = baseline_predict(test);
        base[r] = {window, r, test.rows(), score(test.labels, yhat)};
    }
    report.baseline.insert(report.baseline.end(), base.begin(), base.end());

    // Tasks are (repetition, model) pairs. With several jobs the tasks run concurrently and each
    // model trains single-threaded; seeds depend only on (seed, repetition, model index).
    std::vector<EvalCell> cells(reps * n_models);
    const std::size_t task_jobs = std::min(config.jobs, cells.size());
    const std::size_t inner_jobs = task_jobs > 1 ? 1 : config.jobs;
    parallel_for(cells.size(), task_jobs, [&](std::size_t task) {
        const std::size_t r = task / n_models;
        const std::size_t m = task % n_models;
        const auto& spec = config.models[m];
        try {
            const auto [train, test] = encode_split(r);
            const std::uint64_t model_seed = substream_seed(substream_seed(config.seed, r), m);
            auto t0 = std::chrono::steady_clock::now();
            const Model model = train_model(train.view(), spec.config, model_seed, inner_jobs);
            const double train_us = detail::elapsed_us(t0);
            t0 = std::chrono::steady_clock::now();
            const auto yhat = predict(model, test);
            const double predict_us = detail::elapsed_us(t0);
            EvalCell& c = cells[m * reps + r];
            c.window = window;
            c.model = spec.name;
            c.repetition = r;
            c.train_rows = train.rows();
            c.test_rows = test.rows();
            c.metrics = score(test.labels, yhat);
            c.train_us_per_sample = train_us / static_cast<double>(train.rows());
            c.predict_us_per_sample = predict_us / static_cast<double>(test.rows());
        } catch (const std::exception& e) {
            throw Error(detail::cell_context(window, spec.name, r) + ": " + e.what());
        }
    });

    std::vector<MetricPair> base_metrics;
    for (const auto& b : base) base_metrics.push_back(b.metrics);
    const MetricPair base_mean = detail::mean_of(base_metrics);
    for (std::size_t m = 0; m < n_models; ++m) {
        std::vector<MetricPair> per_rep;
        for (std::size_t r = 0; r < reps; ++r) per_rep.push_back(cells[m * reps + r].metrics);
        EvalSummary s;
        s.window = window;
        s.model = config.models[m].name;
        s.mean = detail::mean_of(per_rep);
        s.base_mean = base_mean;
        s.relative_mae = relative_error(s.mean.mae, base_mean.mae);
        s.relative_rmse = relative_error(s.mean.rmse, base_mean.rmse);
        report.summaries.push_back(s);
    }
    report.cells.insert(report.cells.end(), cells.begin(), cells.end());
}

/// Capture duration used for slotting: the configured value or the last packet time, never
/// shorter than the window.
inline double effective_duration(std::span<const PacketRecord> packets, std::optional<double> configured, double window) {
    double d = configured.value_or(0.0);
    if (!configured) {
        for (const auto& p : packets) d = std::max(d, p.time);
    }
    return std::max(d, window);
}

inline EvalReport run_experiment(std::span<const PacketRecord> packets, const ExperimentConfig& config) {
    config.validate();
    if (packets.empty()) throw Error("capture is empty");
    EvalReport report;
    for (const double w : config.windows) {
        FlowAggregation agg;
        try {
            agg = aggregate(packets, WindowConfig{w, effective_duration(packets, config.capture_duration, w)});
        } catch (const std::exception& e) {
            throw Error("window " + text::format_double(w) + " s: aggregation failed: " + e.what());
        }
        const FeatureTable table = make_feature_table(agg.labeled, config.mode);
        WindowInfo info{w, agg.labeled.size(), agg.unlabeled.size(), agg.flows, 0};
        if (table.rows() > 0) info.encoded_width = build_schema(table, config.cap).width();
        report.windows.push_back(info);
        evaluate_table(table, w, config, report);
    }
    return report;
}

struct AblationCell {
    std::string model;
    FeatureMode mode = FeatureMode::full;
    std::optional<double> relative_mae;
    std::optional<double> relative_rmse;
};

struct AblationReport {
    double window = 0.0;
    std::vector<AblationCell> cells;  ///< (RF, GBT) x (minimal, full)
    EvalReport minimal;
    EvalReport full;
};

/// Runs the experiment at one window in minimal and full feature mode. `models` defaults to
/// RF and GBT with their default configurations.
inline AblationReport ablation(std::span<const PacketRecord> packets, double window, ExperimentConfig config) {
    if (config.models.empty()) config.models = {default_spec(ModelKind::forest), default_spec(ModelKind::gbt)};
    config.windows = {window};
    AblationReport out;
    out.window = window;
    config.mode = FeatureMode::minimal;
    out.minimal = run_experiment(packets, config);
    config.mode = FeatureMode::full;
    out.full = run_experiment(packets, config);
    for (const auto& spec : config.models) {
        for (const auto* rep : {&out.minimal, &out.full}) {
            const auto* s = rep->find(window, spec.name);
            out.cells.push_back({spec.name, rep == &out.minimal ? FeatureMode::minimal : FeatureMode::full,
                                 s->relative_mae, s->relative_rmse});
        }
    }
    return out;
}

}  // namespace flowcast
