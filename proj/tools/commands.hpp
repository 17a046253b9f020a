#pragma once

// Subcommand implementations behind the flowcast command-line tool.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowcast/flowcast.hpp"

namespace flowcast::cli {

struct HyperParameters {
    CartConfig cart;
    ForestConfig forest;
    GbtConfig gbt;
    MlpConfig mlp;

    ModelSpec spec(ModelKind kind) const {
        switch (kind) {
            case ModelKind::cart: return {"DT", cart};
            case ModelKind::forest: return {"RF", forest};
            case ModelKind::gbt: return {"GBT", gbt};
            case ModelKind::mlp: return {"MLP", mlp};
        }
        throw Error("unknown model kind");
    }
};

struct RunOptions {
    std::string input;
    std::string output;
    std::string model_file;
    double window = 1.0;
    std::vector<double> windows = default_windows();
    std::vector<std::string> models = {"DT", "RF", "GBT", "MLP"};
    std::size_t repetitions = 5;
    std::uint64_t seed = 1;
    std::string mode = "full";
    std::size_t cap = kDefaultCardinalityCap;
    std::size_t jobs = 1;
    double train_fraction = 0.8;
    bool train_only_schema = false;
    std::optional<double> duration;
    HyperParameters hp;
    SynthConfig synth;
};

/// Effective configuration, one `key = value` per line, readable back through --config.
inline std::string echo(const std::string& command, const RunOptions& o) {
    std::ostringstream s;
    auto list = [](const auto& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ',';
            if constexpr (std::is_arithmetic_v<std::decay_t<decltype(v[i])>>) {
                out += text::format_double(static_cast<double>(v[i]));
            } else {
                out += v[i];
            }
        }
        return out;
    };
    s << "# flowcast " << command << " effective configuration\n";
    if (command == "synth") {
        const auto& c = o.synth;
        s << "output = " << o.output << "\nflows = " << c.n_flows << "\nduration = " << text::format_double(c.duration)
          << "\nmean-rate = " << text::format_double(c.mean_rate) << "\nrho = " << text::format_double(c.ar_coefficient)
          << "\non-off = " << text::format_double(c.on_off) << "\npacket-min = " << c.packet_min
          << "\npacket-max = " << c.packet_max << "\nbase-slot = " << text::format_double(c.base_slot)
          << "\nnoise = " << text::format_double(c.noise_fraction) << "\nrate-spread = " << text::format_double(c.rate_spread)
          << "\ntcp-fraction = " << text::format_double(c.tcp_fraction) << "\nseed = " << c.seed << '\n';
        return s.str();
    }
    s << "input = " << o.input << "\noutput = " << o.output << '\n';
    if (!o.model_file.empty()) s << "model-file = " << o.model_file << '\n';
    if (command == "sweep") {
        s << "windows = " << list(o.windows) << '\n';
    } else {
        s << "window = " << text::format_double(o.window) << '\n';
    }
    if (o.duration) s << "duration = " << text::format_double(*o.duration) << '\n';
    s << "mode = " << o.mode << "\ncap = " << o.cap << "\nseed = " << o.seed << '\n';
    if (command == "featurize") return s.str();
    s << "model = " << list(o.models) << "\nrepetitions = " << o.repetitions << "\njobs = " << o.jobs
      << "\ntrain-fraction = " << text::format_double(o.train_fraction)
      << "\ntrain-only-schema = " << (o.train_only_schema ? "true" : "false") << '\n';
    const auto& h = o.hp;
    s << "dt-max-depth = " << h.cart.max_depth << "\ndt-min-samples-leaf = " << h.cart.min_samples_leaf
      << "\nrf-trees = " << h.forest.n_trees << "\nrf-max-depth = " << h.forest.max_depth
      << "\nrf-features = " << text::format_double(h.forest.features_per_split)
      << "\nrf-min-samples-leaf = " << h.forest.min_samples_leaf << "\ngbt-rounds = " << h.gbt.n_rounds
      << "\ngbt-max-depth = " << h.gbt.max_depth << "\ngbt-learning-rate = " << text::format_double(h.gbt.learning_rate)
      << "\ngbt-alpha = " << text::format_double(h.gbt.alpha) << "\ngbt-lambda = " << text::format_double(h.gbt.lambda)
      << "\ngbt-colsample = " << text::format_double(h.gbt.colsample_bytree) << "\nmlp-hidden = " << list(h.mlp.hidden)
      << "\nmlp-epochs = " << h.mlp.epochs << "\nmlp-batch = " << h.mlp.batch_size
      << "\nmlp-lr-min = " << text::format_double(h.mlp.lr_min) << "\nmlp-lr-max = " << text::format_double(h.mlp.lr_max)
      << "\nmlp-step-size = " << text::format_double(h.mlp.step_size) << '\n';
    return s.str();
}

inline void require_input(const RunOptions& o) {
    if (o.input.empty()) throw Error("--input is required");
    if (!std::filesystem::is_regular_file(o.input)) throw Error("input '" + o.input + "' does not exist");
}

inline void require_output(const RunOptions& o) {
    if (o.output.empty()) throw Error("--output is required");
}

inline std::vector<ModelSpec> model_specs(const RunOptions& o) {
    std::vector<ModelSpec> specs;
    for (const auto& name : o.models) specs.push_back(o.hp.spec(parse_model_kind(name)));
    return specs;
}

inline ExperimentConfig experiment_config(const RunOptions& o) {
    ExperimentConfig c;
    c.windows = o.windows;
    c.models = model_specs(o);
    c.repetitions = o.repetitions;
    c.seed = o.seed;
    c.mode = parse_feature_mode(o.mode);
    c.cap = o.cap;
    c.train_fraction = o.train_fraction;
    c.fit_schema_on_train = o.train_only_schema;
    c.capture_duration = o.duration;
    c.jobs = o.jobs;
    return c;
}

inline bool is_feature_table(const std::string& path) {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    return header.find(kLabelName) != std::string::npos;
}

inline std::vector<std::string> spec_names(const std::vector<ModelSpec>& specs) {
    std::vector<std::string> names;
    for (const auto& s : specs) names.push_back(s.name);
    return names;
}

inline int cmd_synth(const RunOptions& o, std::ostream& log) {
    require_output(o);
    const auto capture = generate(o.synth);
    save_capture(o.output, capture.packets);
    log << echo("synth", o) << "packets: " << capture.packets.size() << "\nflows: " << capture.flows.size() << '\n';
    return 0;
}

inline int cmd_featurize(const RunOptions& o, std::ostream& log) {
    require_input(o);
    require_output(o);
    const auto capture = load_capture(o.input);
    const auto mode = parse_feature_mode(o.mode);
    log << echo("featurize", o);
    FlowAggregation agg;
    if (capture.packets.empty()) {
        log << "warning: capture is empty, writing an empty dataset\n";
    } else {
        agg = aggregate(capture.packets,
                        WindowConfig{o.window, effective_duration(capture.packets, o.duration, o.window)});
    }
    save_feature_table(o.output, make_feature_table(agg.labeled, mode));
    const auto out = std::filesystem::path(o.output);
    const auto unlabeled = out.parent_path() / (out.stem().string() + ".unlabeled" + out.extension().string());
    save_feature_table(unlabeled.string(), make_feature_table(agg.unlabeled, mode));
    log << "packets: " << capture.packets.size() << "\nskipped_ipv6: " << capture.skipped_ipv6
        << "\nflows: " << agg.flows << "\nlabeled_records: " << agg.labeled.size()
        << "\nunlabeled_records: " << agg.unlabeled.size() << "\nfeatures: " << feature_count(mode)
        << "\nunlabeled_output: " << unlabeled.string() << '\n';
    return 0;
}

inline int cmd_train(const RunOptions& o, std::ostream& log) {
    require_input(o);
    require_output(o);
    if (o.models.size() != 1) throw Error("train takes exactly one --model");
    const auto table = load_feature_table(o.input);
    const auto schema = build_schema(table, o.cap);
    const auto ds = encode(table, schema);
    const auto spec = o.hp.spec(parse_model_kind(o.models.front()));
    log << echo("train", o);
    const Model model = train_model(ds.view(), spec.config, o.seed, o.jobs);
    save_model(o.output, model);
    save_schema(o.output + ".schema", schema);
    log << "rows: " << ds.rows() << "\nencoded_width: " << ds.width << "\nmodel: " << spec.name << '\n';
    return 0;
}

/// Scores a saved model and the baseline on a featurized dataset.
inline int evaluate_model_file(const RunOptions& o, std::ostream& log) {
    const auto table = load_feature_table(o.input);
    if (table.rows() == 0) throw Error("dataset '" + o.input + "' has no rows");
    const auto schema = load_schema(o.model_file + ".schema");
    const auto ds = encode(table, schema);
    const auto model = load_model(o.model_file);
    const auto yhat = predict(model, ds);
    const std::string name(model_kind_name(kind_of(model)));

    EvalReport report;
    report.windows.push_back({o.window, ds.rows(), 0, 0, ds.width});
    report.baseline.push_back({o.window, 0, ds.rows(), score(ds.labels, baseline_predict(ds))});
    EvalCell cell;
    cell.window = o.window;
    cell.model = name;
    cell.test_rows = ds.rows();
    cell.metrics = score(ds.labels, yhat);
    report.cells.push_back(cell);
    EvalSummary s{o.window, name, cell.metrics, report.baseline.front().metrics, {}, {}};
    s.relative_mae = relative_error(s.mean.mae, s.base_mean.mae);
    s.relative_rmse = relative_error(s.mean.rmse, s.base_mean.rmse);
    report.summaries.push_back(s);
    write_report(o.output, report, {name}, echo("evaluate", o));
    log << echo("evaluate", o);
    write_summary_csv(log, report);
    return 0;
}

inline int cmd_evaluate(const RunOptions& o, std::ostream& log) {
    require_input(o);
    require_output(o);
    if (!o.model_file.empty()) return evaluate_model_file(o, log);
    auto config = experiment_config(o);
    config.windows = {o.window};
    EvalReport report;
    if (is_feature_table(o.input)) {
        config.validate();
        const auto table = load_feature_table(o.input);
        if (table.mode != config.mode) config.mode = table.mode;
        if (table.rows() > 0) report.windows.push_back({o.window, table.rows(), 0, 0, build_schema(table, o.cap).width()});
        evaluate_table(table, o.window, config, report);
    } else {
        report = run_experiment(load_capture(o.input).packets, config);
    }
    write_report(o.output, report, spec_names(config.models), echo("evaluate", o));
    log << echo("evaluate", o);
    write_summary_csv(log, report);
    return 0;
}

inline int cmd_sweep(const RunOptions& o, std::ostream& log) {
    require_input(o);
    require_output(o);
    const auto config = experiment_config(o);
    log << echo("sweep", o);
    const auto report = run_experiment(load_capture(o.input).packets, config);
    write_report(o.output, report, spec_names(config.models), echo("sweep", o));
    write_fig2_csv(log, report);
    return 0;
}

inline int cmd_ablation(const RunOptions& o, std::ostream& log) {
    require_input(o);
    require_output(o);
    auto config = experiment_config(o);
    log << echo("ablation", o);
    const auto report = ablation(load_capture(o.input).packets, o.window, config);
    std::filesystem::create_directories(o.output);
    const auto dir = std::filesystem::path(o.output);
    auto csv = detail::open_report(dir / "ablation.csv");
    write_ablation_csv(csv, report);
    auto table = detail::open_report(dir / "ablation.txt");
    table << echo("ablation", o) << '\n';
    write_ablation_table(table, report);
    write_ablation_table(log, report);
    return 0;
}

}  // namespace flowcast::cli
