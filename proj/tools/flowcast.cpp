// flowcast: synth | featurize | train | evaluate | sweep | ablation

#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "commands.hpp"

namespace {

using flowcast::cli::RunOptions;

void add_common(CLI::App& sub, RunOptions& o) {
    sub.add_option("--input,-i", o.input, "Input file");
    sub.add_option("--output,-o", o.output, "Output file or directory");
    sub.add_option("--seed", o.seed, "Random seed");
    sub.add_option("--config", "Key-value config file; command-line flags take precedence");
}

void add_dataset(CLI::App& sub, RunOptions& o) {
    sub.add_option("--window,-w", o.window, "Aggregation window in seconds")->check(CLI::PositiveNumber);
    sub.add_option("--duration", o.duration, "Capture duration in seconds (default: last packet time)");
    sub.add_option("--mode", o.mode, "Feature mode")->check(CLI::IsMember({"full", "minimal"}));
    sub.add_option("--cap", o.cap, "One-hot cardinality cap per categorical column")->check(CLI::PositiveNumber);
}

void add_models(CLI::App& sub, RunOptions& o) {
    auto& h = o.hp;
    sub.add_option("--model,-m", o.models, "Model kinds: DT, RF, GBT, MLP")->delimiter(',');
    sub.add_option("--repetitions,-r", o.repetitions, "Repetitions per window");
    sub.add_option("--jobs,-j", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub.add_option("--train-fraction", o.train_fraction, "Training share of each split");
    sub.add_flag("--train-only-schema", o.train_only_schema, "Fit the one-hot vocabulary on training rows only");
    sub.add_option("--dt-max-depth", h.cart.max_depth);
    sub.add_option("--dt-min-samples-leaf", h.cart.min_samples_leaf);
    sub.add_option("--rf-trees", h.forest.n_trees);
    sub.add_option("--rf-max-depth", h.forest.max_depth);
    sub.add_option("--rf-features", h.forest.features_per_split, "Share of columns tried per split");
    sub.add_option("--rf-min-samples-leaf", h.forest.min_samples_leaf);
    sub.add_option("--gbt-rounds", h.gbt.n_rounds);
    sub.add_option("--gbt-max-depth", h.gbt.max_depth);
    sub.add_option("--gbt-learning-rate", h.gbt.learning_rate);
    sub.add_option("--gbt-alpha", h.gbt.alpha);
    sub.add_option("--gbt-lambda", h.gbt.lambda);
    sub.add_option("--gbt-colsample", h.gbt.colsample_bytree);
    sub.add_option("--mlp-hidden", h.mlp.hidden)->delimiter(',');
    sub.add_option("--mlp-epochs", h.mlp.epochs);
    sub.add_option("--mlp-batch", h.mlp.batch_size);
    sub.add_option("--mlp-lr-min", h.mlp.lr_min);
    sub.add_option("--mlp-lr-max", h.mlp.lr_max);
    sub.add_option("--mlp-step-size", h.mlp.step_size);
}

void add_synth(CLI::App& sub, RunOptions& o) {
    auto& c = o.synth;
    sub.add_option("--output,-o", o.output, "Capture CSV to write");
    sub.add_option("--seed", c.seed);
    sub.add_option("--config", "Key-value config file; command-line flags take precedence");
    sub.add_option("--flows", c.n_flows);
    sub.add_option("--duration", c.duration, "Seconds");
    sub.add_option("--mean-rate", c.mean_rate, "Mean per-flow rate in bit/s");
    sub.add_option("--rho", c.ar_coefficient, "AR(1) coefficient of per-flow rates");
    sub.add_option("--on-off", c.on_off, "Probability a flow pauses in a base slot");
    sub.add_option("--packet-min", c.packet_min, "Bytes");
    sub.add_option("--packet-max", c.packet_max, "Bytes");
    sub.add_option("--base-slot", c.base_slot, "Seconds between rate updates");
    sub.add_option("--noise", c.noise_fraction, "Innovation std relative to the flow mean");
    sub.add_option("--rate-spread", c.rate_spread, "Lognormal sigma of per-flow mean rates");
    sub.add_option("--tcp-fraction", c.tcp_fraction);
}

/// Fills options not given on the command line from the --config file.
void apply_config_file(CLI::App& sub) {
    const auto* config_opt = sub.get_option_no_throw("--config");
    if (!config_opt || config_opt->count() == 0) return;
    const auto cfg = flowcast::KeyValueConfig::load(config_opt->as<std::string>());
    for (const auto& [key, value] : cfg.values()) {
        auto* opt = sub.get_option_no_throw("--" + key);
        if (!opt || key == "config") throw flowcast::Error("config key '" + key + "' is not an option of '" + sub.get_name() + "'");
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flow-level bandwidth forecasting toolkit"};
    app.require_subcommand(1);

    std::map<std::string, RunOptions> options;
    auto& synth = options["synth"];
    auto& featurize = options["featurize"];
    auto& train = options["train"];
    auto& evaluate = options["evaluate"];
    auto& sweep = options["sweep"];
    auto& abl = options["ablation"];
    train.models = {"RF"};
    abl.models = {"RF", "GBT"};

    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic packet capture");
    add_synth(*s_synth, synth);

    auto* s_feat = app.add_subcommand("featurize", "Aggregate a capture into a flow dataset");
    add_common(*s_feat, featurize);
    add_dataset(*s_feat, featurize);

    auto* s_train = app.add_subcommand("train", "Train one model on a flow dataset");
    add_common(*s_train, train);
    add_dataset(*s_train, train);
    add_models(*s_train, train);

    auto* s_eval = app.add_subcommand("evaluate", "Score models against the baseline");
    add_common(*s_eval, evaluate);
    add_dataset(*s_eval, evaluate);
    add_models(*s_eval, evaluate);
    s_eval->add_option("--model-file", evaluate.model_file, "Trained model (its .schema sidecar is read too)");

    auto* s_sweep = app.add_subcommand("sweep", "Evaluate models over a list of windows");
    add_common(*s_sweep, sweep);
    add_dataset(*s_sweep, sweep);
    add_models(*s_sweep, sweep);
    s_sweep->add_option("--windows", sweep.windows, "Windows in seconds")->delimiter(',');

    auto* s_abl = app.add_subcommand("ablation", "Compare minimal and full feature sets");
    add_common(*s_abl, abl);
    add_dataset(*s_abl, abl);
    add_models(*s_abl, abl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        auto* sub = app.get_subcommands().front();
        apply_config_file(*sub);
        const std::string name = sub->get_name();
        auto& o = options[name];
        if (name == "synth") return flowcast::cli::cmd_synth(o, std::cout);
        if (name == "featurize") return flowcast::cli::cmd_featurize(o, std::cout);
        if (name == "train") return flowcast::cli::cmd_train(o, std::cout);
        if (name == "evaluate") return flowcast::cli::cmd_evaluate(o, std::cout);
        if (name == "sweep") return flowcast::cli::cmd_sweep(o, std::cout);
        if (name == "ablation") return flowcast::cli::cmd_ablation(o, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "flowcast: error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
