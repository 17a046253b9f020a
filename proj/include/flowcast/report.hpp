#pragma once

// Report files. Metric files carry full-precision values and no timings, so two runs with the
// same seed produce byte-identical metric files; wall times go to a separate file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include "flowcast/experiment.hpp"

namespace flowcast {

namespace detail {

inline std::string optional_value(const std::optional<double>& v, double scale = 1.0) {
    return v ? text::format_double(*v * scale) : std::string("NA");
}

/// printf-style %.6g, the display precision of the reference tables.
inline std::string display(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::ofstream open_report(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace detail

/// One row per (window, model, repetition); the baseline appears as model "Base".
inline void write_metrics_csv(std::ostream& out, const EvalReport& r) {
    out << "window,model,repetition,train_rows,test_rows,mae,rmse\n";
    for (const auto& b : r.baseline) {
        out << text::format_double(b.window) << ",Base," << b.repetition << ",," << b.test_rows << ','
            << text::format_double(b.metrics.mae) << ',' << text::format_double(b.metrics.rmse) << '\n';
    }
    for (const auto& c : r.cells) {
        out << text::format_double(c.window) << ',' << c.model << ',' << c.repetition << ',' << c.train_rows << ','
            << c.test_rows << ',' << text::format_double(c.metrics.mae) << ',' << text::format_double(c.metrics.rmse)
            << '\n';
    }
}

inline void write_summary_csv(std::ostream& out, const EvalReport& r) {
    out << "window,model,mae,rmse,base_mae,base_rmse,relative_mae,relative_rmse\n";
    for (const auto& s : r.summaries) {
        out << text::format_double(s.window) << ',' << s.model << ',' << text::format_double(s.mean.mae) << ','
            << text::format_double(s.mean.rmse) << ',' << text::format_double(s.base_mean.mae) << ','
            << text::format_double(s.base_mean.rmse) << ',' << detail::optional_value(s.relative_mae) << ','
            << detail::optional_value(s.relative_rmse) << '\n';
    }
}

/// (window, relative MAE %, relative RMSE %) triples per model, for plotting.
inline void write_fig2_csv(std::ostream& out, const EvalReport& r) {
    out << "window,model,relative_mae_percent,relative_rmse_percent\n";
    for (const auto& s : r.summaries) {
        out << text::format_double(s.window) << ',' << s.model << ',' << detail::optional_value(s.relative_mae, 100.0)
            << ',' << detail::optional_value(s.relative_rmse, 100.0) << '\n';
    }
}

inline void write_timings_csv(std::ostream& out, const EvalReport& r) {
    out << "window,model,repetition,train_us_per_sample,predict_us_per_sample\n";
    for (const auto& c : r.cells) {
        out << text::format_double(c.window) << ',' << c.model << ',' << c.repetition << ','
            << text::format_double(c.train_us_per_sample) << ',' << text::format_double(c.predict_us_per_sample) << '\n';
    }
}

/// Human-readable MAE and RMSE tables: one row per window, one column per model plus Base.
inline void write_tables(std::ostream& out, const EvalReport& r, const std::vector<std::string>& models) {
    for (const bool is_mae : {true, false}) {
        out << (is_mae ? "MAE (bit/s)\n" : "RMSE (bit/s)\n");
        out << "window";
        for (const auto& m : models) out << '\t' << m;
        out << "\tBase\n";
        for (const auto& w : r.windows) {
            out << detail::display(w.window);
            const EvalSummary* any = nullptr;
            for (const auto& m : models) {
                const auto* s = r.find(w.window, m);
                out << '\t' << (s ? detail::display(is_mae ? s->mean.mae : s->mean.rmse) : "NA");
                if (s) any = s;
            }
            if (any) {
                out << '\t' << detail::display(is_mae ? any->base_mean.mae : any->base_mean.rmse);
            } else {
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& b : r.baseline) {
                    if (b.window != w.window) continue;
                    sum += is_mae ? b.metrics.mae : b.metrics.rmse;
                    ++n;
                }
                out << '\t' << (n ? detail::display(sum / static_cast<double>(n)) : "NA");
            }
            out << '\n';
        }
        out << '\n';
    }
}

/// Writes metrics.csv, summary.csv, fig2.csv, timings.csv and tables.txt into `dir`. The
/// tables file starts with the effective-configuration echo.
inline void write_report(const std::filesystem::path& dir, const EvalReport& r, const std::vector<std::string>& models,
                         const std::string& config_echo) {
    std::filesystem::create_directories(dir);
    auto metrics = detail::open_report(dir / "metrics.csv");
    write_metrics_csv(metrics, r);
    auto summary = detail::open_report(dir / "summary.csv");
    write_summary_csv(summary, r);
    auto fig2 = detail::open_report(dir / "fig2.csv");
    write_fig2_csv(fig2, r);
    auto timings = detail::open_report(dir / "timings.csv");
    write_timings_csv(timings, r);
    auto tables = detail::open_report(dir / "tables.txt");
    tables << config_echo << '\n';
    write_tables(tables, r, models);
}

inline void write_ablation_csv(std::ostream& out, const AblationReport& a) {
    out << "window,model,mode,relative_mae_percent,relative_rmse_percent\n";
    for (const auto& c : a.cells) {
        out << text::format_double(a.window) << ',' << c.model << ',' << to_string(c.mode) << ','
            << detail::optional_value(c.relative_mae, 100.0) << ',' << detail::optional_value(c.relative_rmse, 100.0)
            << '\n';
    }
}

/// Relative accuracy gain with and without the engineered features, one row per model.
inline void write_ablation_table(std::ostream& out, const AblationReport& a) {
    out << "relative gain over Base (%), window " << detail::display(a.window) << " s\n";
    out << "model\tMAE minimal\tMAE full\tRMSE minimal\tRMSE full\n";
    for (std::size_t i = 0; i + 1 < a.cells.size(); i += 2) {
        const auto& lo = a.cells[i];
        const auto& hi = a.cells[i + 1];
        auto pct = [](const std::optional<double>& v) {
            return v ? text::format_double(*v * 100.0, 2) : std::string("NA");
        };
        out << lo.model << '\t' << pct(lo.relative_mae) << '\t' << pct(hi.relative_mae) << '\t' << pct(lo.relative_rmse)
            << '\t' << pct(hi.relative_rmse) << '\n';
    }
}

}  // namespace flowcast
