#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "flowcast/capture.hpp"
#include "flowcast/flow_table.hpp"
#include "support.hpp"

using namespace flowcast;

namespace {

struct Run {
    int status = -1;
    std::string output;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Run run(const flowcast::testing::TempDir& dir, const std::string& args) {
    const auto log = dir.file("cli.log");
    const std::string cmd = std::string(FLOWCAST_CLI) + " " + args + " > " + log + " 2>&1";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(log)};
}

class Cli : public ::testing::Test {
protected:
    flowcast::testing::TempDir dir{"cli"};

    std::string synth_capture(const std::string& name = "cap.csv", int seed = 3) {
        const auto path = dir.file(name);
        const auto r = run(dir, "synth --flows 20 --duration 10 --seed " + std::to_string(seed) + " -o " + path);
        EXPECT_EQ(r.status, 0) << r.output;
        return path;
    }
};

}  // namespace

TEST_F(Cli, SynthDefaultPrintsCounts) {
    const auto path = dir.file("default.csv");
    const auto r = run(dir, "synth -o " + path);
    ASSERT_EQ(r.status, 0) << r.output;
    const auto cap = load_capture(path);
    EXPECT_NE(r.output.find("packets: " + std::to_string(cap.packet_count())), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("flows: 50"), std::string::npos);
    EXPECT_NE(r.output.find("rho = 0.9"), std::string::npos) << "effective config is echoed";
}

TEST_F(Cli, SynthRejectsZeroFlows) {
    const auto r = run(dir, "synth --flows 0 -o " + dir.file("x.csv"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("n_flows"), std::string::npos) << r.output;
}

TEST_F(Cli, SynthIsByteIdenticalForSameSeed) {
    const auto a = synth_capture("a.csv");
    const auto b = synth_capture("b.csv");
    EXPECT_EQ(slurp(a), slurp(b));
    const auto c = synth_capture("c.csv", 4);
    EXPECT_NE(slurp(a), slurp(c));
}

TEST_F(Cli, FeaturizeConservesBytesAndBoundsSlots) {
    const auto cap_path = synth_capture();
    const auto out = dir.file("flows.csv");
    const auto r = run(dir, "featurize -i " + cap_path + " -o " + out + " --window 1.0");
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("features: 82"), std::string::npos) << r.output;
    const auto labeled = load_feature_table(out);
    const auto unlabeled = load_feature_table(dir.file("flows.unlabeled.csv"));
    double bytes = 0.0;
    std::set<double> slots;
    for (const auto* t : {&labeled, &unlabeled}) {
        const auto len = t->column_index("length_cumsum");
        const auto slot = t->column_index("timeslot");
        for (std::size_t i = 0; i < t->rows(); ++i) {
            bytes += t->row(i)[len];
            slots.insert(t->row(i)[slot]);
        }
    }
    double capture_bytes = 0.0;
    for (const auto& p : load_capture(cap_path).packets) capture_bytes += p.length;
    EXPECT_EQ(bytes, capture_bytes);
    EXPECT_LE(slots.size(), 10u);
}

TEST_F(Cli, FeaturizeMinimalHasEightColumns) {
    const auto cap_path = synth_capture();
    const auto out = dir.file("min.csv");
    ASSERT_EQ(run(dir, "featurize -i " + cap_path + " -o " + out + " --mode minimal").status, 0);
    std::ifstream in(out);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "src_ip,dst_ip,src_port,dst_port,protocol,dscp,bitrate,bitrate_future");
}

TEST_F(Cli, FeaturizeEmptyCaptureWarns) {
    const auto empty = dir.file("empty.csv");
    std::ofstream(empty) << CsvSchema::default_schema().header() << '\n';
    const auto r = run(dir, "featurize -i " + empty + " -o " + dir.file("e.csv"));
    EXPECT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("warning"), std::string::npos);
    EXPECT_EQ(load_feature_table(dir.file("e.csv")).rows(), 0u);
}

TEST_F(Cli, TrainThenEvaluateModelFile) {
    const auto cap_path = synth_capture();
    const auto flows = dir.file("flows.csv");
    ASSERT_EQ(run(dir, "featurize -i " + cap_path + " -o " + flows + " -w 0.5").status, 0);
    const auto model = dir.file("rf.bin");
    auto r = run(dir, "train -i " + flows + " -o " + model + " -m RF --rf-trees 5");
    ASSERT_EQ(r.status, 0) << r.output;
    r = run(dir, "evaluate -i " + flows + " --model-file " + model + " -o " + dir.file("eval1") + " -w 0.5");
    ASSERT_EQ(r.status, 0) << r.output;
    r = run(dir, "evaluate -i " + flows + " --model-file " + model + " -o " + dir.file("eval2") + " -w 0.5");
    ASSERT_EQ(r.status, 0) << r.output;
    for (auto f : {"/metrics.csv", "/summary.csv", "/fig2.csv"}) {
        EXPECT_FALSE(slurp(dir.file("eval1") + f).empty());
        EXPECT_EQ(slurp(dir.file("eval1") + f), slurp(dir.file("eval2") + f)) << f;
    }
}

TEST_F(Cli, EvaluateTwiceIsIdentical) {
    const auto cap_path = synth_capture();
    for (auto out : {"a", "b"}) {
        const auto r = run(dir, "evaluate -i " + cap_path + " -o " + dir.file(out) +
                                    " -w 0.5 -m DT,RF --rf-trees 4 -r 2 --seed 9");
        ASSERT_EQ(r.status, 0) << r.output;
    }
    for (auto f : {"/metrics.csv", "/summary.csv", "/fig2.csv"}) EXPECT_EQ(slurp(dir.file("a") + f), slurp(dir.file("b") + f));
}

TEST_F(Cli, SweepShape) {
    const auto cap_path = synth_capture();
    const auto out = dir.file("sweep");
    const auto r = run(dir, "sweep -i " + cap_path + " -o " + out +
                                " -m DT,RF,GBT,MLP -r 1 --rf-trees 3 --gbt-rounds 5 --mlp-epochs 1 --mlp-hidden 8,4");
    ASSERT_EQ(r.status, 0) << r.output;
    std::ifstream in(out + "/summary.csv");
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) rows += line.empty() ? 0 : 1;
    EXPECT_EQ(rows, 15u * 4);
    const auto tables = slurp(out + "/tables.txt");
    EXPECT_NE(tables.find("windows = 0.03,0.05"), std::string::npos) << tables.substr(0, 600);
}

TEST_F(Cli, AblationEmitsEightValues) {
    const auto cap_path = synth_capture();
    const auto out = dir.file("abl");
    const auto r = run(dir, "ablation -i " + cap_path + " -o " + out + " -w 0.5 -r 1 --rf-trees 4 --gbt-rounds 5");
    ASSERT_EQ(r.status, 0) << r.output;
    std::ifstream in(out + "/ablation.csv");
    std::string line;
    std::getline(in, line);
    std::size_t values = 0;
    while (std::getline(in, line)) {
        const auto fields = text::split(line, ',');
        ASSERT_EQ(fields.size(), 5u) << line;
        values += (fields[3] != "NA") + (fields[4] != "NA");
    }
    EXPECT_EQ(values, 8u);
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
    const auto cfg = dir.file("synth.cfg");
    std::ofstream(cfg) << "flows = 7\nduration = 5\nseed = 2\n";
    auto r = run(dir, "synth --config " + cfg + " -o " + dir.file("c1.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("flows: 7"), std::string::npos) << r.output;
    r = run(dir, "synth --config " + cfg + " --flows 9 -o " + dir.file("c2.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("flows: 9"), std::string::npos) << r.output;

    std::ofstream(dir.file("bad.cfg")) << "no-such-key = 1\n";
    EXPECT_NE(run(dir, "synth --config " + dir.file("bad.cfg") + " -o " + dir.file("c3.csv")).status, 0);
}

TEST_F(Cli, ErrorsExitNonzeroWithDiagnostic) {
    auto r = run(dir, "featurize -i /nonexistent.csv -o " + dir.file("x.csv"));
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("flowcast: error:"), std::string::npos) << r.output;
    r = run(dir, "sweep -o " + dir.file("x"));
    EXPECT_NE(r.status, 0);
    r = run(dir, "train -i " + synth_capture() + " -o " + dir.file("m.bin"));
    EXPECT_NE(r.status, 0) << "a capture is not a flow dataset";
}
