#include "binpick/report_io.hpp"
#include "binpick/scene_io.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

using namespace binpick;
using namespace binpick::testutil;
namespace fs = std::filesystem;

namespace {

const std::string kTmp = make_temp_dir("binpick_cli");
const std::string kCli = BINPICK_CLI_PATH;
const std::string kMesh = std::string(BINPICK_DATA_DIR) + "/lbracket.obj";

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    std::string cmd = kCli + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    while (fgets(buf.data(), int(buf.size()), pipe)) r.output += buf.data();
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// Small, fast configuration shared by the CLI runs.
std::string desk_flags(const std::string& out) {
    return "--mesh " + kMesh + " --out " + out +
           " --layers 1 --grid-nx 3 --grid-ny 3 --width 320 --height 240 --bins 1";
}

std::string strip_timing(std::string json) {
    // elapsed_ms is wall-clock and intentionally excluded from byte comparison
    size_t pos = 0;
    while ((pos = json.find("\"elapsed_ms\":", pos)) != std::string::npos) {
        size_t end = json.find_first_of(",}", pos);
        json.erase(pos, end - pos);
    }
    return json;
}

} // namespace

TEST(Cli, HelpDocumentsSubcommandsAndFlags) {
    RunResult r = run("--help");
    EXPECT_EQ(r.exit_code, 0);
    for (const char* token : {"synth", "train", "detect", "eval", "sweep", "--config", "--seed",
                              "--ref-fraction", "--hypotheses", "--sigma", "--out", "--mesh"})
        EXPECT_NE(r.output.find(token), std::string::npos) << "missing " << token << " in help";

    for (const char* sub : {"synth", "train", "detect", "eval", "sweep"}) {
        RunResult rs = run(std::string(sub) + " --help");
        EXPECT_EQ(rs.exit_code, 0);
        for (const char* token : {"--config", "--seed", "--ref-fraction", "--hypotheses", "--sigma", "--out"})
            EXPECT_NE(rs.output.find(token), std::string::npos)
                << "missing " << token << " in `" << sub << " --help`";
    }
}

TEST(Cli, MissingMeshIsUserError) {
    RunResult r = run("train --out " + kTmp + "/nomesh");
    EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, UnreadableMeshIsUserError) {
    RunResult r = run("train --mesh /nonexistent.obj --out " + kTmp + "/x.ppfm");
    EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, TrainWritesModelDeterministically) {
    std::string m1 = kTmp + "/model1.ppfm";
    std::string m2 = kTmp + "/model2.ppfm";
    RunResult r1 = run("train --mesh " + kMesh + " --out " + m1 + " --dump-json " + kTmp + "/model1.json");
    ASSERT_EQ(r1.exit_code, 0) << r1.output;
    EXPECT_NE(r1.output.find("diameter="), std::string::npos);
    EXPECT_NE(r1.output.find("points="), std::string::npos);
    EXPECT_NE(r1.output.find("entries="), std::string::npos);
    EXPECT_FALSE(read_bytes(kTmp + "/model1.json").empty());
    RunResult r2 = run("train --mesh " + kMesh + " --out " + m2);
    ASSERT_EQ(r2.exit_code, 0);
    EXPECT_EQ(read_bytes(m1), read_bytes(m2));

    PPFModel model = load_model(m1);
    EXPECT_NEAR(model.diameter, 5.170106, 1e-5);
}

TEST(Cli, TrainCubeDiameterInHeader) {
    std::string cube = kTmp + "/cube.obj";
    write_text(cube,
               "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
               "f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 3 4 8\nf 3 8 7\n"
               "f 4 1 5\nf 4 5 8\nf 2 3 7\nf 2 7 6\n");
    std::string model_path = kTmp + "/cube.ppfm";
    RunResult r = run("train --mesh " + cube + " --out " + model_path);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    PPFModel model = load_model(model_path);
    EXPECT_NEAR(model.diameter, std::sqrt(3.0), 1e-9);
}

TEST(Cli, SynthWritesSceneArtifacts) {
    std::string out = kTmp + "/synth1";
    RunResult r = run(desk_flags(out) + " --sigma 0 --seed 5 synth");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    std::string dir = out + "/scene_bin000_sig0_seed5";
    for (const char* file : {"depth.pfm", "intensity.pgm", "gt.json", "sidecar.json"})
        EXPECT_TRUE(fs::exists(fs::path(dir) / file)) << file;
    auto gts = load_ground_truth(dir + "/gt.json");
    EXPECT_EQ(gts.size(), 9u);
}

TEST(Cli, SynthRerunByteIdentical) {
    std::string out1 = kTmp + "/synth_a";
    std::string out2 = kTmp + "/synth_b";
    ASSERT_EQ(run(desk_flags(out1) + " --sigma 0.1 --seed 6 synth").exit_code, 0);
    ASSERT_EQ(run(desk_flags(out2) + " --sigma 0.1 --seed 6 synth").exit_code, 0);
    std::string dir = "/scene_bin000_sig0_seed6";
    for (const char* file : {"depth.pfm", "intensity.pgm", "gt.json", "sidecar.json"})
        EXPECT_EQ(read_bytes(out1 + dir + "/" + file), read_bytes(out2 + dir + "/" + file)) << file;
}

TEST(Cli, ThirtyBinsProduceThirtyDirectories) {
    std::string out = kTmp + "/bins30";
    RunResult r = run(desk_flags(out) + " --bins 30 --sigma 0 --seed 7 synth");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    int dirs = 0;
    for (const auto& e : fs::directory_iterator(out))
        if (e.is_directory()) ++dirs;
    EXPECT_EQ(dirs, 30);
}

TEST(Cli, DetectReportAndOverrides) {
    std::string out = kTmp + "/pipeline";
    ASSERT_EQ(run(desk_flags(out) + " --sigma 0 --seed 8 synth").exit_code, 0);
    std::string model_path = out + "/model.ppfm";
    ASSERT_EQ(run("train --mesh " + kMesh + " --out " + model_path).exit_code, 0);
    std::string scene = out + "/scene_bin000_sig0_seed8";
    RunResult r = run("detect --model " + model_path + " --scene " + scene + " --hypotheses 5");
    ASSERT_EQ(r.exit_code, 0) << r.output;

    DetectionReport report = load_detection_report(scene + "/detections.json");
    EXPECT_LE(report.detections.size(), 5u);
    EXPECT_GT(report.detections.size(), 0u);
    int best_count = 0;
    for (const auto& d : report.detections) {
        EXPECT_GE(d.hypothesis_rank, 1);
        EXPECT_LE(d.hypothesis_rank, 5);
        EXPECT_GT(d.votes, 0u);
        EXPECT_GE(d.cluster_size, 1);
        EXPECT_GE(d.elapsed_ms, 0.0);
        best_count += d.best_by_votes;
    }
    EXPECT_EQ(best_count, 1);

    // the highest-voted detection lands on a real object
    auto gts = load_ground_truth(scene + "/gt.json");
    for (const auto& d : report.detections) {
        if (!d.best_by_votes) continue;
        double best_translation = 1e300, best_rotation = 0;
        for (const auto& gt : gts) {
            double t = (d.pose.translation - gt.pose.translation).norm();
            if (t < best_translation) {
                best_translation = t;
                best_rotation = rotation_angle_between(d.pose.rotation, gt.pose.rotation);
            }
        }
        EXPECT_LE(best_translation, 0.10 * report.diameter);
        EXPECT_LE(best_rotation, deg_to_rad(20.0));
    }
}

TEST(Cli, DetectRerunIdenticalModuloTiming) {
    std::string out = kTmp + "/det_rerun";
    ASSERT_EQ(run(desk_flags(out) + " --sigma 0 --seed 9 synth").exit_code, 0);
    std::string model_path = out + "/model.ppfm";
    ASSERT_EQ(run("train --mesh " + kMesh + " --out " + model_path).exit_code, 0);
    std::string scene = out + "/scene_bin000_sig0_seed9";
    std::string r1 = scene + "/d1.json";
    std::string r2 = scene + "/d2.json";
    ASSERT_EQ(run("detect --model " + model_path + " --scene " + scene + " --report " + r1).exit_code, 0);
    ASSERT_EQ(run("detect --model " + model_path + " --scene " + scene + " --report " + r2).exit_code, 0);
    EXPECT_EQ(strip_timing(read_bytes(r1)), strip_timing(read_bytes(r2)));
}

TEST(Cli, DetectMissingFilesError) {
    EXPECT_EQ(run("detect --model /nonexistent.ppfm --scene /nonexistent").exit_code, 1);
}

TEST(Cli, DetectBadModelVersionError) {
    std::string bad = kTmp + "/bad.ppfm";
    write_text(bad, "BPPFxxxxgarbage");
    std::string out = kTmp + "/badmodel";
    ASSERT_EQ(run(desk_flags(out) + " --sigma 0 --seed 2 synth").exit_code, 0);
    RunResult r = run("detect --model " + bad + " --scene " + out + "/scene_bin000_sig0_seed2");
    EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, EmptySceneGivesEmptyDetections) {
    std::string out = kTmp + "/empty";
    ASSERT_EQ(run(desk_flags(out) + " --layers 0 --sigma 0 --seed 3 synth").exit_code, 0);
    std::string model_path = out + "/model.ppfm";
    ASSERT_EQ(run("train --mesh " + kMesh + " --out " + model_path).exit_code, 0);
    std::string scene = out + "/scene_bin000_sig0_seed3";
    RunResult r = run("detect --model " + model_path + " --scene " + scene);
    EXPECT_EQ(r.exit_code, 0) << r.output;
    DetectionReport report = load_detection_report(scene + "/detections.json");
    EXPECT_TRUE(report.detections.empty());
}

TEST(Cli, EvalPerfectDetectionGivesFullPrecision) {
    // hand-made scene dir + report where the detection equals the ground truth
    std::string scene = kTmp + "/fake_scene";
    fs::create_directories(scene);
    Pose gt;
    gt.translation = Vec3(1, 2, 50);
    save_ground_truth(scene + "/gt.json", {{0, gt}});

    DetectionReport report;
    report.scene = scene;
    report.sigma = 0;
    report.seed = 1;
    report.diameter = 5.0;
    Detection d;
    d.pose = gt;
    d.votes = 100;
    d.hypothesis_rank = 1;
    d.cluster_size = 3;
    d.best_by_votes = true;
    report.detections.push_back(d);
    std::string rp = kTmp + "/fake_report.json";
    save_detection_report(rp, report);

    std::string out = kTmp + "/fake_eval";
    RunResult r = run("eval --reports " + rp + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("all=1.000"), std::string::npos);
    EXPECT_NE(r.output.find("max_votes=1.000"), std::string::npos);
    EXPECT_TRUE(fs::exists(out + "/eval.csv"));
    EXPECT_TRUE(fs::exists(out + "/precision.svg"));
    std::string svg = read_bytes(out + "/precision.svg");
    EXPECT_NE(svg.find("all_detections"), std::string::npos);
    EXPECT_NE(svg.find("max_votes_only"), std::string::npos);
}

TEST(Cli, SweepEndToEndWithConfigFile) {
    std::string out = kTmp + "/sweep";
    std::string cfg = kTmp + "/sweep.ini";
    write_text(cfg, "mesh=" + kMesh +
                        "\nout=" + out +
                        "\nlayers=1\ngrid-nx=3\ngrid-ny=3\nwidth=320\nheight=240\n"
                        "sigmas-rel=0 0.05\nseeds=11\nbins=1\nhypotheses=3\n");
    RunResult r = run("--config " + cfg + " sweep");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_TRUE(fs::exists(out + "/model.ppfm"));
    EXPECT_TRUE(fs::exists(out + "/eval.csv"));
    EXPECT_TRUE(fs::exists(out + "/precision.svg"));
    EXPECT_TRUE(fs::exists(out + "/scene_bin000_sig0_seed11/detections.json"));
    EXPECT_TRUE(fs::exists(out + "/scene_bin000_sig1_seed11/detections.json"));

    // flag beats config: override the output directory
    std::string out2 = kTmp + "/sweep2";
    RunResult r2 = run("--config " + cfg + " --out " + out2 + " --sigmas-rel 0 sweep");
    ASSERT_EQ(r2.exit_code, 0) << r2.output;
    EXPECT_TRUE(fs::exists(out2 + "/eval.csv"));
    EXPECT_FALSE(fs::exists(out2 + "/scene_bin000_sig1_seed11"));

    // eval CSV deterministic across repeated eval runs on the same reports
    std::string eval1 = kTmp + "/eval_rerun1";
    std::string eval2 = kTmp + "/eval_rerun2";
    ASSERT_EQ(run("eval --reports " + out + " --out " + eval1).exit_code, 0);
    ASSERT_EQ(run("eval --reports " + out + " --out " + eval2).exit_code, 0);
    EXPECT_EQ(read_bytes(eval1 + "/eval.csv"), read_bytes(eval2 + "/eval.csv"));
    EXPECT_EQ(read_bytes(eval1 + "/precision.svg"), read_bytes(eval2 + "/precision.svg"));
}

TEST(Cli, NoSubcommandPrintsHelp) {
    RunResult r = run("");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.output.find("synth"), std::string::npos);
}
