// Command line front end for the bin picking pipeline: scene synthesis,
// model training, detection, evaluation and full parameter sweeps.

#include "binpick/binpick.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace binpick;

namespace {

struct PipelineOptions {
    std::string mesh_path;
    std::string out = "out";
    double mesh_scale = 1.0;

    BinConfig bin;
    int image_width = 1600;
    int image_height = 900;
    double focal = 0;  // 0 = auto from bin
    double d_near = 0; // 0 = auto
    double d_far = 0;  // 0 = auto

    int n_angle_steps = 30;
    int n_dist_steps = 20;
    int n_alpha_steps = 30;
    double d_max = 0;            // 0 = object diameter
    double tau = 0;              // 0 = 5% of diameter
    double ref_fraction = 0.20;
    double cluster_dist = 0.75;
    double cluster_angle_deg = 20.0;
    int n_hypotheses = 5;
    double exclusion_radius = 0; // 0 = 1.1 * diameter
    bool no_smoothing = false;

    int n_bins = 1;
    uint64_t ref_seed = 0; // nonzero: randomized reference-point selection
    std::vector<double> sigmas;     // absolute units; overrides sigmas_rel
    std::vector<double> sigmas_rel; // fractions of the diameter
    std::vector<uint64_t> seeds;
    std::vector<double> eval_trans_thresholds_rel; // fractions of diameter
    std::vector<double> eval_rot_thresholds_deg;

    std::string model_path;
    std::string scene_dir;
    std::string report_path;
    std::vector<std::string> report_inputs;
    std::string dump_json;
};

TriangleMesh load_input_mesh(const PipelineOptions& opt) {
    if (opt.mesh_path.empty()) throw io_error("no mesh given (--mesh)");
    TriangleMesh mesh = load_mesh(opt.mesh_path);
    if (opt.mesh_scale != 1.0) {
        if (opt.mesh_scale <= 0) throw io_error("--scale must be positive");
        for (auto& v : mesh.vertices) v *= opt.mesh_scale;
    }
    if (!mesh.has_normals()) mesh = compute_vertex_normals(mesh);
    return mesh;
}

DetectorParams make_params(const PipelineOptions& opt, double diameter) {
    DetectorParams p = DetectorParams::defaults_for(diameter);
    p.n_angle_steps = opt.n_angle_steps;
    p.n_dist_steps = opt.n_dist_steps;
    p.n_alpha_steps = opt.n_alpha_steps;
    if (opt.d_max > 0) p.d_max = opt.d_max;
    if (opt.tau > 0) p.tau = opt.tau;
    p.ref_fraction = opt.ref_fraction;
    p.cluster_dist = opt.cluster_dist;
    p.cluster_angle = deg_to_rad(opt.cluster_angle_deg);
    p.n_hypotheses = opt.n_hypotheses;
    if (opt.exclusion_radius > 0) p.exclusion_radius = opt.exclusion_radius;
    p.validate();
    return p;
}

CameraIntrinsics make_camera(const PipelineOptions& opt) {
    CameraIntrinsics cam = default_camera_for_bin(opt.bin, opt.image_width, opt.image_height);
    if (opt.focal > 0) cam.f = opt.focal;
    if (opt.d_near > 0) cam.d_near = opt.d_near;
    if (opt.d_far > 0) cam.d_far = opt.d_far;
    cam.validate();
    return cam;
}

std::vector<double> effective_sigmas(const PipelineOptions& opt, double diameter) {
    if (!opt.sigmas.empty()) return opt.sigmas;
    std::vector<double> out;
    for (double rel : opt.sigmas_rel) out.push_back(rel * diameter);
    if (out.empty()) out.push_back(0.0);
    return out;
}

std::string scene_dir_name(int bin, size_t sigma_idx, uint64_t seed) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "scene_bin%03d_sig%zu_seed%llu", bin, sigma_idx,
                  (unsigned long long)seed);
    return buf;
}

int cmd_synth(const PipelineOptions& opt) {
    TriangleMesh mesh = load_input_mesh(opt);
    double diameter = object_diameter(mesh);
    CameraIntrinsics cam = make_camera(opt);
    std::vector<double> sigmas = effective_sigmas(opt, diameter);
    DetectorParams params = make_params(opt, diameter);

    fs::create_directories(opt.out);
    int written = 0;
    for (size_t si = 0; si < sigmas.size(); ++si) {
        for (uint64_t seed : opt.seeds) {
            for (int b = 0; b < opt.n_bins; ++b) {
                uint64_t effective = opt.n_bins == 1 ? seed : mix_seed(seed, uint64_t(b));
                SceneDataset scene = synthesize_scene(mesh, opt.bin, cam, sigmas[si], effective, params.tau);
                std::string dir = (fs::path(opt.out) / scene_dir_name(b, si, seed)).string();
                save_scene(dir, scene, opt.bin);
                ++written;
                std::printf("synth: %s  objects=%zu truncated=%d points=%zu\n", dir.c_str(),
                            scene.ground_truth.size(), scene.truncated, scene.scene_cloud.size());
            }
        }
    }
    std::printf("synth: wrote %d scene directories under %s\n", written, opt.out.c_str());
    return 0;
}

int cmd_train(const PipelineOptions& opt) {
    TriangleMesh mesh = load_input_mesh(opt);
    double diameter = object_diameter(mesh);
    DetectorParams params = make_params(opt, diameter);
    PointCloud cloud = mesh_to_cloud(mesh, params.tau);
    PPFModel model = build_model(cloud, params, diameter);

    std::string out = opt.out;
    if (fs::is_directory(out) || out.back() == '/') {
        fs::create_directories(out);
        out = (fs::path(out) / "model.ppfm").string();
    }
    save_model(out, model);
    if (!opt.dump_json.empty()) {
        std::ofstream dump(opt.dump_json);
        if (!dump) throw io_error("cannot write JSON dump: " + opt.dump_json);
        dump << model_debug_json(model).dump(2) << "\n";
    }
    std::printf("train: diameter=%.6f points=%zu keys=%zu entries=%zu -> %s\n", diameter,
                model.model_cloud.size(), model.key_count(), model.total_entries(), out.c_str());
    return 0;
}

int cmd_detect(const PipelineOptions& opt) {
    if (opt.model_path.empty()) throw io_error("no model given (--model)");
    if (opt.scene_dir.empty()) throw io_error("no scene given (--scene)");
    PPFModel model = load_model(opt.model_path);

    DetectorParams params = model.params; // quantization must match the table
    params.n_alpha_steps = opt.n_alpha_steps;
    params.ref_fraction = opt.ref_fraction;
    params.cluster_dist = opt.cluster_dist;
    params.cluster_angle = deg_to_rad(opt.cluster_angle_deg);
    params.n_hypotheses = opt.n_hypotheses;
    params.exclusion_radius = opt.exclusion_radius > 0 ? opt.exclusion_radius : 1.1 * model.diameter;
    params.validate();

    LoadedScene scene = load_scene(opt.scene_dir);
    PointCloud cloud = unproject(scene.depth);
    std::vector<Detection> detections =
        detect(cloud, model, params, !opt.no_smoothing, Vec3(0, 0, -1), opt.ref_seed);

    DetectionReport report;
    report.scene = opt.scene_dir;
    report.sigma = scene.sidecar.noise_sigma;
    report.seed = scene.sidecar.seed;
    report.diameter = model.diameter;
    report.detections = detections;
    std::string out = opt.report_path.empty() ? (fs::path(opt.scene_dir) / "detections.json").string()
                                              : opt.report_path;
    save_detection_report(out, report);

    for (const auto& d : detections)
        std::printf("detect: rank=%d votes=%llu cluster=%d%s %.1f ms\n", d.hypothesis_rank,
                    (unsigned long long)d.votes, d.cluster_size, d.best_by_votes ? " best" : "",
                    d.elapsed_ms);
    std::printf("detect: %zu detections -> %s\n", detections.size(), out.c_str());
    return 0;
}

std::vector<EvalRecord> records_from_reports(const std::vector<std::string>& inputs,
                                             std::vector<double>* diameter_out) {
    std::vector<std::string> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto& e : fs::recursive_directory_iterator(in))
                if (e.is_regular_file() && e.path().filename() == "detections.json")
                    found.push_back(e.path().string());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(in);
        }
    }
    if (files.empty()) throw io_error("no detection reports found");

    std::vector<EvalRecord> records;
    for (const auto& file : files) {
        DetectionReport report = load_detection_report(file);
        auto gts = load_ground_truth((fs::path(report.scene) / "gt.json").string());
        if (gts.empty()) continue;
        for (const auto& d : report.detections) {
            EvalRecord r;
            r.sigma = report.sigma;
            r.seed = report.seed;
            r.scene_id = fs::path(report.scene).filename().string();
            r.hypothesis_rank = d.hypothesis_rank;
            r.votes = d.votes;
            r.best_by_votes = d.best_by_votes;
            r.error = match_to_ground_truth(d.pose, gts, report.diameter);
            records.push_back(std::move(r));
        }
        if (diameter_out) diameter_out->push_back(report.diameter);
    }
    if (records.empty()) throw io_error("reports contained no detections");
    return records;
}

int cmd_eval(const PipelineOptions& opt) {
    if (opt.report_inputs.empty()) throw io_error("no reports given (--reports)");
    std::vector<double> diameters;
    std::vector<EvalRecord> records = records_from_reports(opt.report_inputs, &diameters);

    std::vector<double> trans_thresholds = opt.eval_trans_thresholds_rel;
    std::vector<double> rot_thresholds;
    for (double deg : opt.eval_rot_thresholds_deg) rot_thresholds.push_back(deg_to_rad(deg));

    // Group per sigma, then build the four curve families.
    std::vector<double> sigmas;
    for (const auto& r : records)
        if (std::find(sigmas.begin(), sigmas.end(), r.sigma) == sigmas.end()) sigmas.push_back(r.sigma);
    std::sort(sigmas.begin(), sigmas.end());

    std::vector<PrecisionCurve> curves;
    for (double sigma : sigmas) {
        std::vector<EvalRecord> group;
        for (const auto& r : records)
            if (r.sigma == sigma) group.push_back(r);
        for (auto mode : {SelectionMode::all_detections, SelectionMode::max_votes_only}) {
            curves.push_back(precision_sweep(group, trans_thresholds, mode, ErrorMetric::translation_rel, sigma));
            curves.push_back(precision_sweep(group, rot_thresholds, mode, ErrorMetric::rotation, sigma));
        }
    }

    fs::create_directories(opt.out);
    std::string csv = (fs::path(opt.out) / "eval.csv").string();
    std::string svg = (fs::path(opt.out) / "precision.svg").string();
    save_records_csv(csv, records);
    save_precision_svg(svg, curves);

    auto precision_at = [&](SelectionMode mode, double trans_rel, double rot_rad) {
        size_t n = 0, hit = 0;
        for (const auto& r : records) {
            if (mode == SelectionMode::max_votes_only && !r.best_by_votes) continue;
            ++n;
            if (r.error.translation_err_rel <= trans_rel && r.error.rotation_err <= rot_rad) ++hit;
        }
        return n ? double(hit) / double(n) : 0.0;
    };
    size_t ambiguous = 0;
    for (const auto& r : records) ambiguous += r.error.ambiguous;
    std::printf("eval: %zu detections across %zu sigma level(s) -> %s, %s\n", records.size(),
                sigmas.size(), csv.c_str(), svg.c_str());
    std::printf("eval: precision@(10%%D,20deg) all=%.3f max_votes=%.3f, %zu ambiguous match(es)\n",
                precision_at(SelectionMode::all_detections, 0.10, deg_to_rad(20)),
                precision_at(SelectionMode::max_votes_only, 0.10, deg_to_rad(20)), ambiguous);
    return 0;
}

int cmd_sweep(const PipelineOptions& opt) {
    TriangleMesh mesh = load_input_mesh(opt);
    double diameter = object_diameter(mesh);
    DetectorParams params = make_params(opt, diameter);
    CameraIntrinsics cam = make_camera(opt);
    std::vector<double> sigmas = effective_sigmas(opt, diameter);

    fs::create_directories(opt.out);
    std::string model_path = (fs::path(opt.out) / "model.ppfm").string();
    PointCloud cloud = mesh_to_cloud(mesh, params.tau);
    PPFModel model = build_model(cloud, params, diameter);
    save_model(model_path, model);
    std::printf("sweep: model %zu points, %zu entries\n", model.model_cloud.size(), model.total_entries());

    std::vector<std::string> report_files;
    for (size_t si = 0; si < sigmas.size(); ++si) {
        for (uint64_t seed : opt.seeds) {
            for (int b = 0; b < opt.n_bins; ++b) {
                uint64_t effective = opt.n_bins == 1 ? seed : mix_seed(seed, uint64_t(b));
                SceneDataset scene = synthesize_scene(mesh, opt.bin, cam, sigmas[si], effective, params.tau);
                std::string dir = (fs::path(opt.out) / scene_dir_name(b, si, seed)).string();
                save_scene(dir, scene, opt.bin);

                std::vector<Detection> detections =
                    detect(scene.scene_cloud, model, params, !opt.no_smoothing, Vec3(0, 0, -1), opt.ref_seed);
                DetectionReport report;
                report.scene = dir;
                report.sigma = sigmas[si];
                report.seed = effective;
                report.diameter = diameter;
                report.detections = detections;
                std::string rp = (fs::path(dir) / "detections.json").string();
                save_detection_report(rp, report);
                report_files.push_back(rp);
                std::printf("sweep: %s detections=%zu\n", dir.c_str(), detections.size());
            }
        }
    }

    PipelineOptions eval_opt = opt;
    eval_opt.report_inputs = report_files;
    return cmd_eval(eval_opt);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point pair feature bin picking pipeline"};
    app.fallthrough(true);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_config("--config", "", "Config file (INI; keys match long option names)");

    PipelineOptions opt;
    opt.sigmas_rel = {0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
    opt.seeds = {1, 2, 3};
    opt.eval_trans_thresholds_rel = {0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.10, 0.15, 0.20, 0.30, 0.50};
    opt.eval_rot_thresholds_deg = {1, 2, 4, 6, 8, 10, 12, 16, 20, 30, 45, 60, 90};

    app.add_option("--mesh", opt.mesh_path, "Object mesh (OBJ or PLY)");
    app.add_option("--scale", opt.mesh_scale, "Uniform scale applied to mesh units")->capture_default_str();
    app.add_option("--out", opt.out, "Output file or directory")->capture_default_str();

    app.add_option("--bin-w", opt.bin.bin_w, "Bin inner width")->capture_default_str();
    app.add_option("--bin-h", opt.bin.bin_h, "Bin inner height")->capture_default_str();
    app.add_option("--bin-d", opt.bin.bin_d, "Bin inner depth")->capture_default_str();
    app.add_option("--drop-height", opt.bin.drop_height, "Pile height cap")->capture_default_str();
    app.add_option("--camera-height", opt.bin.camera_height, "Camera height above the floor")
        ->capture_default_str();
    app.add_option("--grid-nx", opt.bin.grid_nx, "Objects per layer along x")->capture_default_str();
    app.add_option("--grid-ny", opt.bin.grid_ny, "Objects per layer along y")->capture_default_str();
    app.add_option("--layers", opt.bin.n_layers, "Drop layers per bin")->capture_default_str();

    app.add_option("--width", opt.image_width, "Render width in pixels")->capture_default_str();
    app.add_option("--height", opt.image_height, "Render height in pixels")->capture_default_str();
    app.add_option("--focal", opt.focal, "Focal length in pixels (0 = auto)")->capture_default_str();
    app.add_option("--near", opt.d_near, "Near clip distance (0 = auto)")->capture_default_str();
    app.add_option("--far", opt.d_far, "Far clip distance (0 = auto)")->capture_default_str();

    app.add_option("--angle-steps", opt.n_angle_steps, "Feature angle discretization steps")
        ->capture_default_str();
    app.add_option("--dist-steps", opt.n_dist_steps, "Feature distance discretization steps")
        ->capture_default_str();
    app.add_option("--alpha-steps", opt.n_alpha_steps, "Accumulator angle bins")->capture_default_str();
    app.add_option("--dmax", opt.d_max, "Maximum pair distance (0 = object diameter)")
        ->capture_default_str();
    app.add_option("--tau", opt.tau, "Subsample resolution (0 = 5% of diameter)")->capture_default_str();
    app.add_option("--ref-fraction", opt.ref_fraction, "Fraction of points used as references")
        ->capture_default_str();
    app.add_option("--cluster-dist", opt.cluster_dist, "Pose clustering translation threshold")
        ->capture_default_str();
    app.add_option("--cluster-angle-deg", opt.cluster_angle_deg, "Pose clustering rotation threshold")
        ->capture_default_str();
    app.add_option("--hypotheses", opt.n_hypotheses, "Number of hypothesis regions")->capture_default_str();
    app.add_option("--exclusion-radius", opt.exclusion_radius,
                   "Hypothesis exclusion radius (0 = 1.1 * diameter)")
        ->capture_default_str();
    app.add_flag("--no-smoothing", opt.no_smoothing, "Disable hypothesis height smoothing");
    app.add_option("--ref-seed", opt.ref_seed,
                   "Nonzero: pick reference points by seeded random sampling instead of the stride")
        ->capture_default_str();

    app.add_option("--bins", opt.n_bins, "Bins per (sigma, seed)")->capture_default_str();
    app.add_option("--sigmas", opt.sigmas, "Noise sigma list in scene units (overrides --sigmas-rel)");
    app.add_option("--sigmas-rel", opt.sigmas_rel, "Noise sigma list as fractions of the diameter")
        ->capture_default_str();
    app.add_option("--seeds", opt.seeds, "Seed list")->capture_default_str();
    app.add_option("--trans-thresholds-rel", opt.eval_trans_thresholds_rel,
                   "Evaluation translation thresholds (fractions of diameter)");
    app.add_option("--rot-thresholds-deg", opt.eval_rot_thresholds_deg, "Evaluation rotation thresholds");

    app.add_option("--model", opt.model_path, "Trained model file");
    app.add_option("--scene", opt.scene_dir, "Scene directory from synth");
    app.add_option("--report", opt.report_path, "Detection report output path");
    app.add_option("--reports", opt.report_inputs, "Detection reports (files or directories)");
    app.add_option("--dump-json", opt.dump_json, "Also dump the model table as JSON (train)");

    // Convenience single-value forms; they win over the list options.
    uint64_t single_seed = 0;
    double single_sigma = -1;
    auto* seed_opt = app.add_option("--seed", single_seed, "Single seed (overrides --seeds)");
    auto* sigma_opt = app.add_option("--sigma", single_sigma, "Single noise sigma (overrides --sigmas)");

    auto* synth = app.add_subcommand("synth", "Generate synthetic bin scenes with ground truth");
    auto* train = app.add_subcommand("train", "Build a point pair feature model from a mesh");
    auto* detect_cmd = app.add_subcommand("detect", "Detect object poses in a scene");
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate detection reports against ground truth");
    auto* sweep = app.add_subcommand("sweep", "Full synth/train/detect/eval sweep over sigmas and seeds");
    app.require_subcommand(0, 1);
    // every subcommand's --help lists the shared pipeline flags too
    for (CLI::App* sub : {synth, train, detect_cmd, eval_cmd, sweep})
        sub->footer([&app]() {
            return "Pipeline flags (also valid before the subcommand or in --config):\n" +
                   app.get_formatter()->make_help(&app, app.get_name(), CLI::AppFormatMode::Normal);
        });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (*seed_opt) opt.seeds = {single_seed};
    if (*sigma_opt) opt.sigmas = {single_sigma};

    try {
        if (*synth) return cmd_synth(opt);
        if (*train) return cmd_train(opt);
        if (*detect_cmd) return cmd_detect(opt);
        if (*eval_cmd) return cmd_eval(opt);
        if (*sweep) return cmd_sweep(opt);
        std::cout << app.help();
        return 0;
    } catch (const invariant_error& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
