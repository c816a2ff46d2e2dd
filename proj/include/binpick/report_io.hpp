#pragma once

#include "binpick/eval.hpp"
#include "binpick/scene_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace binpick {

struct DetectionReport {
    std::string scene; // scene directory the detections refer to
    double sigma = 0;
    uint64_t seed = 0;
    double diameter = 0; // model diameter, for relative error reporting
    std::vector<Detection> detections;
};

inline void save_detection_report(const std::string& path, const DetectionReport& report) {
    nlohmann::json j;
    j["scene"] = report.scene;
    j["sigma"] = report.sigma;
    j["seed"] = report.seed;
    j["diameter"] = report.diameter;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& d : report.detections) {
        nlohmann::json e = pose_to_json(d.pose);
        e["hypothesis_rank"] = d.hypothesis_rank;
        e["votes"] = d.votes;
        e["cluster_size"] = d.cluster_size;
        e["best_by_votes"] = d.best_by_votes;
        e["elapsed_ms"] = d.elapsed_ms;
        list.push_back(std::move(e));
    }
    j["detections"] = std::move(list);
    std::ofstream out(path);
    if (!out) throw io_error("cannot write detection report: " + path);
    out << j.dump(2) << "\n";
}

inline DetectionReport load_detection_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open detection report: " + path);
    nlohmann::json j;
    in >> j;
    DetectionReport report;
    report.scene = j.at("scene").get<std::string>();
    report.sigma = j.at("sigma").get<double>();
    report.seed = j.at("seed").get<uint64_t>();
    report.diameter = j.value("diameter", 0.0);
    for (const auto& e : j.at("detections")) {
        Detection d;
        d.pose = pose_from_json(e);
        d.hypothesis_rank = e.at("hypothesis_rank").get<int>();
        d.votes = e.at("votes").get<uint64_t>();
        d.cluster_size = e.at("cluster_size").get<int>();
        d.best_by_votes = e.at("best_by_votes").get<bool>();
        d.elapsed_ms = e.at("elapsed_ms").get<double>();
        report.detections.push_back(std::move(d));
    }
    return report;
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace detail

inline constexpr const char* kCsvHeader =
    "sigma,seed,scene_id,hypothesis_rank,votes,translation_err,translation_err_rel,rotation_err_deg,"
    "best_by_votes";

inline void save_records_csv(const std::string& path, const std::vector<EvalRecord>& records) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write CSV file: " + path);
    out << kCsvHeader << "\n";
    for (const auto& r : records) {
        out << detail::fmt_double(r.sigma) << ',' << r.seed << ',' << r.scene_id << ','
            << r.hypothesis_rank << ',' << r.votes << ',' << detail::fmt_double(r.error.translation_err)
            << ',' << detail::fmt_double(r.error.translation_err_rel) << ','
            << detail::fmt_double(rad_to_deg(r.error.rotation_err)) << ',' << (r.best_by_votes ? 1 : 0)
            << "\n";
    }
    if (!out) throw io_error("failed writing CSV file: " + path);
}

// Self-contained multi-panel line chart: one panel per (metric, selection
// mode), one color-coded curve per noise level, threshold on x, precision on y.
inline void save_precision_svg(const std::string& path, const std::vector<PrecisionCurve>& curves) {
    static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    struct PanelKey {
        ErrorMetric metric;
        SelectionMode mode;
        bool operator<(const PanelKey& o) const {
            if (metric != o.metric) return metric < o.metric;
            return mode < o.mode;
        }
    };
    std::map<PanelKey, std::vector<const PrecisionCurve*>> panels;
    for (const auto& c : curves) panels[{c.metric, c.selection_mode}].push_back(&c);

    const int panel_w = 430, panel_h = 300, margin = 60, legend_w = 110;
    int cols = panels.size() > 1 ? 2 : 1;
    int rows = int((panels.size() + cols - 1) / size_t(cols));
    int width = cols * (panel_w + margin) + legend_w + margin;
    int height = std::max(1, rows) * (panel_h + margin) + margin;

    std::ofstream out(path);
    if (!out) throw io_error("cannot write SVG file: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    std::vector<double> sigma_order;
    int panel_index = 0;
    for (const auto& [key, list] : panels) {
        int px = margin + (panel_index % cols) * (panel_w + margin);
        int py = margin / 2 + (panel_index / cols) * (panel_h + margin);
        ++panel_index;

        double t_max = 1e-12;
        for (const auto* c : list)
            for (double t : c->thresholds) t_max = std::max(t_max, t);

        std::string title = std::string(key.metric == ErrorMetric::translation_rel
                                            ? "translation threshold (fraction of diameter)"
                                            : "rotation threshold (rad)") +
                            " - " + to_string(key.mode);
        out << "<text x=\"" << px + panel_w / 2 << "\" y=\"" << py - 8
            << "\" text-anchor=\"middle\" font-weight=\"bold\">" << title << "</text>\n";
        out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << panel_w << "\" height=\"" << panel_h
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int tick = 0; tick <= 5; ++tick) {
            double fx = px + panel_w * tick / 5.0;
            double fy = py + panel_h - panel_h * tick / 5.0;
            out << "<line x1=\"" << fx << "\" y1=\"" << py + panel_h << "\" x2=\"" << fx << "\" y2=\""
                << py + panel_h + 5 << "\" stroke=\"black\"/>\n";
            out << "<text x=\"" << fx << "\" y=\"" << py + panel_h + 18 << "\" text-anchor=\"middle\">"
                << detail::fmt_double(t_max * tick / 5.0) << "</text>\n";
            out << "<line x1=\"" << px - 5 << "\" y1=\"" << fy << "\" x2=\"" << px << "\" y2=\"" << fy
                << "\" stroke=\"black\"/>\n";
            out << "<text x=\"" << px - 8 << "\" y=\"" << fy + 4 << "\" text-anchor=\"end\">"
                << detail::fmt_double(tick / 5.0) << "</text>\n";
        }

        for (const auto* c : list) {
            size_t color_idx = 0;
            bool found = false;
            for (size_t s = 0; s < sigma_order.size(); ++s)
                if (sigma_order[s] == c->noise_sigma) { color_idx = s; found = true; break; }
            if (!found) {
                color_idx = sigma_order.size();
                sigma_order.push_back(c->noise_sigma);
            }
            out << "<polyline fill=\"none\" stroke=\"" << kPalette[color_idx % 8] << "\" stroke-width=\"1.5\" points=\"";
            for (size_t i = 0; i < c->thresholds.size(); ++i) {
                double fx = px + panel_w * (c->thresholds[i] / t_max);
                double fy = py + panel_h * (1.0 - c->precision[i]);
                out << detail::fmt_double(fx) << ',' << detail::fmt_double(fy) << ' ';
            }
            out << "\"/>\n";
        }
    }

    int lx = width - legend_w - margin / 2;
    out << "<text x=\"" << lx << "\" y=\"" << margin / 2 << "\" font-weight=\"bold\">noise sigma</text>\n";
    for (size_t s = 0; s < sigma_order.size(); ++s) {
        int ly = margin / 2 + 18 + int(s) * 18;
        out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly - 4
            << "\" stroke=\"" << kPalette[s % 8] << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << lx + 30 << "\" y=\"" << ly << "\">" << detail::fmt_double(sigma_order[s])
            << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw io_error("failed writing SVG file: " + path);
}

// Closed-loop noise sweep: synthesizes one bin per (sigma, seed), detects,
// evaluates, and builds the per-sigma precision curves for both selection
// modes and both error metrics. A non-empty out_dir also receives the CSV
// and SVG artifacts.
inline SweepResult noise_sweep(const TriangleMesh& mesh, const BinConfig& cfg, const CameraIntrinsics& cam,
                               const PPFModel& model, const DetectorParams& params,
                               const std::vector<double>& sigmas, const std::vector<uint64_t>& seeds,
                               const std::vector<double>& trans_thresholds,
                               const std::vector<double>& rot_thresholds,
                               const std::string& out_dir = {}) {
    SweepResult result;
    for (double sigma : sigmas) {
        std::vector<EvalRecord> sigma_records;
        for (uint64_t seed : seeds) {
            SceneDataset scene = synthesize_scene(mesh, cfg, cam, sigma, seed);
            std::string id = "bin_sigma" + std::to_string(sigma) + "_seed" + std::to_string(seed);
            auto recs = evaluate_scene(scene, model, params, id, sigma, seed);
            sigma_records.insert(sigma_records.end(), recs.begin(), recs.end());
        }
        if (!sigma_records.empty()) {
            for (auto mode : {SelectionMode::all_detections, SelectionMode::max_votes_only}) {
                result.curves.push_back(
                    precision_sweep(sigma_records, trans_thresholds, mode, ErrorMetric::translation_rel, sigma));
                result.curves.push_back(
                    precision_sweep(sigma_records, rot_thresholds, mode, ErrorMetric::rotation, sigma));
            }
        }
        result.records.insert(result.records.end(), sigma_records.begin(), sigma_records.end());
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        save_records_csv((std::filesystem::path(out_dir) / "eval.csv").string(), result.records);
        save_precision_svg((std::filesystem::path(out_dir) / "precision.svg").string(), result.curves);
    }
    return result;
}

} // namespace binpick
