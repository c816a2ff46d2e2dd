#pragma once

#include "binpick/detect.hpp"
#include "binpick/synth.hpp"

#include <optional>
#include <string>
#include <vector>

namespace binpick {

struct PoseError {
    double translation_err = 0;     // euclidean distance between translations
    double translation_err_rel = 0; // fraction of the object diameter
    double rotation_err = 0;        // angle-axis angle in [0, pi]
    int matched_gt_id = -1;
    bool ambiguous = false; // a second ground truth lies within 0.5*diameter
};

inline PoseError pose_error(const Pose& det, const Pose& gt, double diameter) {
    PoseError e;
    e.translation_err = (det.translation - gt.translation).norm();
    e.translation_err_rel = diameter > 0 ? e.translation_err / diameter : 0.0;
    // angle-axis angle of the aligning rotation, from the clamped trace
    Mat3 rel = det.rotation.transpose() * gt.rotation;
    e.rotation_err = std::acos(std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0));
    return e;
}

// Nearest ground truth by translation; ties fall to the smaller rotation error.
inline PoseError match_to_ground_truth(const Pose& det, const std::vector<GroundTruthEntry>& gts,
                                       double diameter) {
    if (gts.empty()) throw std::invalid_argument("match_to_ground_truth: empty ground truth");
    PoseError best;
    int near_misses = 0;
    for (const auto& gt : gts) {
        PoseError e = pose_error(det, gt.pose, diameter);
        e.matched_gt_id = gt.object_id;
        if (best.matched_gt_id < 0 || e.translation_err < best.translation_err ||
            (e.translation_err == best.translation_err && e.rotation_err < best.rotation_err))
            best = e;
        if (e.translation_err <= 0.5 * diameter) ++near_misses;
    }
    best.ambiguous = near_misses > 1;
    return best;
}

// One evaluated detection; mirrors the CSV schema.
struct EvalRecord {
    double sigma = 0;
    uint64_t seed = 0;
    std::string scene_id;
    int hypothesis_rank = 0;
    uint64_t votes = 0;
    bool best_by_votes = false;
    PoseError error;
};

enum class SelectionMode { all_detections, max_votes_only };
enum class ErrorMetric { translation_rel, rotation };

inline const char* to_string(SelectionMode m) {
    return m == SelectionMode::all_detections ? "all_detections" : "max_votes_only";
}

inline const char* to_string(ErrorMetric m) {
    return m == ErrorMetric::translation_rel ? "translation_rel" : "rotation";
}

struct PrecisionCurve {
    std::vector<double> thresholds;
    std::vector<double> precision;
    double noise_sigma = 0;
    SelectionMode selection_mode = SelectionMode::all_detections;
    ErrorMetric metric = ErrorMetric::translation_rel;
};

// Fraction of considered detections whose error is within each threshold.
// max_votes_only keeps one detection per scene: the best_by_votes one.
inline PrecisionCurve precision_sweep(const std::vector<EvalRecord>& records,
                                      const std::vector<double>& thresholds, SelectionMode mode,
                                      ErrorMetric metric, double noise_sigma = 0) {
    if (records.empty()) throw std::invalid_argument("precision_sweep: no detections");
    std::vector<double> errors;
    for (const auto& r : records) {
        if (mode == SelectionMode::max_votes_only && !r.best_by_votes) continue;
        errors.push_back(metric == ErrorMetric::translation_rel ? r.error.translation_err_rel
                                                                : r.error.rotation_err);
    }
    PrecisionCurve curve;
    curve.thresholds = thresholds;
    curve.noise_sigma = noise_sigma;
    curve.selection_mode = mode;
    curve.metric = metric;
    curve.precision.reserve(thresholds.size());
    for (double t : thresholds) {
        size_t hit = 0;
        for (double e : errors)
            if (e <= t) ++hit;
        curve.precision.push_back(errors.empty() ? 0.0 : double(hit) / double(errors.size()));
    }
    for (size_t i = 1; i < curve.precision.size(); ++i)
        if (curve.thresholds[i] >= curve.thresholds[i - 1] && curve.precision[i] + 1e-12 < curve.precision[i - 1])
            throw invariant_error("precision_sweep: non-monotone curve");
    return curve;
}

inline double curve_area(const PrecisionCurve& c) {
    double area = 0;
    for (size_t i = 1; i < c.thresholds.size(); ++i)
        area += 0.5 * (c.precision[i] + c.precision[i - 1]) * (c.thresholds[i] - c.thresholds[i - 1]);
    return area;
}

// Runs the full pipeline for one scene and evaluates every detection.
inline std::vector<EvalRecord> evaluate_scene(const SceneDataset& scene, const PPFModel& model,
                                              const DetectorParams& params, const std::string& scene_id,
                                              double sigma, uint64_t seed) {
    std::vector<EvalRecord> records;
    if (scene.ground_truth.empty()) return records;
    std::vector<Detection> detections = detect(scene.scene_cloud, model, params);
    for (const auto& det : detections) {
        EvalRecord r;
        r.sigma = sigma;
        r.seed = seed;
        r.scene_id = scene_id;
        r.hypothesis_rank = det.hypothesis_rank;
        r.votes = det.votes;
        r.best_by_votes = det.best_by_votes;
        r.error = match_to_ground_truth(det.pose, scene.ground_truth, model.diameter);
        records.push_back(std::move(r));
    }
    return records;
}

struct SweepResult {
    std::vector<EvalRecord> records;
    std::vector<PrecisionCurve> curves; // per sigma x mode x metric
};

} // namespace binpick
