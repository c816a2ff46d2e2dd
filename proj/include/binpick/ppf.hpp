#pragma once

#include "binpick/parallel.hpp"
#include "binpick/point_cloud.hpp"

#include <cstdint>
#include <vector>

namespace binpick {

// Four-component point pair feature: pair distance, the two normal-to-
// difference angles and the normal-to-normal angle (radians in [0, pi]).
struct PPF {
    double dist = 0;
    double angle_n1_d = 0;
    double angle_n2_d = 0;
    double angle_n1_n2 = 0;
};

inline PPF compute_ppf(const OrientedPoint& p1, const OrientedPoint& p2) {
    Vec3 d = p2.position - p1.position;
    double dist = d.norm();
    if (dist <= 0) throw invariant_error("compute_ppf: coincident points");
    PPF f;
    f.dist = dist;
    f.angle_n1_d = vector_angle(p1.normal, d);
    f.angle_n2_d = vector_angle(p2.normal, d);
    f.angle_n1_n2 = vector_angle(p1.normal, p2.normal);
    return f;
}

struct QuantizedKey {
    uint32_t d_bin = 0;
    uint32_t a1_bin = 0;
    uint32_t a2_bin = 0;
    uint32_t a3_bin = 0;

    bool operator==(const QuantizedKey&) const = default;
};

// Detection-side parameters. Quantization fields must match the model that
// detection runs against; the rest are free at detection time.
struct DetectorParams {
    int n_angle_steps = 30;
    int n_dist_steps = 20;
    int n_alpha_steps = 30; // accumulator angle axis
    double d_max = 0;       // maximum pair distance (object diameter)
    double tau = 0;         // subsample resolution
    double ref_fraction = 0.20;
    double cluster_dist = 0.75;
    double cluster_angle = deg_to_rad(20.0);
    int n_hypotheses = 5;
    double exclusion_radius = 0;

    static DetectorParams defaults_for(double diameter) {
        DetectorParams p;
        p.d_max = diameter;
        p.tau = 0.05 * diameter;
        p.exclusion_radius = 1.1 * diameter;
        return p;
    }

    void validate() const {
        if (n_angle_steps < 1 || n_angle_steps > 255 || n_dist_steps < 1 || n_dist_steps > 255)
            throw std::invalid_argument("DetectorParams: step counts must be in [1,255]");
        if (n_alpha_steps < 1) throw std::invalid_argument("DetectorParams: n_alpha_steps must be >= 1");
        if (d_max <= 0 || tau <= 0) throw std::invalid_argument("DetectorParams: d_max and tau must be positive");
        if (!(ref_fraction > 0 && ref_fraction <= 1))
            throw std::invalid_argument("DetectorParams: ref_fraction must be in (0,1]");
        if (cluster_dist <= 0 || cluster_angle <= 0)
            throw std::invalid_argument("DetectorParams: cluster thresholds must be positive");
        if (n_hypotheses < 1 || exclusion_radius <= 0)
            throw std::invalid_argument("DetectorParams: hypothesis settings must be positive");
    }
};

// Floor quantization with a top-edge clamp; pairs beyond d_max are the
// caller's job to skip.
inline QuantizedKey quantize(const PPF& f, const DetectorParams& params) {
    const double d_step = params.d_max / params.n_dist_steps;
    const double a_step = kPi / params.n_angle_steps;
    auto bin = [](double value, double step, int count) {
        int b = int(std::floor(value / step));
        return uint32_t(std::clamp(b, 0, count - 1));
    };
    return QuantizedKey{bin(f.dist, d_step, params.n_dist_steps),
                        bin(f.angle_n1_d, a_step, params.n_angle_steps),
                        bin(f.angle_n2_d, a_step, params.n_angle_steps),
                        bin(f.angle_n1_n2, a_step, params.n_angle_steps)};
}

// 8 bits per field, as stored in model files.
inline uint32_t pack_key(const QuantizedKey& k) {
    return (k.d_bin << 24) | (k.a1_bin << 16) | (k.a2_bin << 8) | k.a3_bin;
}

inline QuantizedKey unpack_key(uint32_t packed) {
    return QuantizedKey{(packed >> 24) & 0xff, (packed >> 16) & 0xff, (packed >> 8) & 0xff, packed & 0xff};
}

namespace detail {

// Rotation taking n to +x; Eigen picks a deterministic orthogonal axis in the
// antipodal case.
inline Mat3 align_normal_to_x(const Vec3& n) {
    return Quat::FromTwoVectors(n, Vec3::UnitX()).toRotationMatrix();
}

} // namespace detail

// Planar angle of the local-coordinate parametrization: after moving the
// reference to the origin with its normal on +x, the rotation about +x that
// brings the other point into the y >= 0 half-plane. Range (-pi, pi].
inline double local_alpha(const OrientedPoint& reference, const OrientedPoint& other) {
    Mat3 r = detail::align_normal_to_x(reference.normal);
    Vec3 v = r * (other.position - reference.position);
    if (v.y() * v.y() + v.z() * v.z() < 1e-24) return 0.0; // on the normal axis
    return std::atan2(-v.z(), v.y());
}

// Rigid transform aligning a model point (position+normal) to a scene point,
// composed with a rotation by alpha about the aligned normal axis.
inline Pose reconstruct_pose(const OrientedPoint& model_point, const OrientedPoint& scene_point, double alpha) {
    Mat3 r_model = detail::align_normal_to_x(model_point.normal);
    Mat3 r_scene = detail::align_normal_to_x(scene_point.normal);
    Mat3 rotation = r_scene.transpose() * rotation_about_x(alpha) * r_model;
    return Pose{rotation, scene_point.position - rotation * model_point.position};
}

// Trained object representation: quantized feature table over all ordered
// point pairs of the subsampled model cloud.
struct PPFModel {
    struct Entry {
        uint32_t point_index = 0;
        double alpha_model = 0;
    };

    PointCloud model_cloud;
    double diameter = 0;
    DetectorParams params;

    // CSR layout over the dense key space d*A^3 + a1*A^2 + a2*A + a3.
    std::vector<uint32_t> cell_begin; // size n_dist*A^3 + 1
    std::vector<Entry> entries;

    size_t flat_index(const QuantizedKey& k) const {
        const size_t a = size_t(params.n_angle_steps);
        return ((size_t(k.d_bin) * a + k.a1_bin) * a + k.a2_bin) * a + k.a3_bin;
    }

    std::pair<const Entry*, const Entry*> lookup(const QuantizedKey& k) const {
        size_t i = flat_index(k);
        return {entries.data() + cell_begin[i], entries.data() + cell_begin[i + 1]};
    }

    size_t total_entries() const { return entries.size(); }

    size_t key_count() const {
        size_t n = 0;
        for (size_t i = 0; i + 1 < cell_begin.size(); ++i)
            if (cell_begin[i + 1] > cell_begin[i]) ++n;
        return n;
    }
};

// Builds the model table from every ordered pair within d_max. Entry lists
// are i-major, matching a serial double loop, regardless of worker count.
// `diameter` is the source object diameter; 0 falls back to the cloud extent.
inline PPFModel build_model(const PointCloud& cloud, const DetectorParams& params, double diameter = 0.0) {
    params.validate();
    const size_t n = cloud.size();
    if (n < 2) throw std::invalid_argument("build_model: need at least 2 points");

    PPFModel model;
    model.model_cloud = cloud;
    model.params = params;
    model.diameter = diameter;
    if (model.diameter <= 0) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j)
                model.diameter =
                    std::max(model.diameter, (cloud.points[i].position - cloud.points[j].position).norm());
    }

    struct Record {
        uint32_t flat;
        uint32_t point_index;
        double alpha;
    };
    std::vector<std::vector<Record>> per_ref(n);
    const double d_max_sq = params.d_max * params.d_max;
    parallel_for(n, [&](size_t i) {
        auto& out = per_ref[i];
        const OrientedPoint& ref = cloud.points[i];
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d_sq = (cloud.points[j].position - ref.position).squaredNorm();
            if (d_sq > d_max_sq || d_sq == 0) continue;
            QuantizedKey key = quantize(compute_ppf(ref, cloud.points[j]), params);
            Record rec;
            rec.flat = uint32_t(model.flat_index(key));
            rec.point_index = uint32_t(i);
            rec.alpha = local_alpha(ref, cloud.points[j]);
            out.push_back(rec);
        }
    });

    const size_t a = size_t(params.n_angle_steps);
    const size_t n_cells = size_t(params.n_dist_steps) * a * a * a;
    std::vector<uint32_t> counts(n_cells, 0);
    size_t total = 0;
    for (const auto& recs : per_ref) {
        total += recs.size();
        for (const auto& r : recs) ++counts[r.flat];
    }

    model.cell_begin.assign(n_cells + 1, 0);
    for (size_t i = 0; i < n_cells; ++i) model.cell_begin[i + 1] = model.cell_begin[i] + counts[i];
    model.entries.resize(total);
    std::vector<uint32_t> cursor(model.cell_begin.begin(), model.cell_begin.end() - 1);
    for (const auto& recs : per_ref)
        for (const auto& r : recs)
            model.entries[cursor[r.flat]++] = PPFModel::Entry{r.point_index, r.alpha};
    return model;
}

} // namespace binpick
