#pragma once

#include "binpick/model_io.hpp"
#include "binpick/ppf.hpp"

#include <chrono>
#include <vector>

namespace binpick {

struct Hypothesis {
    Vec3 center = Vec3::Zero(); // the selected highest point
    PointCloud region;          // scene points within exclusion_radius of center
    int rank = 0;               // 1 = highest
};

struct HypothesisSelection {
    std::vector<Hypothesis> hypotheses;
    bool exhausted = false; // ran out of candidates before n_hypotheses
};

// Iterative highest-point selection with neighborhood exclusion. Heights are
// smoothed by a radius mean (2*tau); exclusion removes selection candidates
// but excluded points still belong to emitted regions.
inline HypothesisSelection select_hypotheses(const PointCloud& scene, const DetectorParams& params,
                                             const Vec3& up = Vec3(0, 0, -1), bool smoothing = true) {
    params.validate();
    if (scene.empty()) throw invariant_error("select_hypotheses: empty scene");

    const size_t n = scene.size();
    std::vector<double> height(n);
    for (size_t i = 0; i < n; ++i) height[i] = up.dot(scene.points[i].position);

    std::vector<double> smoothed = height;
    HashGrid grid(scene, std::max(params.tau, params.exclusion_radius / 64.0));
    if (smoothing) {
        double radius = 2.0 * params.tau;
        for (size_t i = 0; i < n; ++i) {
            auto nb = grid.radius_query(scene.points[i].position, radius);
            double sum = 0;
            for (int j : nb) sum += height[j];
            smoothed[i] = sum / double(nb.size()); // query includes the point itself
        }
    }

    HypothesisSelection out;
    std::vector<char> excluded(n, 0);
    for (int k = 0; k < params.n_hypotheses; ++k) {
        int best = -1;
        for (size_t i = 0; i < n; ++i) {
            if (excluded[i]) continue;
            if (best < 0 || smoothed[i] > smoothed[best]) best = int(i);
        }
        if (best < 0) {
            out.exhausted = true;
            break;
        }
        Hypothesis hyp;
        hyp.center = scene.points[best].position;
        hyp.rank = k + 1;
        auto members = grid.radius_query(hyp.center, params.exclusion_radius);
        hyp.region.sampling_resolution = scene.sampling_resolution;
        hyp.region.points.reserve(members.size());
        for (int m : members) {
            hyp.region.points.push_back(scene.points[m]);
            excluded[m] = 1;
        }
        out.hypotheses.push_back(std::move(hyp));
    }
    return out;
}

struct VotedPose {
    Pose pose;
    uint32_t votes = 0;
    int ref_index = 0; // reference point position in the region
    int order = 0;     // emission order, for deterministic tie-breaks
};

// Fills a (model point x alpha bin) accumulator for one reference point.
// Exposed so tests can recount it independently.
inline std::vector<uint32_t> accumulate_votes(const PointCloud& region, size_t ref_index,
                                              const PPFModel& model, int n_alpha_steps) {
    const size_t n_model = model.model_cloud.size();
    std::vector<uint32_t> acc(n_model * size_t(n_alpha_steps), 0);
    const OrientedPoint& ref = region.points[ref_index];
    const double d_max_sq = model.params.d_max * model.params.d_max;
    const double alpha_step = 2.0 * kPi / n_alpha_steps;
    for (size_t j = 0; j < region.size(); ++j) {
        if (j == ref_index) continue;
        const OrientedPoint& other = region.points[j];
        double d_sq = (other.position - ref.position).squaredNorm();
        if (d_sq > d_max_sq || d_sq == 0) continue;
        QuantizedKey key = quantize(compute_ppf(ref, other), model.params);
        double alpha_scene = local_alpha(ref, other);
        auto [begin, end] = model.lookup(key);
        for (const auto* e = begin; e != end; ++e) {
            double alpha = wrap_angle(e->alpha_model - alpha_scene);
            int bin = std::clamp(int((alpha + kPi) / alpha_step), 0, n_alpha_steps - 1);
            ++acc[size_t(e->point_index) * n_alpha_steps + bin];
        }
    }
    return acc;
}

// Point-pair voting over reference points picked by a deterministic stride
// through the voxel-sorted region (ref_seed != 0 switches to seeded random
// selection of the same count). Every accumulator cell within 90% of its
// per-reference peak is turned back into a pose hypothesis.
inline std::vector<VotedPose> vote(const PointCloud& region, const PPFModel& model,
                                   const DetectorParams& params, uint64_t ref_seed = 0) {
    std::vector<VotedPose> out;
    if (region.size() < 2) return out;
    const int stride = std::max(1, int(std::lround(1.0 / params.ref_fraction)));
    std::vector<size_t> refs;
    for (size_t i = 0; i < region.size(); i += size_t(stride)) refs.push_back(i);
    if (ref_seed != 0) {
        // seeded partial Fisher-Yates: same count, random choice of references
        std::vector<size_t> all(region.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        Rng rng(ref_seed);
        size_t want = refs.size();
        for (size_t i = 0; i < want; ++i) {
            size_t j = i + size_t(rng.next_u64() % (all.size() - i));
            std::swap(all[i], all[j]);
        }
        all.resize(want);
        std::sort(all.begin(), all.end());
        refs = std::move(all);
    }

    const int n_alpha = params.n_alpha_steps;
    const double alpha_step = 2.0 * kPi / n_alpha;
    std::vector<std::vector<VotedPose>> per_ref(refs.size());
    parallel_for(refs.size(), [&](size_t r) {
        size_t ref_index = refs[r];
        std::vector<uint32_t> acc = accumulate_votes(region, ref_index, model, n_alpha);
        uint32_t peak = 0;
        for (uint32_t c : acc) peak = std::max(peak, c);
        if (peak == 0) return;
        double threshold = 0.9 * double(peak);
        const OrientedPoint& ref = region.points[ref_index];
        for (size_t cell = 0; cell < acc.size(); ++cell) {
            if (double(acc[cell]) < threshold) continue;
            size_t m_i = cell / size_t(n_alpha);
            int bin = int(cell % size_t(n_alpha));
            double alpha = -kPi + (bin + 0.5) * alpha_step;
            VotedPose vp;
            vp.pose = reconstruct_pose(model.model_cloud.points[m_i], ref, alpha);
            vp.votes = acc[cell];
            vp.ref_index = int(ref_index);
            per_ref[r].push_back(vp);
        }
    });
    for (auto& chunk : per_ref)
        for (auto& vp : chunk) {
            vp.order = int(out.size());
            out.push_back(vp);
        }
    return out;
}

struct Detection {
    Pose pose;
    uint64_t votes = 0;
    int hypothesis_rank = 0;
    int cluster_size = 0;
    bool best_by_votes = false;
    double elapsed_ms = 0.0;
};

// Greedy vote-descending clustering; members join the first cluster whose
// seed is within both thresholds. Cluster poses are vote-weighted averages
// (quaternion mean with hemisphere alignment).
inline std::vector<Detection> cluster_poses(const std::vector<VotedPose>& raw, const DetectorParams& params) {
    std::vector<const VotedPose*> sorted;
    sorted.reserve(raw.size());
    for (const auto& vp : raw) sorted.push_back(&vp);
    std::sort(sorted.begin(), sorted.end(), [](const VotedPose* a, const VotedPose* b) {
        if (a->votes != b->votes) return a->votes > b->votes;
        return a->order < b->order;
    });

    struct Cluster {
        Pose seed;
        Eigen::Vector4d quat_sum = Eigen::Vector4d::Zero();
        Vec3 trans_sum = Vec3::Zero();
        double weight = 0;
        uint64_t votes = 0;
        int size = 0;
    };
    std::vector<Cluster> clusters;
    for (const VotedPose* vp : sorted) {
        Cluster* home = nullptr;
        for (auto& c : clusters) {
            if ((c.seed.translation - vp->pose.translation).norm() <= params.cluster_dist &&
                rotation_angle_between(c.seed.rotation, vp->pose.rotation) <= params.cluster_angle) {
                home = &c;
                break;
            }
        }
        if (!home) {
            clusters.push_back(Cluster{});
            home = &clusters.back();
            home->seed = vp->pose;
        }
        double w = double(vp->votes);
        Quat q(vp->pose.rotation);
        Eigen::Vector4d qv(q.w(), q.x(), q.y(), q.z());
        if (home->size > 0) {
            Quat seed_q(home->seed.rotation);
            Eigen::Vector4d sv(seed_q.w(), seed_q.x(), seed_q.y(), seed_q.z());
            if (sv.dot(qv) < 0) qv = -qv;
        }
        home->quat_sum += w * qv;
        home->trans_sum += w * vp->pose.translation;
        home->weight += w;
        home->votes += vp->votes;
        home->size += 1;
    }

    std::vector<Detection> out;
    out.reserve(clusters.size());
    for (const auto& c : clusters) {
        Detection det;
        Eigen::Vector4d qv = c.quat_sum;
        double norm = qv.norm();
        if (norm < 1e-12) {
            det.pose.rotation = c.seed.rotation;
        } else {
            qv /= norm;
            det.pose.rotation = Quat(qv[0], qv[1], qv[2], qv[3]).toRotationMatrix();
        }
        det.pose.translation = c.trans_sum / c.weight;
        det.votes = c.votes;
        det.cluster_size = c.size;
        out.push_back(det);
    }
    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.votes > b.votes; });
    return out;
}

// Full scene detection: subsample, pick hypothesis regions, vote and cluster
// each one, keep its top cluster. The highest-voted detection overall gets
// the best_by_votes marker.
inline std::vector<Detection> detect(const PointCloud& scene, const PPFModel& model,
                                     const DetectorParams& params, bool smoothing = true,
                                     const Vec3& up = Vec3(0, 0, -1), uint64_t ref_seed = 0) {
    params.validate();
    std::vector<Detection> out;
    if (scene.empty()) return out;
    PointCloud sub = scene.sampling_resolution == params.tau ? scene : voxel_subsample(scene, params.tau);
    if (sub.empty()) return out;

    HypothesisSelection selection = select_hypotheses(sub, params, up, smoothing);
    for (const Hypothesis& hyp : selection.hypotheses) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<VotedPose> raw = vote(hyp.region, model, params, ref_seed);
        std::vector<Detection> clusters = cluster_poses(raw, params);
        auto t1 = std::chrono::steady_clock::now();
        if (clusters.empty()) continue;
        Detection det = clusters.front();
        det.hypothesis_rank = hyp.rank;
        det.elapsed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        out.push_back(det);
    }
    if (!out.empty()) {
        size_t best = 0;
        for (size_t i = 1; i < out.size(); ++i)
            if (out[i].votes > out[best].votes) best = i;
        out[best].best_by_votes = true;
    }
    return out;
}

} // namespace binpick
