#include "binpick/detect.hpp"
#include "binpick/synth.hpp"

#include "test_shapes.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

using namespace binpick;
using namespace binpick::testshapes;

namespace {

struct BracketFixture {
    TriangleMesh mesh = stepped_bracket();
    double diameter = object_diameter(mesh);
    DetectorParams params = DetectorParams::defaults_for(diameter);
    PointCloud cloud;
    PPFModel model;

    BracketFixture() {
        cloud = mesh_to_cloud(mesh, params.tau);
        model = build_model(cloud, params, diameter);
    }
};

const BracketFixture& bracket() {
    static BracketFixture f;
    return f;
}

PointCloud sparse_points(const std::vector<Vec3>& positions, double tau) {
    PointCloud c;
    c.sampling_resolution = tau;
    for (const auto& p : positions) c.points.push_back({p, Vec3(0, 0, -1)});
    return c;
}

} // namespace

TEST(SelectHypotheses, OrderedBySmoothedHeight) {
    // camera looks down -z is "up": height = -z, so smaller z is higher
    DetectorParams p = DetectorParams::defaults_for(1.0);
    p.tau = 0.1;
    p.exclusion_radius = 1.0;
    p.n_hypotheses = 2;
    PointCloud scene = sparse_points({{0, 0, -5}, {10, 0, -3}, {20, 0, -1}}, p.tau);
    auto sel = select_hypotheses(scene, p);
    ASSERT_EQ(sel.hypotheses.size(), 2u);
    EXPECT_LT((sel.hypotheses[0].center - Vec3(0, 0, -5)).norm(), 1e-12);
    EXPECT_LT((sel.hypotheses[1].center - Vec3(10, 0, -3)).norm(), 1e-12);
    EXPECT_TRUE(sel.exhausted == false);
}

TEST(SelectHypotheses, ExclusionSkipsNeighborhood) {
    DetectorParams p = DetectorParams::defaults_for(1.0);
    p.tau = 0.02;
    p.exclusion_radius = 1.0;
    p.n_hypotheses = 2;
    PointCloud scene = sparse_points({{0, 0, -5.0}, {0.1, 0, -4.9}, {5, 0, -1.0}}, p.tau);
    auto sel = select_hypotheses(scene, p, Vec3(0, 0, -1), /*smoothing=*/false);
    ASSERT_EQ(sel.hypotheses.size(), 2u);
    EXPECT_LT((sel.hypotheses[0].center - Vec3(0, 0, -5)).norm(), 1e-12);
    // the 0.1-away point is excluded; the far lower point is chosen instead
    EXPECT_LT((sel.hypotheses[1].center - Vec3(5, 0, -1)).norm(), 1e-12);
    // excluded points still belong to the first region
    EXPECT_EQ(sel.hypotheses[0].region.size(), 2u);
}

TEST(SelectHypotheses, FewerCandidatesFlagged) {
    DetectorParams p = DetectorParams::defaults_for(1.0);
    p.tau = 0.1;
    p.exclusion_radius = 100.0; // one pick excludes everything
    p.n_hypotheses = 5;
    PointCloud scene = sparse_points({{0, 0, -5}, {10, 0, -3}, {20, 0, -1}}, p.tau);
    auto sel = select_hypotheses(scene, p);
    EXPECT_EQ(sel.hypotheses.size(), 1u);
    EXPECT_TRUE(sel.exhausted);
}

TEST(SelectHypotheses, BinSceneCentersSpaced) {
    const auto& fx = bracket();
    BinConfig cfg;
    cfg.n_layers = 1;
    CameraIntrinsics cam = default_camera_for_bin(cfg, 512, 352);
    SceneDataset scene = synthesize_scene(fx.mesh, cfg, cam, 0.0, 77);
    PointCloud sub = voxel_subsample(scene.scene_cloud, fx.params.tau);
    auto sel = select_hypotheses(sub, fx.params);
    ASSERT_EQ(sel.hypotheses.size(), size_t(fx.params.n_hypotheses));
    for (size_t i = 0; i < sel.hypotheses.size(); ++i)
        for (size_t j = i + 1; j < sel.hypotheses.size(); ++j)
            EXPECT_GE((sel.hypotheses[i].center - sel.hypotheses[j].center).norm(),
                      fx.params.exclusion_radius);
    for (const auto& hyp : sel.hypotheses)
        for (const auto& pt : hyp.region.points)
            EXPECT_LE((pt.position - hyp.center).norm(), fx.params.exclusion_radius + 1e-9);
}

TEST(Vote, SelfMatchIdentity) {
    const auto& fx = bracket();
    auto raw = vote(fx.cloud, fx.model, fx.params);
    ASSERT_FALSE(raw.empty());
    auto clusters = cluster_poses(raw, fx.params);
    const Detection& top = clusters.front();
    EXPECT_LE(top.pose.translation.norm(), 0.05 * fx.diameter);
    EXPECT_LE(rotation_angle_between(top.pose.rotation, Mat3::Identity()), deg_to_rad(12.0));
}

TEST(Vote, SelfMatchUnderTransform) {
    const auto& fx = bracket();
    Rng rng(55);
    for (int t = 0; t < 5; ++t) {
        Pose g = random_pose(rng, {-3, -3, -3}, {3, 3, 3});
        auto raw = vote(transform_cloud(fx.cloud, g), fx.model, fx.params);
        auto clusters = cluster_poses(raw, fx.params);
        ASSERT_FALSE(clusters.empty());
        const Detection& top = clusters.front();
        EXPECT_LE((top.pose.translation - g.translation).norm(), 0.05 * fx.diameter);
        EXPECT_LE(rotation_angle_between(top.pose.rotation, g.rotation), deg_to_rad(12.0));
    }
}

TEST(Vote, FloorPlaneScoresBelowSelfMatch) {
    const auto& fx = bracket();
    auto raw_self = vote(fx.cloud, fx.model, fx.params);
    uint32_t self_max = 0;
    for (const auto& vp : raw_self) self_max = std::max(self_max, vp.votes);

    PointCloud floor;
    floor.sampling_resolution = fx.params.tau;
    for (double x = 0; x <= fx.diameter; x += fx.params.tau)
        for (double y = 0; y <= fx.diameter; y += fx.params.tau)
            floor.points.push_back({{x, y, 0.0}, {0, 0, 1}});
    auto raw_floor = vote(floor, fx.model, fx.params);
    uint32_t floor_max = 0;
    for (const auto& vp : raw_floor) floor_max = std::max(floor_max, vp.votes);

    EXPECT_LT(floor_max, self_max);
}

TEST(Vote, EmptyRegion) {
    const auto& fx = bracket();
    PointCloud empty;
    EXPECT_TRUE(vote(empty, fx.model, fx.params).empty());
}

TEST(Vote, AccumulatorMatchesBruteForceRevote) {
    const auto& fx = bracket();
    // small region: a transformed slice of the model cloud
    Rng rng(66);
    Pose g = random_pose(rng, {-1, -1, -1}, {1, 1, 1});
    PointCloud region;
    region.sampling_resolution = fx.params.tau;
    for (size_t i = 0; i < fx.cloud.size() && region.size() < 200; i += 3)
        region.points.push_back({g.apply(fx.cloud.points[i].position),
                                 g.apply_vector(fx.cloud.points[i].normal)});

    const size_t ref = 17;
    std::vector<uint32_t> acc = accumulate_votes(region, ref, fx.model, fx.params.n_alpha_steps);

    // independent recount: scan all model ordered pairs, match quantized keys
    const size_t n_model = fx.model.model_cloud.size();
    std::vector<uint32_t> oracle(n_model * size_t(fx.params.n_alpha_steps), 0);
    const double alpha_step = 2.0 * kPi / fx.params.n_alpha_steps;
    for (size_t o = 0; o < region.size(); ++o) {
        if (o == ref) continue;
        double d = (region.points[o].position - region.points[ref].position).norm();
        if (d <= 0 || d > fx.model.params.d_max) continue;
        QuantizedKey scene_key = quantize(compute_ppf(region.points[ref], region.points[o]), fx.model.params);
        double alpha_scene = local_alpha(region.points[ref], region.points[o]);
        for (size_t i = 0; i < n_model; ++i) {
            for (size_t j = 0; j < n_model; ++j) {
                if (i == j) continue;
                double dm =
                    (fx.model.model_cloud.points[i].position - fx.model.model_cloud.points[j].position).norm();
                if (dm <= 0 || dm > fx.model.params.d_max) continue;
                QuantizedKey model_key =
                    quantize(compute_ppf(fx.model.model_cloud.points[i], fx.model.model_cloud.points[j]),
                             fx.model.params);
                if (!(model_key == scene_key)) continue;
                double alpha = wrap_angle(
                    local_alpha(fx.model.model_cloud.points[i], fx.model.model_cloud.points[j]) - alpha_scene);
                int bin = std::clamp(int((alpha + kPi) / alpha_step), 0, fx.params.n_alpha_steps - 1);
                ++oracle[i * size_t(fx.params.n_alpha_steps) + bin];
            }
        }
    }
    ASSERT_EQ(acc.size(), oracle.size());
    EXPECT_EQ(acc, oracle);
}

TEST(Vote, RemovingPointsNeverIncreasesCells) {
    const auto& fx = bracket();
    PointCloud region;
    region.sampling_resolution = fx.params.tau;
    for (size_t i = 0; i < fx.cloud.size() && region.size() < 120; i += 4)
        region.points.push_back(fx.cloud.points[i]);
    PointCloud subset = region;
    subset.points.resize(80);

    std::vector<uint32_t> full = accumulate_votes(region, 0, fx.model, fx.params.n_alpha_steps);
    std::vector<uint32_t> part = accumulate_votes(subset, 0, fx.model, fx.params.n_alpha_steps);
    for (size_t c = 0; c < full.size(); ++c) EXPECT_LE(part[c], full[c]);
}

TEST(ClusterPoses, IdenticalPosesMerge) {
    DetectorParams p = DetectorParams::defaults_for(5.0);
    Pose pose;
    pose.translation = Vec3(1, 2, 3);
    std::vector<VotedPose> raw = {{pose, 3, 0, 0}, {pose, 2, 1, 1}};
    auto out = cluster_poses(raw, p);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].votes, 5u);
    EXPECT_EQ(out[0].cluster_size, 2);
    EXPECT_LT((out[0].pose.translation - pose.translation).norm(), 1e-12);
    EXPECT_LT(rotation_angle_between(out[0].pose.rotation, pose.rotation), 1e-12);
}

TEST(ClusterPoses, FarRotationsStaySeparate) {
    DetectorParams p = DetectorParams::defaults_for(5.0);
    Pose a, b;
    b.rotation = rotation_about_axis(Vec3(0, 0, 1), kPi / 2);
    std::vector<VotedPose> raw = {{a, 3, 0, 0}, {b, 2, 1, 1}};
    auto out = cluster_poses(raw, p);
    EXPECT_EQ(out.size(), 2u);
}

TEST(ClusterPoses, QuaternionMeanHalvesRotation) {
    DetectorParams p = DetectorParams::defaults_for(5.0);
    Pose a, b;
    b.rotation = rotation_about_axis(Vec3(0, 0, 1), deg_to_rad(10.0));
    std::vector<VotedPose> raw = {{a, 5, 0, 0}, {b, 5, 1, 1}};
    auto out = cluster_poses(raw, p);
    ASSERT_EQ(out.size(), 1u);
    Mat3 expected = rotation_about_axis(Vec3(0, 0, 1), deg_to_rad(5.0));
    EXPECT_LE(rad_to_deg(rotation_angle_between(out[0].pose.rotation, expected)), 0.1);
}

TEST(ClusterPoses, VoteTotalsConserved) {
    const auto& fx = bracket();
    auto raw = vote(fx.cloud, fx.model, fx.params);
    auto out = cluster_poses(raw, fx.params);
    uint64_t raw_total = 0, cluster_total = 0;
    size_t member_total = 0;
    for (const auto& vp : raw) raw_total += vp.votes;
    for (const auto& d : out) {
        cluster_total += d.votes;
        member_total += size_t(d.cluster_size);
    }
    EXPECT_EQ(raw_total, cluster_total);
    EXPECT_EQ(member_total, raw.size());
    for (size_t i = 1; i < out.size(); ++i) EXPECT_LE(out[i].votes, out[i - 1].votes);
}

TEST(ClusterPoses, EmptyInput) {
    EXPECT_TRUE(cluster_poses({}, DetectorParams::defaults_for(1.0)).empty());
}

// One object resting on the bin floor, zero noise, full synth round trip.
TEST(Detect, SingleObjectSceneEndToEnd) {
    const auto& fx = bracket();
    BinConfig cfg;
    cfg.grid_nx = 1;
    cfg.grid_ny = 1;
    cfg.n_layers = 1;
    cfg.bin_w = 12;
    cfg.bin_h = 12;
    CameraIntrinsics cam = default_camera_for_bin(cfg, 481, 361);
    SceneDataset scene = synthesize_scene(fx.mesh, cfg, cam, 0.0, 77);
    ASSERT_EQ(scene.ground_truth.size(), 1u);
    const Pose& g = scene.ground_truth[0].pose;

    auto dets = detect(scene.scene_cloud, fx.model, fx.params);
    ASSERT_FALSE(dets.empty());
    const Detection* best = nullptr;
    for (const auto& d : dets)
        if (d.best_by_votes) best = &d;
    ASSERT_NE(best, nullptr);
    EXPECT_LE((best->pose.translation - g.translation).norm(), 0.1 * fx.diameter);
    EXPECT_LE(rotation_angle_between(best->pose.rotation, g.rotation), deg_to_rad(12.0));
    EXPECT_GE(best->elapsed_ms, 0.0);
}

TEST(Detect, EmptyScene) {
    const auto& fx = bracket();
    PointCloud empty;
    EXPECT_TRUE(detect(empty, fx.model, fx.params).empty());
}

TEST(Detect, DeterministicAcrossRunsAndThreadCounts) {
    const auto& fx = bracket();
    BinConfig cfg;
    cfg.n_layers = 1;
    CameraIntrinsics cam = default_camera_for_bin(cfg, 512, 352);
    SceneDataset scene = synthesize_scene(fx.mesh, cfg, cam, 0.01 * fx.diameter, 99);

    auto run = [&] { return detect(scene.scene_cloud, fx.model, fx.params); };
    setenv("BINPICK_THREADS", "1", 1);
    auto serial = run();
    setenv("BINPICK_THREADS", "8", 1);
    auto threaded = run();
    auto threaded2 = run();
    unsetenv("BINPICK_THREADS");

    ASSERT_EQ(serial.size(), threaded.size());
    ASSERT_EQ(serial.size(), threaded2.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].votes, threaded[i].votes);
        EXPECT_EQ(serial[i].hypothesis_rank, threaded[i].hypothesis_rank);
        EXPECT_EQ(serial[i].cluster_size, threaded[i].cluster_size);
        EXPECT_EQ(serial[i].best_by_votes, threaded[i].best_by_votes);
        EXPECT_EQ(serial[i].pose.translation, threaded[i].pose.translation);
        EXPECT_EQ(serial[i].pose.rotation, threaded[i].pose.rotation);
        EXPECT_EQ(threaded[i].pose.translation, threaded2[i].pose.translation);
    }
}

// Detection commutes with scene motions that keep the height ordering: a
// rotation about the camera axis plus a translation.
TEST(Detect, EquivariantUnderAxisRotation) {
    const auto& fx = bracket();
    CameraIntrinsics cam;
    cam.width = 640;
    cam.height = 480;
    cam.f = 600;
    cam.d_near = 10;
    cam.d_far = 120;
    Rng rng(88);
    Pose pose = random_pose(rng, {-3, -2, 50}, {3, 2, 60});
    auto rr = render_depth(fx.mesh, {pose}, cam);
    PointCloud scene = voxel_subsample(unproject(rr.depth), fx.params.tau);

    Pose g;
    g.rotation = rotation_about_axis(Vec3(0, 0, 1), deg_to_rad(30.0));
    g.translation = Vec3(1.5, -2.0, 0.0);

    auto base = detect(scene, fx.model, fx.params);
    auto moved = detect(transform_cloud(scene, g), fx.model, fx.params);
    ASSERT_FALSE(base.empty());
    ASSERT_FALSE(moved.empty());
    Pose expected = g.compose(base.front().pose);
    EXPECT_LE((moved.front().pose.translation - expected.translation).norm(), 0.05 * fx.diameter);
    EXPECT_LE(rotation_angle_between(moved.front().pose.rotation, expected.rotation), deg_to_rad(12.0));
}

TEST(Vote, RandomizedReferenceModeWorksAndIsSeeded) {
    const auto& fx = bracket();
    auto a = vote(fx.cloud, fx.model, fx.params, 12345);
    auto b = vote(fx.cloud, fx.model, fx.params, 12345);
    auto c = vote(fx.cloud, fx.model, fx.params, 54321);
    ASSERT_FALSE(a.empty());
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].votes, b[i].votes);
        EXPECT_EQ(a[i].ref_index, b[i].ref_index);
    }
    // different seed picks (at least partially) different reference points
    std::set<int> refs_a, refs_c;
    for (const auto& vp : a) refs_a.insert(vp.ref_index);
    for (const auto& vp : c) refs_c.insert(vp.ref_index);
    EXPECT_NE(refs_a, refs_c);
    // still finds the object at identity
    auto clusters = cluster_poses(a, fx.params);
    EXPECT_LE(clusters.front().pose.translation.norm(), 0.05 * fx.diameter);
}

TEST(Detect, RefFractionControlsWork) {
    const auto& fx = bracket();
    DetectorParams fast = fx.params;
    fast.ref_fraction = 0.02;
    auto raw_dense = vote(fx.cloud, fx.model, fx.params);
    auto raw_fast = vote(fx.cloud, fx.model, fast);
    // stride 5 vs stride 50: ten times fewer reference points
    std::set<int> dense_refs, fast_refs;
    for (const auto& vp : raw_dense) dense_refs.insert(vp.ref_index);
    for (const auto& vp : raw_fast) fast_refs.insert(vp.ref_index);
    EXPECT_GT(dense_refs.size(), 5 * fast_refs.size());
}
