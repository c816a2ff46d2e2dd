#pragma once

#include "binpick/camera.hpp"
#include "binpick/point_cloud.hpp"
#include "binpick/render.hpp"
#include "binpick/rng.hpp"

#include <optional>
#include <vector>

namespace binpick {

// Bin frame: floor at z = 0, inner footprint [0,bin_w] x [0,bin_h], walls up
// to z = bin_d. The camera hangs camera_height above the floor, looking down.
struct BinConfig {
    double bin_w = 60.0;
    double bin_h = 40.0;
    double bin_d = 30.0;
    double drop_height = 60.0;
    double camera_height = 100.0;
    int grid_nx = 5;
    int grid_ny = 7;
    int n_layers = 10;

    void validate() const {
        if (bin_w <= 0 || bin_h <= 0 || bin_d <= 0 || drop_height <= 0 || camera_height <= 0)
            throw std::invalid_argument("BinConfig: dimensions must be positive");
        if (grid_nx < 1 || grid_ny < 1 || n_layers < 0)
            throw std::invalid_argument("BinConfig: grid must be >= 1x1");
    }
};

struct PlacementResult {
    std::vector<Pose> poses; // bin frame
    int truncated = 0;       // settles above drop_height, skipped
};

// Simplified drop model: per layer and grid cell, a uniformly random
// orientation is lowered along -z until the lowest transformed vertex rests
// on the running heightmap, then the vertices are splatted back into it.
// Deterministic for a fixed seed.
inline PlacementResult place_objects(const TriangleMesh& mesh, const BinConfig& cfg, uint64_t seed,
                                     double heightmap_cell = 0.0, bool identity_orientation = false) {
    cfg.validate();
    if (mesh.vertices.size() < 2) throw std::invalid_argument("place_objects: mesh too small");
    const double diameter = object_diameter(mesh);
    const double cell_w = cfg.bin_w / cfg.grid_nx;
    const double cell_h = cfg.bin_h / cfg.grid_ny;
    if (diameter > std::min(cell_w, cell_h) * 1.5)
        throw std::invalid_argument("place_objects: object too large for grid cell");
    if (heightmap_cell <= 0) heightmap_cell = std::max(1e-6, 0.05 * diameter);

    const int hx = std::max(1, int(std::ceil(cfg.bin_w / heightmap_cell)));
    const int hy = std::max(1, int(std::ceil(cfg.bin_h / heightmap_cell)));
    std::vector<double> heightmap(size_t(hx) * size_t(hy), 0.0);
    auto cell_of = [&](double x, double y) -> std::optional<size_t> {
        if (x < 0 || y < 0 || x > cfg.bin_w || y > cfg.bin_h) return std::nullopt;
        int ix = std::min(hx - 1, int(x / heightmap_cell));
        int iy = std::min(hy - 1, int(y / heightmap_cell));
        return size_t(iy) * hx + ix;
    };

    Vec3 centroid = Vec3::Zero();
    for (const auto& v : mesh.vertices) centroid += v;
    centroid /= double(mesh.vertices.size());

    Rng rng(seed);
    PlacementResult result;
    std::vector<Vec3> rotated(mesh.vertices.size());
    for (int layer = 0; layer < cfg.n_layers; ++layer) {
        for (int gy = 0; gy < cfg.grid_ny; ++gy) {
            for (int gx = 0; gx < cfg.grid_nx; ++gx) {
                Mat3 rot = identity_orientation ? Mat3::Identity()
                                                : rng.uniform_quaternion().toRotationMatrix();
                double jitter = 0.2 * std::max(0.0, std::min(cell_w, cell_h) - diameter);
                double cx = (gx + 0.5) * cell_w + rng.uniform(-jitter, jitter);
                double cy = (gy + 0.5) * cell_h + rng.uniform(-jitter, jitter);
                // Keep the whole footprint inside the bin so walls never engage.
                cx = std::clamp(cx, std::min(diameter * 0.5, cfg.bin_w * 0.5), std::max(cfg.bin_w - diameter * 0.5, cfg.bin_w * 0.5));
                cy = std::clamp(cy, std::min(diameter * 0.5, cfg.bin_h * 0.5), std::max(cfg.bin_h - diameter * 0.5, cfg.bin_h * 0.5));

                for (size_t i = 0; i < mesh.vertices.size(); ++i)
                    rotated[i] = rot * (mesh.vertices[i] - centroid) + Vec3(cx, cy, 0.0);

                double drop_z = -1e300;
                for (const auto& v : rotated) {
                    auto c = cell_of(v.x(), v.y());
                    double ground = c ? heightmap[*c] : 1e300; // outside bin: wall
                    drop_z = std::max(drop_z, ground - v.z());
                }

                double top = -1e300;
                for (const auto& v : rotated) top = std::max(top, v.z() + drop_z);
                if (top > cfg.drop_height) {
                    ++result.truncated;
                    continue;
                }

                Pose pose;
                pose.rotation = rot;
                pose.translation = Vec3(cx, cy, drop_z) - rot * centroid;
                result.poses.push_back(pose);

                for (const auto& v : rotated) {
                    auto c = cell_of(v.x(), v.y());
                    if (c) heightmap[*c] = std::max(heightmap[*c], v.z() + drop_z);
                }
            }
        }
    }
    return result;
}

// Extrinsic: bin frame -> camera frame. Camera sits above the bin center and
// looks straight down; image v grows along -y of the bin.
inline Pose camera_from_bin(const BinConfig& cfg) {
    Pose p;
    p.rotation << 1, 0, 0,
                  0, -1, 0,
                  0, 0, -1;
    Vec3 cam_origin(cfg.bin_w * 0.5, cfg.bin_h * 0.5, cfg.camera_height);
    p.translation = -(p.rotation * cam_origin);
    return p;
}

// Default intrinsics: the bin spans 90% of the limiting image dimension at
// floor depth; clip planes bracket the whole working volume.
inline CameraIntrinsics default_camera_for_bin(const BinConfig& cfg, int width, int height) {
    CameraIntrinsics cam;
    cam.width = width;
    cam.height = height;
    cam.f = 0.9 * std::min(width / cfg.bin_w, height / cfg.bin_h) * cfg.camera_height;
    cam.d_near = 0.05 * cfg.camera_height;
    cam.d_far = 1.2 * cfg.camera_height;
    cam.validate();
    return cam;
}

// Inverse projective mapping: every valid pixel becomes a 3-D point; normals
// come from central differences over the unprojected neighbor grid and are
// oriented toward the camera. Border pixels and pixels with an invalid
// 4-neighborhood yield no point.
inline PointCloud unproject(const DepthImage& depth) {
    const CameraIntrinsics& cam = depth.intrinsics;
    const int w = cam.width, h = cam.height;
    std::vector<Vec3> grid(size_t(w) * size_t(h));
    std::vector<char> ok(size_t(w) * size_t(h), 0);
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            if (!depth.valid(col, row)) continue;
            double z = depth.metric_z(col, row);
            grid[size_t(row) * w + col] = Vec3(z * cam.pixel_u(col) / cam.f, z * cam.pixel_v(row) / cam.f, z);
            ok[size_t(row) * w + col] = 1;
        }
    }
    PointCloud cloud;
    for (int row = 1; row + 1 < h; ++row) {
        for (int col = 1; col + 1 < w; ++col) {
            size_t i = size_t(row) * w + col;
            if (!ok[i] || !ok[i - 1] || !ok[i + 1] || !ok[i - w] || !ok[i + w]) continue;
            Vec3 du = grid[i + 1] - grid[i - 1];
            Vec3 dv = grid[i + w] - grid[i - w];
            Vec3 n = du.cross(dv);
            double norm = n.norm();
            if (norm < 1e-15) continue;
            n /= norm;
            if (n.dot(grid[i]) > 0) n = -n; // face the camera at the origin
            cloud.points.push_back({grid[i], n});
        }
    }
    return cloud;
}

// Gaussian perturbation of the metric depth along each camera ray,
// re-encoded and clamped; empty pixels untouched. Deterministic per seed.
inline DepthImage add_depth_noise(const DepthImage& depth, double sigma, uint64_t seed) {
    if (sigma < 0) throw std::invalid_argument("add_depth_noise: sigma must be >= 0");
    if (sigma == 0) return depth;
    DepthImage out = depth;
    Rng rng(seed);
    for (auto& b : out.zbuffer) {
        if (b >= 1.0) continue;
        double z = depth_decode(b, out.intrinsics) + sigma * rng.gaussian();
        b = depth_encode(z, out.intrinsics);
    }
    return out;
}

struct GroundTruthEntry {
    int object_id = 0;
    Pose pose; // camera frame
};

struct SceneDataset {
    DepthImage depth;
    IntensityImage intensity;
    std::vector<GroundTruthEntry> ground_truth;
    PointCloud scene_cloud;
    uint64_t rng_seed = 0;
    double noise_sigma = 0.0;
    int truncated = 0;
};

// Full scene synthesis: drop placement, rendering, noise, unprojection.
inline SceneDataset synthesize_scene(const TriangleMesh& mesh, const BinConfig& cfg,
                                     const CameraIntrinsics& cam, double sigma, uint64_t seed,
                                     double heightmap_cell = 0.0) {
    PlacementResult placed = place_objects(mesh, cfg, mix_seed(seed, 1), heightmap_cell);
    Pose cam_from_bin_pose = camera_from_bin(cfg);

    SceneDataset scene;
    scene.rng_seed = seed;
    scene.noise_sigma = sigma;
    scene.truncated = placed.truncated;
    scene.ground_truth.reserve(placed.poses.size());
    std::vector<Pose> cam_poses;
    cam_poses.reserve(placed.poses.size());
    for (size_t i = 0; i < placed.poses.size(); ++i) {
        Pose in_cam = cam_from_bin_pose.compose(placed.poses[i]);
        cam_poses.push_back(in_cam);
        scene.ground_truth.push_back({int(i), in_cam});
    }

    if (cam_poses.empty()) {
        scene.depth = DepthImage(cam);
        scene.intensity = IntensityImage(cam.width, cam.height);
        return scene;
    }
    RenderResult rendered = render_depth(mesh, cam_poses, cam);
    scene.depth = add_depth_noise(rendered.depth, sigma, mix_seed(seed, 2));
    scene.intensity = std::move(rendered.intensity);
    scene.scene_cloud = unproject(scene.depth);
    return scene;
}

} // namespace binpick
