#pragma once

#include "binpick/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace binpick {

struct OrientedPoint {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

struct PointCloud {
    std::vector<OrientedPoint> points;
    double sampling_resolution = 0.0; // voxel edge that produced it, 0 if raw

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

inline PointCloud transform_cloud(PointCloud cloud, const Pose& pose) {
    for (auto& p : cloud.points) {
        p.position = pose.apply(p.position);
        p.normal = pose.apply_vector(p.normal);
    }
    return cloud;
}

namespace detail {

// Origin-anchored voxel index, packed into 63 bits (21 signed bits per axis).
inline int64_t voxel_key(const Vec3& p, double tau) {
    constexpr int64_t kOffset = int64_t(1) << 20;
    constexpr int64_t kSpan = int64_t(1) << 21;
    int64_t ix = int64_t(std::floor(p.x() / tau));
    int64_t iy = int64_t(std::floor(p.y() / tau));
    int64_t iz = int64_t(std::floor(p.z() / tau));
    if (std::abs(ix) >= kOffset || std::abs(iy) >= kOffset || std::abs(iz) >= kOffset)
        throw invariant_error("voxel_key: coordinate exceeds grid range");
    return ((ix + kOffset) * kSpan + (iy + kOffset)) * kSpan + (iz + kOffset);
}

} // namespace detail

// One representative per occupied voxel: centroid position, normalized mean
// normal. Output sorted by voxel index; deterministic for a fixed input order.
inline PointCloud voxel_subsample(const PointCloud& cloud, double tau) {
    if (tau <= 0) throw std::invalid_argument("voxel_subsample: tau must be positive");
    struct Cell {
        Vec3 pos_sum = Vec3::Zero();
        Vec3 normal_sum = Vec3::Zero();
        std::vector<int> members;
    };
    std::unordered_map<int64_t, Cell> cells;
    cells.reserve(cloud.points.size());
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const auto& p = cloud.points[i];
        Cell& c = cells[detail::voxel_key(p.position, tau)];
        c.pos_sum += p.position;
        c.normal_sum += p.normal;
        c.members.push_back(int(i));
    }

    std::vector<std::pair<int64_t, const Cell*>> ordered;
    ordered.reserve(cells.size());
    for (const auto& [key, cell] : cells) ordered.emplace_back(key, &cell);
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    PointCloud out;
    out.sampling_resolution = tau;
    out.points.reserve(ordered.size());
    for (const auto& [key, cell] : ordered) {
        OrientedPoint rep;
        rep.position = cell->pos_sum / double(cell->members.size());
        if (cell->normal_sum.norm() < 1e-9) {
            // Cancelling normals: fall back to the member closest to the centroid.
            int best = cell->members[0];
            double best_d = (cloud.points[best].position - rep.position).squaredNorm();
            for (int m : cell->members) {
                double d = (cloud.points[m].position - rep.position).squaredNorm();
                if (d < best_d) { best_d = d; best = m; }
            }
            rep.normal = cloud.points[best].normal;
        } else {
            rep.normal = cell->normal_sum.normalized();
        }
        out.points.push_back(rep);
    }
    return out;
}

// Deterministic surface sampling: a barycentric grid per triangle with spacing
// about `spacing`, normals interpolated from vertex normals. Guarantees at
// least the three corners per face, so coarse CAD tessellations are covered.
inline PointCloud sample_mesh_surface(const TriangleMesh& mesh, double spacing) {
    if (!mesh.has_normals()) throw std::invalid_argument("sample_mesh_surface: mesh lacks vertex normals");
    if (spacing <= 0) throw std::invalid_argument("sample_mesh_surface: spacing must be positive");
    PointCloud out;
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        const Vec3& na = mesh.vertex_normals[f[0]];
        const Vec3& nb = mesh.vertex_normals[f[1]];
        const Vec3& nc = mesh.vertex_normals[f[2]];
        double longest = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
        int steps = std::max(1, int(std::ceil(longest / spacing)));
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; j <= steps - i; ++j) {
                double u = double(i) / steps;
                double v = double(j) / steps;
                double w = 1.0 - u - v;
                OrientedPoint p;
                p.position = w * a + u * b + v * c;
                Vec3 n = w * na + u * nb + v * nc;
                p.normal = n.norm() > 1e-12 ? Vec3(n.normalized()) : Vec3(0, 0, 1);
                out.points.push_back(p);
            }
        }
    }
    return out;
}

// Mesh to uniformly subsampled oriented point cloud at resolution tau.
inline PointCloud mesh_to_cloud(const TriangleMesh& mesh, double tau) {
    double total_area = 0;
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        total_area += 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
    }
    if (total_area <= 0) throw std::invalid_argument("mesh_to_cloud: zero-area mesh");
    // Half-tau sample spacing gives >= 4 candidates per voxel along the surface.
    PointCloud dense = sample_mesh_surface(mesh, tau * 0.5);
    return voxel_subsample(dense, tau);
}

// Fixed-radius neighbor lookup over an immutable cloud.
class HashGrid {
public:
    HashGrid(const PointCloud& cloud, double cell) : cloud_(cloud), cell_(cell) {
        if (cell <= 0) throw invariant_error("HashGrid: cell must be positive");
        buckets_.reserve(cloud.points.size());
        for (size_t i = 0; i < cloud.points.size(); ++i)
            buckets_[detail::voxel_key(cloud.points[i].position, cell_)].push_back(int(i));
    }

    // Indices of points within `radius` of `center`, ascending.
    std::vector<int> radius_query(const Vec3& center, double radius) const {
        std::vector<int> out;
        double r_sq = radius * radius;
        int span = int(std::ceil(radius / cell_));
        int64_t cx = int64_t(std::floor(center.x() / cell_));
        int64_t cy = int64_t(std::floor(center.y() / cell_));
        int64_t cz = int64_t(std::floor(center.z() / cell_));
        constexpr int64_t kOffset = int64_t(1) << 20;
        constexpr int64_t kSpan = int64_t(1) << 21;
        for (int64_t ix = cx - span; ix <= cx + span; ++ix)
            for (int64_t iy = cy - span; iy <= cy + span; ++iy)
                for (int64_t iz = cz - span; iz <= cz + span; ++iz) {
                    int64_t key = ((ix + kOffset) * kSpan + (iy + kOffset)) * kSpan + (iz + kOffset);
                    auto it = buckets_.find(key);
                    if (it == buckets_.end()) continue;
                    for (int i : it->second)
                        if ((cloud_.points[i].position - center).squaredNorm() <= r_sq)
                            out.push_back(i);
                }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    const PointCloud& cloud_;
    double cell_;
    std::unordered_map<int64_t, std::vector<int>> buckets_;
};

} // namespace binpick
