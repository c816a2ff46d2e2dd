#pragma once

#include "binpick/common.hpp"
#include "binpick/pose.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace binpick {

// Indexed triangle mesh. Vertex normals are empty until computed (or loaded
// from a file that carries them).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> vertex_normals;

    int degenerate_removed = 0; // zero-area faces dropped on load
    int isolated_flagged = 0;   // vertices without incident faces (normal fallback)

    bool has_normals() const { return vertex_normals.size() == vertices.size(); }
};

inline bool face_is_degenerate(const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 e1 = b - a, e2 = c - a;
    double cross_sq = e1.cross(e2).squaredNorm();
    return cross_sq <= 1e-24 * e1.squaredNorm() * e2.squaredNorm();
}

// Drops zero-area and repeated-index faces in place, returns how many were removed.
inline int remove_degenerate_faces(TriangleMesh& mesh) {
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.faces.size());
    int removed = 0;
    for (const auto& f : mesh.faces) {
        bool repeated = f[0] == f[1] || f[1] == f[2] || f[0] == f[2];
        if (repeated || face_is_degenerate(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]])) {
            ++removed;
            continue;
        }
        kept.push_back(f);
    }
    mesh.faces = std::move(kept);
    mesh.degenerate_removed += removed;
    return removed;
}

// Area-weighted vertex normals following face winding. Isolated vertices get
// +z and are counted in isolated_flagged.
inline TriangleMesh compute_vertex_normals(TriangleMesh mesh) {
    if (mesh.faces.empty()) throw std::invalid_argument("compute_vertex_normals: mesh has no faces");
    std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
    std::vector<char> touched(mesh.vertices.size(), 0);
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        Vec3 weighted = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a); // 2*area*n
        for (int k = 0; k < 3; ++k) {
            acc[f[k]] += weighted;
            touched[f[k]] = 1;
        }
    }
    mesh.vertex_normals.resize(mesh.vertices.size());
    mesh.isolated_flagged = 0;
    for (size_t i = 0; i < acc.size(); ++i) {
        if (!touched[i]) {
            mesh.vertex_normals[i] = Vec3(0, 0, 1);
            ++mesh.isolated_flagged;
        } else if (acc[i].norm() < 1e-12) {
            mesh.vertex_normals[i] = Vec3(0, 0, 1);
        } else {
            mesh.vertex_normals[i] = acc[i].normalized();
        }
    }
    return mesh;
}

inline TriangleMesh transform_mesh(TriangleMesh mesh, const Pose& pose) {
    for (auto& v : mesh.vertices) v = pose.apply(v);
    for (auto& n : mesh.vertex_normals) n = pose.apply_vector(n);
    return mesh;
}

namespace detail {

// Quickhull restricted to what the diameter needs: the set of hull vertex
// indices. Falls back to "all points" on degenerate (flat) input.
inline std::vector<int> convex_hull_vertices(const std::vector<Vec3>& pts) {
    const int n = int(pts.size());
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    if (n <= 4) return all;

    Vec3 lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double eps = 1e-9 * (hi - lo).norm();
    if (eps == 0.0) return {0};

    // Initial tetrahedron from extreme points.
    int ax[6];
    for (int d = 0; d < 3; ++d) {
        ax[2 * d] = ax[2 * d + 1] = 0;
        for (int i = 1; i < n; ++i) {
            if (pts[i][d] < pts[ax[2 * d]][d]) ax[2 * d] = i;
            if (pts[i][d] > pts[ax[2 * d + 1]][d]) ax[2 * d + 1] = i;
        }
    }
    int ia = ax[0], ib = ax[1];
    double best = -1;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) {
            double d2 = (pts[ax[i]] - pts[ax[j]]).squaredNorm();
            if (d2 > best) { best = d2; ia = ax[i]; ib = ax[j]; }
        }
    if (best <= eps * eps) return {ia};

    int ic = -1;
    best = eps;
    Vec3 ab = pts[ib] - pts[ia];
    for (int i = 0; i < n; ++i) {
        double d = ab.cross(pts[i] - pts[ia]).norm() / ab.norm();
        if (d > best) { best = d; ic = i; }
    }
    if (ic < 0) return all; // collinear; caller brute-forces

    int id = -1;
    best = eps;
    Vec3 pn = ab.cross(pts[ic] - pts[ia]).normalized();
    for (int i = 0; i < n; ++i) {
        double d = std::abs(pn.dot(pts[i] - pts[ia]));
        if (d > best) { best = d; id = i; }
    }
    if (id < 0) return all; // coplanar; caller brute-forces

    struct Face {
        int v[3];
        Vec3 normal;
        double offset;
        std::vector<int> outside;
        bool alive = true;
    };
    std::vector<Face> faces;
    Vec3 interior = (pts[ia] + pts[ib] + pts[ic] + pts[id]) / 4.0;

    auto add_face = [&](int a, int b, int c) {
        Face f;
        f.v[0] = a; f.v[1] = b; f.v[2] = c;
        f.normal = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
        double nn = f.normal.norm();
        f.normal = nn > 0 ? Vec3(f.normal / nn) : Vec3(0, 0, 1);
        f.offset = f.normal.dot(pts[a]);
        if (f.normal.dot(interior) - f.offset > 0) { // flip outward
            std::swap(f.v[1], f.v[2]);
            f.normal = -f.normal;
            f.offset = -f.offset;
        }
        faces.push_back(std::move(f));
        return int(faces.size()) - 1;
    };
    add_face(ia, ib, ic);
    add_face(ia, ib, id);
    add_face(ia, ic, id);
    add_face(ib, ic, id);

    auto dist = [&](const Face& f, int p) { return f.normal.dot(pts[p]) - f.offset; };
    for (int i = 0; i < n; ++i) {
        for (auto& f : faces) {
            if (dist(f, i) > eps) { f.outside.push_back(i); break; }
        }
    }

    for (size_t fi = 0; fi < faces.size(); ++fi) {
        if (!faces[fi].alive || faces[fi].outside.empty()) continue;
        int apex = faces[fi].outside[0];
        double d_best = -1;
        for (int p : faces[fi].outside) {
            double d = dist(faces[fi], p);
            if (d > d_best) { d_best = d; apex = p; }
        }

        std::vector<int> visible;
        for (size_t g = 0; g < faces.size(); ++g)
            if (faces[g].alive && dist(faces[g], apex) > eps) visible.push_back(int(g));

        // Horizon: directed edges of visible faces whose reverse edge is not visible.
        std::vector<std::pair<int, int>> edges;
        for (int g : visible)
            for (int k = 0; k < 3; ++k)
                edges.emplace_back(faces[g].v[k], faces[g].v[(k + 1) % 3]);
        std::vector<std::pair<int, int>> horizon;
        for (const auto& e : edges) {
            bool has_reverse = false;
            for (const auto& r : edges)
                if (r.first == e.second && r.second == e.first) { has_reverse = true; break; }
            if (!has_reverse) horizon.push_back(e);
        }

        std::vector<int> orphans;
        for (int g : visible) {
            faces[g].alive = false;
            orphans.insert(orphans.end(), faces[g].outside.begin(), faces[g].outside.end());
            faces[g].outside.clear();
        }
        std::vector<int> fresh;
        for (const auto& e : horizon) fresh.push_back(add_face(e.first, e.second, apex));
        for (int p : orphans) {
            if (p == apex) continue;
            for (int g : fresh) {
                if (dist(faces[g], p) > eps) { faces[g].outside.push_back(p); break; }
            }
        }
        fi = size_t(-1); // restart scan; alive faces with outside sets remain
    }

    std::vector<char> on_hull(n, 0);
    for (const auto& f : faces)
        if (f.alive)
            for (int k = 0; k < 3; ++k) on_hull[f.v[k]] = 1;
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
        if (on_hull[i]) out.push_back(i);
    return out;
}

inline double max_pairwise_distance(const std::vector<Vec3>& pts, const std::vector<int>& idx) {
    double best_sq = 0;
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = i + 1; j < idx.size(); ++j)
            best_sq = std::max(best_sq, (pts[idx[i]] - pts[idx[j]]).squaredNorm());
    return std::sqrt(best_sq);
}

} // namespace detail

// Maximum pairwise vertex distance. Exact brute force up to 5000 vertices,
// hull-vertex reduction above that (same value).
inline double object_diameter(const TriangleMesh& mesh) {
    const size_t n = mesh.vertices.size();
    if (n < 2) throw std::invalid_argument("object_diameter: need at least 2 vertices");
    std::vector<int> idx;
    if (n <= 5000) {
        idx.resize(n);
        for (size_t i = 0; i < n; ++i) idx[i] = int(i);
    } else {
        idx = detail::convex_hull_vertices(mesh.vertices);
    }
    return detail::max_pairwise_distance(mesh.vertices, idx);
}

} // namespace binpick
