#pragma once

#include "binpick/camera.hpp"
#include "binpick/mesh.hpp"
#include "binpick/pose.hpp"

#include <vector>

namespace binpick {

struct RenderResult {
    DepthImage depth;
    IntensityImage intensity;
};

namespace detail {

// Clips a camera-space polygon against the half-space z >= d_near.
inline std::vector<Vec3> clip_near(const std::vector<Vec3>& poly, double d_near) {
    std::vector<Vec3> out;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec3& a = poly[i];
        const Vec3& b = poly[(i + 1) % n];
        bool a_in = a.z() >= d_near;
        bool b_in = b.z() >= d_near;
        if (a_in) out.push_back(a);
        if (a_in != b_in) {
            double t = (d_near - a.z()) / (b.z() - a.z());
            out.push_back(a + t * (b - a));
        }
    }
    return out;
}

} // namespace detail

// Perspective z-buffer rasterizer. The stored value b is affine in the
// center-relative pixel coordinates (u,v) for a planar triangle, so the
// inverse projective mapping recovers the exact camera-space depth. Nearest
// surface wins; ties keep the earlier instance, then the earlier triangle.
inline RenderResult render_depth(const TriangleMesh& mesh, const std::vector<Pose>& poses,
                                 const CameraIntrinsics& cam) {
    cam.validate();
    if (mesh.faces.empty()) throw std::invalid_argument("render_depth: empty mesh");
    RenderResult result{DepthImage(cam), IntensityImage(cam.width, cam.height)};
    DepthImage& depth = result.depth;
    const double scale = cam.d_far / (cam.d_near - cam.d_far);

    std::vector<Vec3> cam_vertices(mesh.vertices.size());
    for (const Pose& pose : poses) {
        for (size_t i = 0; i < mesh.vertices.size(); ++i) cam_vertices[i] = pose.apply(mesh.vertices[i]);
        for (const auto& f : mesh.faces) {
            const Vec3& v0 = cam_vertices[f[0]];
            const Vec3& v1 = cam_vertices[f[1]];
            const Vec3& v2 = cam_vertices[f[2]];
            if (v0.z() < cam.d_near && v1.z() < cam.d_near && v2.z() < cam.d_near) continue;

            Vec3 plane_n = (v1 - v0).cross(v2 - v0);
            double plane_d = plane_n.dot(v0);
            double plane_norm = plane_n.norm();
            if (plane_norm <= 0 || std::abs(plane_d) < 1e-12 * plane_norm) continue; // edge-on

            std::vector<Vec3> poly = {v0, v1, v2};
            if (v0.z() < cam.d_near || v1.z() < cam.d_near || v2.z() < cam.d_near)
                poly = detail::clip_near(poly, cam.d_near);
            if (poly.size() < 3) continue;

            // b(u,v) = bu*u + bv*v + bc, derived from the camera-space plane.
            double inv_d = 1.0 / plane_d;
            double bu = scale * cam.d_near * plane_n.x() * inv_d / cam.f;
            double bv = scale * cam.d_near * plane_n.y() * inv_d / cam.f;
            double bc = scale * (cam.d_near * (plane_n.z() * inv_d) - 1.0);

            std::vector<double> pu(poly.size()), pv(poly.size());
            double u_min = 1e300, u_max = -1e300, v_min = 1e300, v_max = -1e300;
            for (size_t i = 0; i < poly.size(); ++i) {
                pu[i] = cam.f * poly[i].x() / poly[i].z();
                pv[i] = cam.f * poly[i].y() / poly[i].z();
                u_min = std::min(u_min, pu[i]); u_max = std::max(u_max, pu[i]);
                v_min = std::min(v_min, pv[i]); v_max = std::max(v_max, pv[i]);
            }
            double area2 = 0;
            for (size_t i = 0; i < poly.size(); ++i) {
                size_t j = (i + 1) % poly.size();
                area2 += pu[i] * pv[j] - pu[j] * pv[i];
            }
            if (area2 == 0) continue;
            if (area2 < 0) { // make CCW in (u,v)
                std::reverse(pu.begin(), pu.end());
                std::reverse(pv.begin(), pv.end());
            }

            int col_lo = std::max(0, int(std::ceil(u_min + 0.5 * cam.width - 0.5)));
            int col_hi = std::min(cam.width - 1, int(std::floor(u_max + 0.5 * cam.width - 0.5)));
            int row_lo = std::max(0, int(std::ceil(v_min + 0.5 * cam.height - 0.5)));
            int row_hi = std::min(cam.height - 1, int(std::floor(v_max + 0.5 * cam.height - 0.5)));

            Vec3 unit_n = plane_n / plane_norm;
            for (int row = row_lo; row <= row_hi; ++row) {
                double v = cam.pixel_v(row);
                for (int col = col_lo; col <= col_hi; ++col) {
                    double u = cam.pixel_u(col);
                    bool inside = true;
                    for (size_t i = 0; i < pu.size() && inside; ++i) {
                        size_t j = (i + 1) % pu.size();
                        double edge = (pu[j] - pu[i]) * (v - pv[i]) - (pv[j] - pv[i]) * (u - pu[i]);
                        inside = edge >= 0;
                    }
                    if (!inside) continue;
                    double b = bu * u + bv * v + bc;
                    b = std::min(1.0, std::max(0.0, b));
                    if (b < depth.at(col, row)) {
                        depth.at(col, row) = b;
                        double z = depth_decode(b, cam);
                        Vec3 p(z * u / cam.f, z * v / cam.f, z);
                        double shade = unit_n.dot(-p.normalized());
                        result.intensity.at(col, row) = std::max(0.0, shade);
                    }
                }
            }
        }
    }
    return result;
}

} // namespace binpick
