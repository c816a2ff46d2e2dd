#pragma once

#include "binpick/common.hpp"

#include <vector>

namespace binpick {

// Pinhole camera, principal point at the image center. Pixel (col,row) has
// center-relative coordinates u = col + 0.5 - width/2, v = row + 0.5 - height/2,
// and a scene point projects to u = f*x/z, v = f*y/z.
struct CameraIntrinsics {
    double f = 1000.0; // focal length in pixels
    int width = 640;
    int height = 480;
    double d_near = 1.0;
    double d_far = 1000.0;

    void validate() const {
        if (width < 1 || height < 1) throw std::invalid_argument("CameraIntrinsics: image size must be >= 1");
        if (!(0 < d_near && d_near < d_far)) throw std::invalid_argument("CameraIntrinsics: need 0 < d_near < d_far");
        if (f <= 0) throw std::invalid_argument("CameraIntrinsics: focal length must be positive");
    }

    double pixel_u(int col) const { return col + 0.5 - 0.5 * width; }
    double pixel_v(int row) const { return row + 0.5 - 0.5 * height; }
};

// Projective z-buffer value for camera-space depth z. Endpoints are exact:
// z <= d_near maps to 0 and z >= d_far maps to 1.
inline double depth_encode(double z, const CameraIntrinsics& cam) {
    if (z <= cam.d_near) return 0.0;
    if (z >= cam.d_far) return 1.0;
    return (cam.d_far / (cam.d_near - cam.d_far)) * (cam.d_near / z - 1.0);
}

// Inverse mapping; exact at both endpoints.
inline double depth_decode(double b, const CameraIntrinsics& cam) {
    if (b <= 0.0) return cam.d_near;
    if (b >= 1.0) return cam.d_far;
    return cam.d_near * cam.d_far / (cam.d_far + b * (cam.d_near - cam.d_far));
}

// width x height grid of z-buffer values in [0,1]; 1 means empty/far.
struct DepthImage {
    std::vector<double> zbuffer;
    CameraIntrinsics intrinsics;

    DepthImage() = default;
    explicit DepthImage(const CameraIntrinsics& cam)
        : zbuffer(size_t(cam.width) * size_t(cam.height), 1.0), intrinsics(cam) {
        cam.validate();
    }

    double& at(int col, int row) { return zbuffer[size_t(row) * intrinsics.width + col]; }
    double at(int col, int row) const { return zbuffer[size_t(row) * intrinsics.width + col]; }
    bool valid(int col, int row) const { return at(col, row) < 1.0; }
    double metric_z(int col, int row) const { return depth_decode(at(col, row), intrinsics); }
};

// Grayscale companion image in [0,1].
struct IntensityImage {
    std::vector<double> pixels;
    int width = 0, height = 0;

    IntensityImage() = default;
    IntensityImage(int w, int h) : pixels(size_t(w) * size_t(h), 0.0), width(w), height(h) {}
    double& at(int col, int row) { return pixels[size_t(row) * width + col]; }
    double at(int col, int row) const { return pixels[size_t(row) * width + col]; }
};

} // namespace binpick
