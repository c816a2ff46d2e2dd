#pragma once

#include "binpick/synth.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace binpick {

// PFM, 32-bit float little-endian, rows bottom to top. Stores metric depth;
// empty pixels are written as 0 (valid depths are always >= d_near > 0).
inline void save_pfm(const std::string& path, const DepthImage& depth) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write PFM file: " + path);
    const int w = depth.intrinsics.width, h = depth.intrinsics.height;
    out << "Pf\n" << w << " " << h << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(w));
    for (int r = h - 1; r >= 0; --r) {
        for (int c = 0; c < w; ++c)
            row[c] = depth.valid(c, r) ? float(depth.metric_z(c, r)) : 0.0f;
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
    }
    if (!out) throw io_error("failed writing PFM file: " + path);
}

// Reads a metric-depth PFM back into z-buffer form using the given intrinsics.
inline DepthImage load_pfm(const std::string& path, const CameraIntrinsics& cam) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open PFM file: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0;
    in >> magic >> w >> h >> scale;
    if (magic != "Pf") throw io_error("PFM: not a grayscale PFM: " + path);
    if (scale >= 0) throw io_error("PFM: big-endian data unsupported: " + path);
    if (w != cam.width || h != cam.height) throw io_error("PFM: size mismatch with intrinsics: " + path);
    in.get(); // single whitespace after the header
    DepthImage depth(cam);
    std::vector<float> row(static_cast<size_t>(w));
    for (int r = h - 1; r >= 0; --r) {
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
        if (!in) throw io_error("PFM: truncated data in " + path);
        for (int c = 0; c < w; ++c)
            depth.at(c, r) = row[c] > 0.0f ? depth_encode(double(row[c]), cam) : 1.0;
    }
    return depth;
}

inline void save_pgm(const std::string& path, const IntensityImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write PGM file: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.width));
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double v = std::clamp(img.at(c, r), 0.0, 1.0);
            row[c] = (unsigned char)(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!out) throw io_error("failed writing PGM file: " + path);
}

inline nlohmann::json pose_to_json(const Pose& p) {
    nlohmann::json j;
    nlohmann::json rot = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
    j["rotation"] = std::move(rot);
    j["translation"] = {p.translation.x(), p.translation.y(), p.translation.z()};
    return j;
}

inline Pose pose_from_json(const nlohmann::json& j) {
    Pose p;
    const auto& rot = j.at("rotation");
    if (rot.size() != 9) throw io_error("pose JSON: rotation must have 9 entries");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[size_t(r) * 3 + c].get<double>();
    const auto& t = j.at("translation");
    if (t.size() != 3) throw io_error("pose JSON: translation must have 3 entries");
    for (int k = 0; k < 3; ++k) p.translation[k] = t[size_t(k)].get<double>();
    if (!p.is_valid(1e-6)) throw io_error("pose JSON: rotation is not orthonormal with det +1");
    return p;
}

inline void save_ground_truth(const std::string& path, const std::vector<GroundTruthEntry>& gts) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& gt : gts) {
        nlohmann::json e = pose_to_json(gt.pose);
        e["object_id"] = gt.object_id;
        j.push_back(std::move(e));
    }
    std::ofstream out(path);
    if (!out) throw io_error("cannot write ground truth file: " + path);
    out << j.dump(2) << "\n";
}

inline std::vector<GroundTruthEntry> load_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open ground truth file: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<GroundTruthEntry> gts;
    for (const auto& e : j) gts.push_back({e.at("object_id").get<int>(), pose_from_json(e)});
    return gts;
}

struct SceneSidecar {
    CameraIntrinsics intrinsics;
    double noise_sigma = 0;
    uint64_t seed = 0;
    BinConfig bin;
    Pose cam_from_bin;
    int truncated = 0;
};

inline void save_sidecar(const std::string& path, const SceneSidecar& sc) {
    nlohmann::json j;
    j["intrinsics"] = {{"f", sc.intrinsics.f},
                       {"width", sc.intrinsics.width},
                       {"height", sc.intrinsics.height},
                       {"d_near", sc.intrinsics.d_near},
                       {"d_far", sc.intrinsics.d_far}};
    j["noise_sigma"] = sc.noise_sigma;
    j["seed"] = sc.seed;
    j["bin"] = {{"bin_w", sc.bin.bin_w},   {"bin_h", sc.bin.bin_h},
                {"bin_d", sc.bin.bin_d},   {"drop_height", sc.bin.drop_height},
                {"camera_height", sc.bin.camera_height}, {"grid_nx", sc.bin.grid_nx},
                {"grid_ny", sc.bin.grid_ny}, {"n_layers", sc.bin.n_layers}};
    j["camera_from_bin"] = pose_to_json(sc.cam_from_bin);
    j["truncated"] = sc.truncated;
    std::ofstream out(path);
    if (!out) throw io_error("cannot write sidecar file: " + path);
    out << j.dump(2) << "\n";
}

inline SceneSidecar load_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open sidecar file: " + path);
    nlohmann::json j;
    in >> j;
    SceneSidecar sc;
    const auto& intr = j.at("intrinsics");
    sc.intrinsics.f = intr.at("f").get<double>();
    sc.intrinsics.width = intr.at("width").get<int>();
    sc.intrinsics.height = intr.at("height").get<int>();
    sc.intrinsics.d_near = intr.at("d_near").get<double>();
    sc.intrinsics.d_far = intr.at("d_far").get<double>();
    sc.noise_sigma = j.at("noise_sigma").get<double>();
    sc.seed = j.at("seed").get<uint64_t>();
    const auto& b = j.at("bin");
    sc.bin.bin_w = b.at("bin_w").get<double>();
    sc.bin.bin_h = b.at("bin_h").get<double>();
    sc.bin.bin_d = b.at("bin_d").get<double>();
    sc.bin.drop_height = b.at("drop_height").get<double>();
    sc.bin.camera_height = b.at("camera_height").get<double>();
    sc.bin.grid_nx = b.at("grid_nx").get<int>();
    sc.bin.grid_ny = b.at("grid_ny").get<int>();
    sc.bin.n_layers = b.at("n_layers").get<int>();
    sc.cam_from_bin = pose_from_json(j.at("camera_from_bin"));
    sc.truncated = j.value("truncated", 0);
    return sc;
}

// Writes the four per-scene artifacts into `dir`.
inline void save_scene(const std::string& dir, const SceneDataset& scene, const BinConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_pfm((fs::path(dir) / "depth.pfm").string(), scene.depth);
    save_pgm((fs::path(dir) / "intensity.pgm").string(), scene.intensity);
    save_ground_truth((fs::path(dir) / "gt.json").string(), scene.ground_truth);
    SceneSidecar sc;
    sc.intrinsics = scene.depth.intrinsics;
    sc.noise_sigma = scene.noise_sigma;
    sc.seed = scene.rng_seed;
    sc.bin = cfg;
    sc.cam_from_bin = camera_from_bin(cfg);
    sc.truncated = scene.truncated;
    save_sidecar((fs::path(dir) / "sidecar.json").string(), sc);
}

struct LoadedScene {
    DepthImage depth;
    std::vector<GroundTruthEntry> ground_truth;
    SceneSidecar sidecar;
};

inline LoadedScene load_scene(const std::string& dir) {
    namespace fs = std::filesystem;
    LoadedScene s;
    s.sidecar = load_sidecar((fs::path(dir) / "sidecar.json").string());
    s.depth = load_pfm((fs::path(dir) / "depth.pfm").string(), s.sidecar.intrinsics);
    s.ground_truth = load_ground_truth((fs::path(dir) / "gt.json").string());
    return s;
}

} // namespace binpick
