#pragma once

#include "binpick/ppf.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

namespace binpick {

inline constexpr uint32_t kModelMagic = 0x46505042; // "BPPF"
inline constexpr uint32_t kModelVersion = 1;

namespace detail {

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw io_error("model file: unexpected end of data");
    return value;
}

} // namespace detail

// Binary model file: versioned header, subsampled cloud, then the feature
// table as (packed key, count, entries...) in ascending key order.
inline void save_model(const std::string& path, const PPFModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write model file: " + path);
    detail::write_raw(out, kModelMagic);
    detail::write_raw(out, kModelVersion);
    detail::write_raw(out, uint32_t(model.params.n_angle_steps));
    detail::write_raw(out, uint32_t(model.params.n_dist_steps));
    detail::write_raw(out, model.params.d_max);
    detail::write_raw(out, model.params.tau);
    detail::write_raw(out, model.diameter);
    detail::write_raw(out, uint64_t(model.model_cloud.size()));
    for (const auto& p : model.model_cloud.points) {
        for (int k = 0; k < 3; ++k) detail::write_raw(out, p.position[k]);
        for (int k = 0; k < 3; ++k) detail::write_raw(out, p.normal[k]);
    }

    const size_t a = size_t(model.params.n_angle_steps);
    uint64_t n_keys = model.key_count();
    detail::write_raw(out, n_keys);
    for (size_t flat = 0; flat + 1 < model.cell_begin.size(); ++flat) {
        uint32_t begin = model.cell_begin[flat], end = model.cell_begin[flat + 1];
        if (begin == end) continue;
        QuantizedKey key;
        size_t rest = flat;
        key.a3_bin = uint32_t(rest % a); rest /= a;
        key.a2_bin = uint32_t(rest % a); rest /= a;
        key.a1_bin = uint32_t(rest % a); rest /= a;
        key.d_bin = uint32_t(rest);
        detail::write_raw(out, pack_key(key));
        detail::write_raw(out, uint32_t(end - begin));
        for (uint32_t e = begin; e < end; ++e) {
            detail::write_raw(out, model.entries[e].point_index);
            detail::write_raw(out, model.entries[e].alpha_model);
        }
    }
    if (!out) throw io_error("failed writing model file: " + path);
}

inline PPFModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open model file: " + path);
    if (detail::read_raw<uint32_t>(in) != kModelMagic) throw io_error("model file: bad magic in " + path);
    uint32_t version = detail::read_raw<uint32_t>(in);
    if (version != kModelVersion)
        throw io_error("model file: unsupported version " + std::to_string(version) + " in " + path);

    PPFModel model;
    uint32_t n_angle = detail::read_raw<uint32_t>(in);
    uint32_t n_dist = detail::read_raw<uint32_t>(in);
    double d_max = detail::read_raw<double>(in);
    double tau = detail::read_raw<double>(in);
    model.diameter = detail::read_raw<double>(in);
    model.params = DetectorParams::defaults_for(model.diameter);
    model.params.n_angle_steps = int(n_angle);
    model.params.n_dist_steps = int(n_dist);
    model.params.n_alpha_steps = int(n_angle);
    model.params.d_max = d_max;
    model.params.tau = tau;
    model.params.validate();

    uint64_t n_points = detail::read_raw<uint64_t>(in);
    model.model_cloud.points.resize(n_points);
    model.model_cloud.sampling_resolution = tau;
    for (auto& p : model.model_cloud.points) {
        for (int k = 0; k < 3; ++k) p.position[k] = detail::read_raw<double>(in);
        for (int k = 0; k < 3; ++k) p.normal[k] = detail::read_raw<double>(in);
    }

    const size_t a = size_t(n_angle);
    const size_t n_cells = size_t(n_dist) * a * a * a;
    std::vector<uint32_t> counts(n_cells, 0);
    uint64_t n_keys = detail::read_raw<uint64_t>(in);
    struct KeyBlock {
        size_t flat;
        std::vector<PPFModel::Entry> entries;
    };
    std::vector<KeyBlock> blocks;
    blocks.reserve(n_keys);
    for (uint64_t k = 0; k < n_keys; ++k) {
        QuantizedKey key = unpack_key(detail::read_raw<uint32_t>(in));
        if (key.d_bin >= n_dist || key.a1_bin >= n_angle || key.a2_bin >= n_angle || key.a3_bin >= n_angle)
            throw io_error("model file: key out of range in " + path);
        uint32_t count = detail::read_raw<uint32_t>(in);
        KeyBlock block;
        block.flat = model.flat_index(key);
        block.entries.resize(count);
        for (auto& e : block.entries) {
            e.point_index = detail::read_raw<uint32_t>(in);
            if (e.point_index >= n_points) throw io_error("model file: entry index out of range in " + path);
            e.alpha_model = detail::read_raw<double>(in);
        }
        counts[block.flat] += count;
        blocks.push_back(std::move(block));
    }

    model.cell_begin.assign(n_cells + 1, 0);
    for (size_t i = 0; i < n_cells; ++i) model.cell_begin[i + 1] = model.cell_begin[i] + counts[i];
    model.entries.resize(model.cell_begin.back());
    std::vector<uint32_t> cursor(model.cell_begin.begin(), model.cell_begin.end() - 1);
    for (const auto& block : blocks)
        for (const auto& e : block.entries) model.entries[cursor[block.flat]++] = e;
    return model;
}

// Human-readable dump of the table for debugging.
inline nlohmann::json model_debug_json(const PPFModel& model) {
    nlohmann::json j;
    j["n_angle_steps"] = model.params.n_angle_steps;
    j["n_dist_steps"] = model.params.n_dist_steps;
    j["d_max"] = model.params.d_max;
    j["tau"] = model.params.tau;
    j["diameter"] = model.diameter;
    j["point_count"] = model.model_cloud.size();
    j["total_entries"] = model.total_entries();
    j["key_count"] = model.key_count();
    nlohmann::json table = nlohmann::json::array();
    const size_t a = size_t(model.params.n_angle_steps);
    for (size_t flat = 0; flat + 1 < model.cell_begin.size(); ++flat) {
        if (model.cell_begin[flat] == model.cell_begin[flat + 1]) continue;
        size_t rest = flat;
        uint32_t a3 = uint32_t(rest % a); rest /= a;
        uint32_t a2 = uint32_t(rest % a); rest /= a;
        uint32_t a1 = uint32_t(rest % a); rest /= a;
        nlohmann::json cell;
        cell["key"] = {uint32_t(rest), a1, a2, a3};
        nlohmann::json list = nlohmann::json::array();
        for (uint32_t e = model.cell_begin[flat]; e < model.cell_begin[flat + 1]; ++e)
            list.push_back({model.entries[e].point_index, model.entries[e].alpha_model});
        cell["entries"] = std::move(list);
        table.push_back(std::move(cell));
    }
    j["table"] = std::move(table);
    return j;
}

} // namespace binpick
