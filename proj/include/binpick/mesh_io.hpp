#pragma once

#include "binpick/mesh.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace binpick {

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

// OBJ face corner "v", "v/vt", "v//vn" or "v/vt/vn"; negative indices are
// relative to the current vertex count.
inline int obj_vertex_index(const std::string& corner, size_t vertex_count, int* normal_index) {
    size_t slash = corner.find('/');
    std::string vs = corner.substr(0, slash);
    int v = std::stoi(vs);
    if (normal_index) {
        *normal_index = 0;
        size_t slash2 = slash == std::string::npos ? std::string::npos : corner.find('/', slash + 1);
        if (slash2 != std::string::npos && slash2 + 1 < corner.size())
            *normal_index = std::stoi(corner.substr(slash2 + 1));
    }
    if (v < 0) v = int(vertex_count) + v + 1;
    if (v < 1 || size_t(v) > vertex_count) throw io_error("OBJ: face index out of range: " + corner);
    return v - 1;
}

} // namespace detail

inline TriangleMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open OBJ file: " + path);
    TriangleMesh mesh;
    std::vector<Vec3> file_normals;
    std::vector<int> vertex_normal_of; // per-vertex normal index (0 = unset)
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() >= 1 && line.back() == '\r') line.pop_back();
        auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "v") {
            if (toks.size() < 4) throw io_error("OBJ: malformed vertex line: " + line);
            mesh.vertices.emplace_back(std::stod(toks[1]), std::stod(toks[2]), std::stod(toks[3]));
            vertex_normal_of.push_back(0);
        } else if (toks[0] == "vn") {
            if (toks.size() < 4) throw io_error("OBJ: malformed normal line: " + line);
            file_normals.emplace_back(std::stod(toks[1]), std::stod(toks[2]), std::stod(toks[3]));
        } else if (toks[0] == "f") {
            if (toks.size() < 4) throw io_error("OBJ: face with fewer than 3 corners: " + line);
            std::vector<int> corners;
            for (size_t i = 1; i < toks.size(); ++i) {
                int ni = 0;
                corners.push_back(detail::obj_vertex_index(toks[i], mesh.vertices.size(), &ni));
                if (ni > 0 && size_t(ni) <= file_normals.size())
                    vertex_normal_of[corners.back()] = ni;
            }
            for (size_t i = 1; i + 1 < corners.size(); ++i)
                mesh.faces.push_back({corners[0], corners[i], corners[i + 1]});
        }
        // vt, o, g, s, usemtl, mtllib: ignored
    }
    if (mesh.vertices.empty()) throw io_error("OBJ: no vertices in " + path);
    if (mesh.faces.empty()) throw io_error("OBJ: no faces in " + path);

    bool all_mapped = !file_normals.empty();
    for (size_t i = 0; i < vertex_normal_of.size() && all_mapped; ++i)
        all_mapped = vertex_normal_of[i] > 0;
    if (all_mapped) {
        mesh.vertex_normals.resize(mesh.vertices.size());
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            Vec3 n = file_normals[vertex_normal_of[i] - 1];
            mesh.vertex_normals[i] = n.norm() > 1e-12 ? Vec3(n.normalized()) : Vec3(0, 0, 1);
        }
    }
    remove_degenerate_faces(mesh);
    if (mesh.faces.empty()) throw io_error("OBJ: all faces degenerate in " + path);
    return mesh;
}

namespace detail {

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    size_t count = 0;
    std::vector<PlyProperty> properties;
};

inline size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw io_error("PLY: unknown type " + t);
}

inline double ply_read_binary_scalar(std::istream& in, const std::string& t) {
    unsigned char buf[8];
    size_t sz = ply_type_size(t);
    in.read(reinterpret_cast<char*>(buf), std::streamsize(sz));
    if (!in) throw io_error("PLY: unexpected end of binary data");
    auto as = [&](auto v) { std::memcpy(&v, buf, sizeof(v)); return double(v); };
    if (t == "char" || t == "int8") return as(int8_t{});
    if (t == "uchar" || t == "uint8") return as(uint8_t{});
    if (t == "short" || t == "int16") return as(int16_t{});
    if (t == "ushort" || t == "uint16") return as(uint16_t{});
    if (t == "int" || t == "int32") return as(int32_t{});
    if (t == "uint" || t == "uint32") return as(uint32_t{});
    if (t == "float" || t == "float32") return as(float{});
    return as(double{});
}

} // namespace detail

inline TriangleMesh load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open PLY file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("PLY: empty file " + path);
    if (line.size() >= 1 && line.back() == '\r') line.pop_back();
    if (line != "ply") throw io_error("PLY: missing magic in " + path);

    bool binary = false;
    std::vector<detail::PlyElement> elements;
    while (std::getline(in, line)) {
        if (line.size() >= 1 && line.back() == '\r') line.pop_back();
        auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0] == "comment" || toks[0] == "obj_info") continue;
        if (toks[0] == "format") {
            if (toks.size() < 2) throw io_error("PLY: malformed format line");
            if (toks[1] == "ascii") binary = false;
            else if (toks[1] == "binary_little_endian") binary = true;
            else throw io_error("PLY: unsupported format " + toks[1]);
        } else if (toks[0] == "element") {
            if (toks.size() < 3) throw io_error("PLY: malformed element line");
            elements.push_back({toks[1], size_t(std::stoull(toks[2])), {}});
        } else if (toks[0] == "property") {
            if (elements.empty() || toks.size() < 3) throw io_error("PLY: property outside element");
            detail::PlyProperty p;
            if (toks[1] == "list") {
                if (toks.size() < 5) throw io_error("PLY: malformed list property");
                p.is_list = true;
                p.count_type = toks[2];
                p.type = toks[3];
                p.name = toks[4];
            } else {
                p.type = toks[1];
                p.name = toks[2];
            }
            elements.back().properties.push_back(p);
        } else if (toks[0] == "end_header") {
            break;
        }
    }

    TriangleMesh mesh;
    bool has_file_normals = false;
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
            for (size_t p = 0; p < el.properties.size(); ++p) {
                const auto& name = el.properties[p].name;
                if (name == "x") ix = int(p);
                else if (name == "y") iy = int(p);
                else if (name == "z") iz = int(p);
                else if (name == "nx") inx = int(p);
                else if (name == "ny") iny = int(p);
                else if (name == "nz") inz = int(p);
            }
            if (ix < 0 || iy < 0 || iz < 0) throw io_error("PLY: vertex element lacks x/y/z");
            has_file_normals = inx >= 0 && iny >= 0 && inz >= 0;
            mesh.vertices.reserve(el.count);
            if (has_file_normals) mesh.vertex_normals.reserve(el.count);
            std::vector<double> vals(el.properties.size());
            for (size_t i = 0; i < el.count; ++i) {
                if (binary) {
                    for (size_t p = 0; p < el.properties.size(); ++p) {
                        if (el.properties[p].is_list) throw io_error("PLY: list property on vertex element");
                        vals[p] = detail::ply_read_binary_scalar(in, el.properties[p].type);
                    }
                } else {
                    for (size_t p = 0; p < el.properties.size(); ++p)
                        if (!(in >> vals[p])) throw io_error("PLY: truncated vertex data");
                }
                mesh.vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
                if (has_file_normals) {
                    Vec3 n(vals[inx], vals[iny], vals[inz]);
                    mesh.vertex_normals.push_back(n.norm() > 1e-12 ? Vec3(n.normalized()) : Vec3(0, 0, 1));
                }
            }
        } else if (el.name == "face") {
            for (size_t i = 0; i < el.count; ++i) {
                for (const auto& prop : el.properties) {
                    if (prop.is_list && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
                        size_t cnt;
                        std::vector<int> corners;
                        if (binary) {
                            cnt = size_t(detail::ply_read_binary_scalar(in, prop.count_type));
                            for (size_t k = 0; k < cnt; ++k)
                                corners.push_back(int(detail::ply_read_binary_scalar(in, prop.type)));
                        } else {
                            if (!(in >> cnt)) throw io_error("PLY: truncated face data");
                            corners.resize(cnt);
                            for (auto& c : corners)
                                if (!(in >> c)) throw io_error("PLY: truncated face data");
                        }
                        for (int c : corners)
                            if (c < 0 || size_t(c) >= mesh.vertices.size())
                                throw io_error("PLY: face index out of range");
                        for (size_t k = 1; k + 1 < corners.size(); ++k)
                            mesh.faces.push_back({corners[0], corners[int(k)], corners[int(k) + 1]});
                    } else if (prop.is_list) {
                        size_t cnt;
                        if (binary) {
                            cnt = size_t(detail::ply_read_binary_scalar(in, prop.count_type));
                            for (size_t k = 0; k < cnt; ++k) detail::ply_read_binary_scalar(in, prop.type);
                        } else {
                            if (!(in >> cnt)) throw io_error("PLY: truncated face data");
                            double skip;
                            for (size_t k = 0; k < cnt; ++k) in >> skip;
                        }
                    } else {
                        if (binary) detail::ply_read_binary_scalar(in, prop.type);
                        else { double skip; in >> skip; }
                    }
                }
            }
        } else {
            // Unknown element: skippable only when all properties are scalars.
            size_t record = 0;
            for (const auto& prop : el.properties) {
                if (prop.is_list) throw io_error("PLY: cannot skip list element " + el.name);
                record += detail::ply_type_size(prop.type);
            }
            if (binary) in.seekg(std::streamoff(record * el.count), std::ios::cur);
            else {
                double skip;
                for (size_t i = 0; i < el.count * el.properties.size(); ++i) in >> skip;
            }
        }
    }
    if (mesh.vertices.empty()) throw io_error("PLY: no vertices in " + path);
    if (mesh.faces.empty()) throw io_error("PLY: no faces in " + path);
    remove_degenerate_faces(mesh);
    if (mesh.faces.empty()) throw io_error("PLY: all faces degenerate in " + path);
    return mesh;
}

// Dispatch by extension, falling back to content sniffing.
inline TriangleMesh load_mesh(const std::string& path) {
    auto ends_with = [&](const char* ext) {
        std::string lower = path;
        for (auto& c : lower) c = char(std::tolower(c));
        std::string e(ext);
        return lower.size() >= e.size() && lower.compare(lower.size() - e.size(), e.size(), e) == 0;
    };
    if (ends_with(".obj")) return load_obj(path);
    if (ends_with(".ply")) return load_ply(path);
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw io_error("cannot open mesh file: " + path);
    char magic[3] = {};
    probe.read(magic, 3);
    if (probe && magic[0] == 'p' && magic[1] == 'l' && magic[2] == 'y') return load_ply(path);
    return load_obj(path);
}

inline void save_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write OBJ file: " + path);
    char buf[256];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    if (mesh.has_normals()) {
        for (const auto& n : mesh.vertex_normals) {
            std::snprintf(buf, sizeof(buf), "vn %.17g %.17g %.17g\n", n.x(), n.y(), n.z());
            out << buf;
        }
    }
    for (const auto& f : mesh.faces) {
        if (mesh.has_normals())
            out << "f " << f[0] + 1 << "//" << f[0] + 1 << ' ' << f[1] + 1 << "//" << f[1] + 1 << ' '
                << f[2] + 1 << "//" << f[2] + 1 << '\n';
        else
            out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
    if (!out) throw io_error("failed writing OBJ file: " + path);
}

} // namespace binpick
