#include "splat/io.hpp"

#include "splat/gaussian_math.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace splat {

namespace {

[[noreturn]] void fail(const std::string& path, int line, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw std::runtime_error(path + ": " + msg);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open file");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

double parse_double(const std::string& tok, const std::string& path, int line) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        fail(path, line, "expected a number, got '" + tok + "'");
    }
    if (used != tok.size()) fail(path, line, "expected a number, got '" + tok + "'");
    return v;
}

long long parse_int(const std::string& tok, const std::string& path, int line) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(tok, &used);
    } catch (const std::exception&) {
        fail(path, line, "expected an integer, got '" + tok + "'");
    }
    if (used != tok.size()) fail(path, line, "expected an integer, got '" + tok + "'");
    return v;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream iss(s);
    std::vector<std::string> out;
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

// ---------------------------------------------------------------- sparse scene

struct Intrinsics {
    int width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
};

std::map<long long, Intrinsics> load_cameras_txt(const std::string& path) {
    std::map<long long, Intrinsics> cams;
    auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        int ln = static_cast<int>(i) + 1;
        std::string s = trim(lines[i]);
        if (s.empty() || s[0] == '#') continue;
        auto tok = split_ws(s);
        if (tok.size() < 4) fail(path, ln, "camera line needs id, model, width, height");
        long long id = parse_int(tok[0], path, ln);
        Intrinsics K;
        K.width = static_cast<int>(parse_int(tok[2], path, ln));
        K.height = static_cast<int>(parse_int(tok[3], path, ln));
        const std::string& model = tok[1];
        if (model == "PINHOLE") {
            if (tok.size() != 8) fail(path, ln, "PINHOLE needs 4 parameters");
            K.fx = parse_double(tok[4], path, ln);
            K.fy = parse_double(tok[5], path, ln);
            K.cx = parse_double(tok[6], path, ln);
            K.cy = parse_double(tok[7], path, ln);
        } else if (model == "SIMPLE_PINHOLE") {
            if (tok.size() != 7) fail(path, ln, "SIMPLE_PINHOLE needs 3 parameters");
            K.fx = K.fy = parse_double(tok[4], path, ln);
            K.cx = parse_double(tok[5], path, ln);
            K.cy = parse_double(tok[6], path, ln);
        } else {
            fail(path, ln, "unsupported camera model '" + model + "'");
        }
        if (cams.count(id)) fail(path, ln, "duplicate camera id " + tok[0]);
        cams[id] = K;
    }
    if (cams.empty()) fail(path, "no cameras found");
    return cams;
}

std::vector<Camera> load_images_txt(const std::string& path,
                                    const std::map<long long, Intrinsics>& cams) {
    std::map<long long, Camera> by_id;
    auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        int ln = static_cast<int>(i) + 1;
        std::string s = trim(lines[i]);
        if (s.empty() || s[0] == '#') continue;
        auto tok = split_ws(s);
        if (tok.size() < 10)
            fail(path, ln, "image line needs id, quaternion, translation, camera, name");
        long long image_id = parse_int(tok[0], path, ln);
        Quat q(parse_double(tok[1], path, ln), parse_double(tok[2], path, ln),
               parse_double(tok[3], path, ln), parse_double(tok[4], path, ln));
        Vec3 t(parse_double(tok[5], path, ln), parse_double(tok[6], path, ln),
               parse_double(tok[7], path, ln));
        long long camera_id = parse_int(tok[8], path, ln);
        auto it = cams.find(camera_id);
        if (it == cams.end())
            fail(path, ln, "image references unknown camera id " + tok[8]);
        if (q.norm() < 1e-12) fail(path, ln, "zero quaternion");

        // The name is everything after the ninth token (it may hold spaces).
        std::size_t pos = 0;
        for (int skip = 0; skip < 9; ++skip) {
            pos = s.find_first_not_of(" \t", pos);
            pos = s.find_first_of(" \t", pos);
            if (pos == std::string::npos) break;
        }
        std::string name =
            pos == std::string::npos ? "" : trim(s.substr(pos));
        if (name.empty()) fail(path, ln, "missing image name");

        Camera cam;
        cam.width = it->second.width;
        cam.height = it->second.height;
        cam.fx = it->second.fx;
        cam.fy = it->second.fy;
        cam.cx = it->second.cx;
        cam.cy = it->second.cy;
        cam.rotation = quat_to_rotmat(q);
        cam.translation = t;
        cam.image_id = name;
        if (auto err = check_camera(cam)) fail(path, ln, *err);
        if (by_id.count(image_id)) fail(path, ln, "duplicate image id " + tok[0]);
        by_id[image_id] = cam;

        // The observations line follows immediately; it may be blank.
        i += 1;
    }
    std::vector<Camera> out;
    for (auto& [id, cam] : by_id) out.push_back(std::move(cam));
    if (out.empty()) fail(path, "no images found");
    return out;
}

PointCloud load_points3d_txt(const std::string& path) {
    std::map<long long, std::pair<Vec3, Vec3>> by_id;
    auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        int ln = static_cast<int>(i) + 1;
        std::string s = trim(lines[i]);
        if (s.empty() || s[0] == '#') continue;
        auto tok = split_ws(s);
        if (tok.size() < 8)
            fail(path, ln, "point line needs id, position, color, error");
        long long id = parse_int(tok[0], path, ln);
        Vec3 p(parse_double(tok[1], path, ln), parse_double(tok[2], path, ln),
               parse_double(tok[3], path, ln));
        Vec3 c(parse_double(tok[4], path, ln) / 255.0,
               parse_double(tok[5], path, ln) / 255.0,
               parse_double(tok[6], path, ln) / 255.0);
        if (by_id.count(id)) fail(path, ln, "duplicate point id " + tok[0]);
        by_id[id] = {p, c};
    }
    if (by_id.empty()) fail(path, "no points found");
    PointCloud pc;
    for (auto& [id, pc_pair] : by_id) {
        pc.positions.push_back(pc_pair.first);
        pc.colors.push_back(pc_pair.second);
    }
    return pc;
}

// ------------------------------------------------------------------- ply core

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

int ply_type_size(PlyType t) {
    switch (t) {
        case PlyType::i8:
        case PlyType::u8:
            return 1;
        case PlyType::i16:
        case PlyType::u16:
            return 2;
        case PlyType::i32:
        case PlyType::u32:
        case PlyType::f32:
            return 4;
        case PlyType::f64:
            return 8;
    }
    return 0;
}

PlyType parse_ply_type(const std::string& name, const std::string& path) {
    if (name == "char" || name == "int8") return PlyType::i8;
    if (name == "uchar" || name == "uint8") return PlyType::u8;
    if (name == "short" || name == "int16") return PlyType::i16;
    if (name == "ushort" || name == "uint16") return PlyType::u16;
    if (name == "int" || name == "int32") return PlyType::i32;
    if (name == "uint" || name == "uint32") return PlyType::u32;
    if (name == "float" || name == "float32") return PlyType::f32;
    if (name == "double" || name == "float64") return PlyType::f64;
    fail(path, "unknown property type '" + name + "'");
}

double decode_ply_value(const char* p, PlyType t) {
    switch (t) {
        case PlyType::i8: {
            std::int8_t v;
            std::memcpy(&v, p, 1);
            return v;
        }
        case PlyType::u8: {
            std::uint8_t v;
            std::memcpy(&v, p, 1);
            return v;
        }
        case PlyType::i16: {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            return v;
        }
        case PlyType::u16: {
            std::uint16_t v;
            std::memcpy(&v, p, 2);
            return v;
        }
        case PlyType::i32: {
            std::int32_t v;
            std::memcpy(&v, p, 4);
            return v;
        }
        case PlyType::u32: {
            std::uint32_t v;
            std::memcpy(&v, p, 4);
            return v;
        }
        case PlyType::f32: {
            float v;
            std::memcpy(&v, p, 4);
            return v;
        }
        case PlyType::f64: {
            double v;
            std::memcpy(&v, p, 8);
            return v;
        }
    }
    return 0;
}

struct PlyProperty {
    PlyType type = PlyType::f64;
    std::string name;
};

struct PlyHeader {
    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> vertex_properties;
    std::vector<std::string> comments;
    std::streampos data_start = 0;
};

PlyHeader read_ply_header(std::ifstream& in, const std::string& path) {
    PlyHeader h;
    std::string line;
    if (!std::getline(in, line) || trim(line) != "ply") fail(path, "not a PLY file");

    bool have_format = false;
    bool in_vertex = false;
    bool seen_vertex = false;
    while (std::getline(in, line)) {
        std::string s = trim(line);
        if (s.empty()) continue;
        auto tok = split_ws(s);
        if (tok[0] == "comment") {
            h.comments.push_back(s.substr(std::min<std::size_t>(s.size(), 8)));
        } else if (tok[0] == "format") {
            if (tok.size() < 2) fail(path, "malformed format line");
            if (tok[1] == "binary_little_endian")
                h.binary = true;
            else if (tok[1] == "ascii")
                h.binary = false;
            else
                fail(path, "unsupported PLY format '" + tok[1] + "'");
            have_format = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) fail(path, "malformed element line");
            if (tok[1] == "vertex") {
                if (seen_vertex) fail(path, "duplicate vertex element");
                h.vertex_count =
                    static_cast<std::size_t>(parse_int(tok[2], path, 0));
                in_vertex = true;
                seen_vertex = true;
            } else {
                if (!seen_vertex)
                    fail(path, "vertex element must come before '" + tok[1] + "'");
                in_vertex = false;  // trailing elements are ignored
            }
        } else if (tok[0] == "property") {
            if (!in_vertex) continue;
            if (tok.size() == 3) {
                h.vertex_properties.push_back(
                    {parse_ply_type(tok[1], path), tok[2]});
            } else if (tok.size() >= 2 && tok[1] == "list") {
                fail(path, "list properties are not supported for vertices");
            } else {
                fail(path, "malformed property line");
            }
        } else if (tok[0] == "end_header") {
            if (!have_format) fail(path, "missing format line");
            if (!seen_vertex) fail(path, "missing vertex element");
            h.data_start = in.tellg();
            return h;
        } else {
            fail(path, "unexpected header line '" + tok[0] + "'");
        }
    }
    fail(path, "unterminated PLY header");
}

void append_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void append_double(std::ofstream& out, double v) { append_bytes(out, &v, 8); }

// ------------------------------------------------------------------ ppm bytes

std::string next_ppm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) {
                in.unget();
                return tok;
            }
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

SparseScene load_sparse_scene(const std::string& dir) {
    SparseScene s;
    auto intrinsics = load_cameras_txt(dir + "/cameras.txt");
    s.cameras = load_images_txt(dir + "/images.txt", intrinsics);
    s.points = load_points3d_txt(dir + "/points3D.txt");
    return s;
}

SceneData load_scene_with_images(const std::string& dir) {
    SceneData out;
    out.scene = load_sparse_scene(dir);
    out.dataset.cameras = out.scene.cameras;
    for (const Camera& cam : out.dataset.cameras) {
        std::string path = dir + "/images/" + cam.image_id;
        ImageBuffer img = load_ppm(path);
        if (img.width != cam.width || img.height != cam.height)
            fail(path, "image size " + std::to_string(img.width) + "x" +
                           std::to_string(img.height) + " does not match camera " +
                           std::to_string(cam.width) + "x" +
                           std::to_string(cam.height));
        out.dataset.images.push_back(std::move(img));
    }
    return out;
}

Camera downsample_camera(const Camera& cam, int k) {
    if (k < 1) throw std::invalid_argument("downsample factor must be at least 1");
    if (k == 1) return cam;
    Camera out = cam;
    out.width = cam.width / k;
    out.height = cam.height / k;
    if (out.width < 1 || out.height < 1)
        throw std::invalid_argument("downsample factor exceeds image size");
    out.fx = cam.fx / k;
    out.fy = cam.fy / k;
    out.cx = cam.cx / k;
    out.cy = cam.cy / k;
    return out;
}

ImageBuffer downsample_image(const ImageBuffer& img, int k) {
    if (k < 1) throw std::invalid_argument("downsample factor must be at least 1");
    if (k == 1) return img;
    int ow = img.width / k, oh = img.height / k;
    if (ow < 1 || oh < 1)
        throw std::invalid_argument("downsample factor exceeds image size");
    ImageBuffer out(ow, oh);
    double inv = 1.0 / (k * k);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int c = 0; c < 3; ++c) {
                double sum = 0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx)
                        sum += img.at(y * k + dy, x * k + dx, c);
                out.at(y, x, c) = sum * inv;
            }
    return out;
}

namespace {

std::vector<std::string> gaussian_ply_property_names() {
    std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz",
                                      "f_dc_0", "f_dc_1", "f_dc_2"};
    for (int i = 0; i < 45; ++i) names.push_back("f_rest_" + std::to_string(i));
    names.push_back("opacity");
    for (int i = 0; i < 3; ++i) names.push_back("scale_" + std::to_string(i));
    for (int i = 0; i < 4; ++i) names.push_back("rot_" + std::to_string(i));
    return names;
}

}  // namespace

void save_gaussian_ply(const GaussianModel& model, const std::string& path) {
    auto violations = validate(model);
    if (!violations.empty())
        throw std::invalid_argument("refusing to save invalid model: " +
                                    violations.front().field + ": " +
                                    violations.front().message);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");

    out << "ply\nformat binary_little_endian 1.0\n";
    out << "comment sh_degree_active " << model.sh_degree_active << "\n";
    out << "element vertex " << model.size() << "\n";
    for (const std::string& name : gaussian_ply_property_names())
        out << "property double " << name << "\n";
    out << "end_header\n";

    for (std::size_t i = 0; i < model.size(); ++i) {
        for (int c = 0; c < 3; ++c) append_double(out, model.means[i][c]);
        for (int c = 0; c < 3; ++c) append_double(out, 0.0);
        for (int ch = 0; ch < 3; ++ch) append_double(out, model.sh_coeffs[i][ch]);
        for (int ch = 0; ch < 3; ++ch)
            for (int c = 1; c < kShCoeffsPerChannel; ++c)
                append_double(out, model.sh_coeffs[i][c * 3 + ch]);
        append_double(out, model.opacity_logits[i]);
        for (int c = 0; c < 3; ++c) append_double(out, model.log_scales[i][c]);
        for (int c = 0; c < 4; ++c) append_double(out, model.rotations[i][c]);
    }
    if (!out) fail(path, "write failed");
}

GaussianModel load_gaussian_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");
    PlyHeader h = read_ply_header(in, path);
    if (!h.binary) fail(path, "model checkpoints must be binary little-endian");

    auto expected = gaussian_ply_property_names();
    if (h.vertex_properties.size() != expected.size())
        fail(path, "expected " + std::to_string(expected.size()) +
                       " vertex properties, found " +
                       std::to_string(h.vertex_properties.size()));
    std::size_t stride = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const PlyProperty& p = h.vertex_properties[i];
        if (p.name != expected[i])
            fail(path, "property " + std::to_string(i) + " is '" + p.name +
                           "', expected '" + expected[i] + "'");
        if (p.type != PlyType::f32 && p.type != PlyType::f64)
            fail(path, "property '" + p.name + "' must be float or double");
        stride += static_cast<std::size_t>(ply_type_size(p.type));
    }

    GaussianModel model;
    model.resize(h.vertex_count);
    model.sh_degree_active = 3;
    for (const std::string& c : h.comments) {
        auto tok = split_ws(c);
        if (tok.size() == 2 && tok[0] == "sh_degree_active")
            model.sh_degree_active = static_cast<int>(parse_int(tok[1], path, 0));
    }

    std::vector<char> row(stride);
    for (std::size_t i = 0; i < h.vertex_count; ++i) {
        in.read(row.data(), static_cast<std::streamsize>(stride));
        if (!in)
            fail(path, "unexpected end of file at vertex " + std::to_string(i));
        std::size_t off = 0;
        auto next = [&](std::size_t prop) {
            double v = decode_ply_value(row.data() + off, h.vertex_properties[prop].type);
            off += static_cast<std::size_t>(ply_type_size(h.vertex_properties[prop].type));
            return v;
        };
        std::size_t p = 0;
        for (int c = 0; c < 3; ++c) model.means[i][c] = next(p++);
        for (int c = 0; c < 3; ++c) next(p++);  // placeholder normals
        for (int ch = 0; ch < 3; ++ch) model.sh_coeffs[i][ch] = next(p++);
        for (int ch = 0; ch < 3; ++ch)
            for (int c = 1; c < kShCoeffsPerChannel; ++c)
                model.sh_coeffs[i][c * 3 + ch] = next(p++);
        model.opacity_logits[i] = next(p++);
        for (int c = 0; c < 3; ++c) model.log_scales[i][c] = next(p++);
        for (int c = 0; c < 4; ++c) model.rotations[i][c] = next(p++);
    }

    auto violations = validate(model);
    if (!violations.empty())
        fail(path, "loaded model is invalid: " + violations.front().field + ": " +
                       violations.front().message);
    return model;
}

void save_pointcloud_ply(const PointCloud& pc, const std::string& path) {
    if (pc.has_colors() && pc.colors.size() != pc.size())
        throw std::invalid_argument("color count does not match positions");
    if (pc.has_normals() && pc.normals.size() != pc.size())
        throw std::invalid_argument("normal count does not match positions");

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << pc.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (pc.has_colors())
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (pc.has_normals())
        out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "end_header\n";

    for (std::size_t i = 0; i < pc.size(); ++i) {
        for (int c = 0; c < 3; ++c) append_double(out, pc.positions[i][c]);
        if (pc.has_colors()) {
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(pc.colors[i][c], 0.0, 1.0);
                auto byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
                append_bytes(out, &byte, 1);
            }
        }
        if (pc.has_normals())
            for (int c = 0; c < 3; ++c) append_double(out, pc.normals[i][c]);
    }
    if (!out) fail(path, "write failed");
}

PointCloud load_pointcloud_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");
    PlyHeader h = read_ply_header(in, path);

    int col[3] = {-1, -1, -1}, pos[3] = {-1, -1, -1}, nrm[3] = {-1, -1, -1};
    const char* pos_names[3] = {"x", "y", "z"};
    const char* col_names[3] = {"red", "green", "blue"};
    const char* nrm_names[3] = {"nx", "ny", "nz"};
    for (std::size_t i = 0; i < h.vertex_properties.size(); ++i) {
        const std::string& name = h.vertex_properties[i].name;
        for (int c = 0; c < 3; ++c) {
            if (name == pos_names[c]) pos[c] = static_cast<int>(i);
            if (name == col_names[c]) col[c] = static_cast<int>(i);
            if (name == nrm_names[c]) nrm[c] = static_cast<int>(i);
        }
    }
    for (int c = 0; c < 3; ++c)
        if (pos[c] < 0)
            fail(path, std::string("missing vertex property '") + pos_names[c] + "'");
    bool has_col = col[0] >= 0 || col[1] >= 0 || col[2] >= 0;
    bool has_nrm = nrm[0] >= 0 || nrm[1] >= 0 || nrm[2] >= 0;
    if (has_col && (col[0] < 0 || col[1] < 0 || col[2] < 0))
        fail(path, "incomplete color properties");
    if (has_nrm && (nrm[0] < 0 || nrm[1] < 0 || nrm[2] < 0))
        fail(path, "incomplete normal properties");

    PointCloud pc;
    pc.positions.resize(h.vertex_count);
    if (has_col) pc.colors.resize(h.vertex_count);
    if (has_nrm) pc.normals.resize(h.vertex_count);

    auto color_scale = [&](int prop, double v) {
        PlyType t = h.vertex_properties[prop].type;
        return (t == PlyType::f32 || t == PlyType::f64) ? v : v / 255.0;
    };

    if (h.binary) {
        std::size_t stride = 0;
        std::vector<std::size_t> offsets(h.vertex_properties.size());
        for (std::size_t i = 0; i < h.vertex_properties.size(); ++i) {
            offsets[i] = stride;
            stride += static_cast<std::size_t>(ply_type_size(h.vertex_properties[i].type));
        }
        std::vector<char> row(stride);
        for (std::size_t i = 0; i < h.vertex_count; ++i) {
            in.read(row.data(), static_cast<std::streamsize>(stride));
            if (!in)
                fail(path, "unexpected end of file at vertex " + std::to_string(i));
            auto value = [&](int prop) {
                return decode_ply_value(row.data() + offsets[prop],
                                        h.vertex_properties[prop].type);
            };
            for (int c = 0; c < 3; ++c) pc.positions[i][c] = value(pos[c]);
            if (has_col)
                for (int c = 0; c < 3; ++c)
                    pc.colors[i][c] = color_scale(col[c], value(col[c]));
            if (has_nrm)
                for (int c = 0; c < 3; ++c) pc.normals[i][c] = value(nrm[c]);
        }
    } else {
        std::string line;
        for (std::size_t i = 0; i < h.vertex_count; ++i) {
            do {
                if (!std::getline(in, line))
                    fail(path, "unexpected end of file at vertex " + std::to_string(i));
                line = trim(line);
            } while (line.empty());
            auto tok = split_ws(line);
            if (tok.size() < h.vertex_properties.size())
                fail(path, "vertex " + std::to_string(i) + " has " +
                               std::to_string(tok.size()) + " values, expected " +
                               std::to_string(h.vertex_properties.size()));
            auto value = [&](int prop) {
                return parse_double(tok[static_cast<std::size_t>(prop)], path, 0);
            };
            for (int c = 0; c < 3; ++c) pc.positions[i][c] = value(pos[c]);
            if (has_col)
                for (int c = 0; c < 3; ++c)
                    pc.colors[i][c] = color_scale(col[c], value(col[c]));
            if (has_nrm)
                for (int c = 0; c < 3; ++c) pc.normals[i][c] = value(nrm[c]);
        }
    }
    return pc;
}

void save_ppm(const ImageBuffer& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(img.pixels.size());
    for (double v : img.pixels) {
        double clamped = std::clamp(v, 0.0, 1.0);
        bytes.push_back(static_cast<unsigned char>(std::lround(clamped * 255.0)));
    }
    append_bytes(out, bytes.data(), bytes.size());
    if (!out) fail(path, "write failed");
}

ImageBuffer load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");

    std::string magic = next_ppm_token(in);
    if (magic != "P6") {
        if (magic == "P1" || magic == "P2" || magic == "P3" || magic == "P4" ||
            magic == "P5")
            fail(path, "unsupported PPM variant " + magic + " (only P6 is handled)");
        fail(path, "not a PPM file");
    }
    int w = static_cast<int>(parse_int(next_ppm_token(in), path, 0));
    int h = static_cast<int>(parse_int(next_ppm_token(in), path, 0));
    int maxval = static_cast<int>(parse_int(next_ppm_token(in), path, 0));
    if (w <= 0 || h <= 0) fail(path, "bad image dimensions");
    if (maxval != 255)
        fail(path, "unsupported max value " + std::to_string(maxval) +
                       " (only 255 is handled)");
    int sep = in.get();
    if (sep == EOF || !std::isspace(sep)) fail(path, "missing pixel data separator");

    std::size_t count = static_cast<std::size_t>(w) * h * 3;
    std::vector<unsigned char> bytes(count);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        fail(path, "pixel data is shorter than the header promises");
    if (in.get() != EOF) fail(path, "trailing data after the pixel block");

    ImageBuffer img(w, h);
    for (std::size_t i = 0; i < count; ++i) img.pixels[i] = bytes[i] / 255.0;
    return img;
}

TrainConfig load_train_config(const std::string& path) {
    TrainConfig cfg;
    auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        int ln = static_cast<int>(i) + 1;
        std::string s = lines[i];
        if (auto hash = s.find('#'); hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string::npos) fail(path, ln, "expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty() || value.empty()) fail(path, ln, "expected 'key = value'");

        auto as_int = [&] { return static_cast<int>(parse_int(value, path, ln)); };
        auto as_double = [&] { return parse_double(value, path, ln); };

        if (key == "iterations")
            cfg.iterations = as_int();
        else if (key == "lambda_dssim")
            cfg.lambda_dssim = as_double();
        else if (key == "lr_position_init")
            cfg.lr_position_init = as_double();
        else if (key == "lr_position_final")
            cfg.lr_position_final = as_double();
        else if (key == "lr_scale")
            cfg.lr_scale = as_double();
        else if (key == "lr_rotation")
            cfg.lr_rotation = as_double();
        else if (key == "lr_opacity")
            cfg.lr_opacity = as_double();
        else if (key == "lr_sh")
            cfg.lr_sh = as_double();
        else if (key == "densify_start_iter")
            cfg.densify_start_iter = as_int();
        else if (key == "densify_interval")
            cfg.densify_interval = as_int();
        else if (key == "densify_grad_threshold")
            cfg.densify_grad_threshold = as_double();
        else if (key == "split_scale_factor")
            cfg.split_scale_factor = as_double();
        else if (key == "split_size_threshold_fraction")
            cfg.split_size_threshold_fraction = as_double();
        else if (key == "prune_opacity_threshold")
            cfg.prune_opacity_threshold = as_double();
        else if (key == "opacity_reset_interval")
            cfg.opacity_reset_interval = as_int();
        else if (key == "test_split_every")
            cfg.test_split_every = as_int();
        else if (key == "tile_size")
            cfg.tile_size = as_int();
        else if (key == "random_seed")
            cfg.random_seed = static_cast<std::uint64_t>(parse_int(value, path, ln));
        else if (key == "background_color") {
            std::istringstream iss(value);
            std::string part;
            std::vector<double> parts;
            while (std::getline(iss, part, ','))
                parts.push_back(parse_double(trim(part), path, ln));
            if (parts.size() != 3)
                fail(path, ln, "background_color needs three comma-separated values");
            cfg.background_color = Vec3(parts[0], parts[1], parts[2]);
        } else {
            fail(path, ln, "unknown key '" + key + "'");
        }
    }

    auto errs = check_config(cfg);
    if (!errs.empty()) {
        std::string joined;
        for (const std::string& e : errs) joined += (joined.empty() ? "" : "; ") + e;
        fail(path, "invalid configuration: " + joined);
    }
    return cfg;
}

Camera load_pose(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open file");
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    if (v.size() != 18)
        fail(path, "pose file needs 18 numbers (size, intrinsics, rotation, "
                   "translation), found " +
                       std::to_string(v.size()));
    Camera cam;
    cam.width = static_cast<int>(v[0]);
    cam.height = static_cast<int>(v[1]);
    cam.fx = v[2];
    cam.fy = v[3];
    cam.cx = v[4];
    cam.cy = v[5];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = v[6 + 3 * r + c];
    cam.translation = Vec3(v[15], v[16], v[17]);
    if (auto err = check_camera(cam)) fail(path, *err);
    return cam;
}

void save_transform(const RigidTransform& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    out.precision(17);
    for (int r = 0; r < 3; ++r)
        out << t.rotation(r, 0) << " " << t.rotation(r, 1) << " " << t.rotation(r, 2)
            << "\n";
    out << t.translation[0] << " " << t.translation[1] << " " << t.translation[2]
        << "\n";
    if (!out) fail(path, "write failed");
}

RigidTransform load_transform(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open file");
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    if (v.size() != 12)
        fail(path, "transform file needs 12 numbers, found " +
                       std::to_string(v.size()));
    RigidTransform t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = v[3 * r + c];
    t.translation = Vec3(v[9], v[10], v[11]);
    return t;
}

}  // namespace splat
