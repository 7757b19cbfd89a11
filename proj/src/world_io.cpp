#include "rnav/world_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rnav {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void ByteWriter::u32(std::uint32_t v) { out_.append(reinterpret_cast<const char*>(&v), 4); }
void ByteWriter::u64(std::uint64_t v) { out_.append(reinterpret_cast<const char*>(&v), 8); }
void ByteWriter::f32(float v) { out_.append(reinterpret_cast<const char*>(&v), 4); }
void ByteWriter::f64(double v) { out_.append(reinterpret_cast<const char*>(&v), 8); }

void ByteReader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
        throw ParseError("truncated input at byte offset " + std::to_string(pos_));
    }
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, data_.data() + pos_, 8);
    pos_ += 8;
    return v;
}

float ByteReader::f32() {
    need(4);
    float v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
}

double ByteReader::f64() {
    need(8);
    double v;
    std::memcpy(&v, data_.data() + pos_, 8);
    pos_ += 8;
    return v;
}

std::string ByteReader::bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Primitive primitive_from_json(const json& j, std::size_t index) {
    const std::string kind = j.at("kind").get<std::string>();
    const Vec3 center = json_vec(j.at("center"), "center");
    if (kind == "sphere") return Primitive::sphere(center, j.at("radius").get<double>());
    if (kind == "box") return Primitive::box(center, json_vec(j.at("half_extents"), "half_extents"));
    if (kind == "wall") {
        const int axis = j.at("axis").get<int>();
        if (axis < 0 || axis > 2) throw ParseError("wall axis must be 0, 1 or 2");
        const auto& size = j.at("size");
        if (!size.is_array() || size.size() != 2) throw ParseError("wall size must be a 2-element array");
        return Primitive::wall(center, axis, j.at("thickness").get<double>(),
                               {size[0].get<double>(), size[1].get<double>()});
    }
    throw ParseError("primitive " + std::to_string(index) + " has unknown kind '" + kind + "'");
}

json primitive_to_json(const Primitive& p) {
    json j{{"kind", to_string(p.kind)}, {"center", vec_json(p.center)}};
    switch (p.kind) {
        case PrimitiveKind::sphere: j["radius"] = p.radius; break;
        case PrimitiveKind::box: j["half_extents"] = vec_json(p.half_extents); break;
        case PrimitiveKind::wall: {
            const int u = p.axis == 0 ? 1 : 0;
            const int v = p.axis == 2 ? 1 : 2;
            j["axis"] = p.axis;
            j["thickness"] = 2.0 * p.half_extents[p.axis];
            j["size"] = json::array({2.0 * p.half_extents[u], 2.0 * p.half_extents[v]});
            break;
        }
    }
    return j;
}

std::string line_and_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

json world_to_json(const World& world, const json& meta) {
    if (world.voxels()) throw ConfigError("voxel-backed worlds are exported in the RNVX format");
    json prims = json::array();
    for (const auto& p : world.primitives()) prims.push_back(primitive_to_json(p));
    json j{{"version", kWorldJsonVersion},
           {"kind", to_string(world.kind())},
           {"seed", world.seed()},
           {"bounds", {{"min", vec_json(world.bounds().min)}, {"max", vec_json(world.bounds().max)}}},
           {"primitives", std::move(prims)}};
    if (!meta.is_null()) j["meta"] = meta;
    return j;
}

World world_from_json(const json& j) {
    try {
        const auto version = j.at("version").get<std::uint32_t>();
        if (version != kWorldJsonVersion) {
            throw VersionError("world JSON version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(kWorldJsonVersion) + ")");
        }
        const WorldKind kind = world_kind_from_string(j.at("kind").get<std::string>());
        if (kind == WorldKind::imported) throw ParseError("world JSON cannot carry kind 'imported'");
        const Aabb bounds{json_vec(j.at("bounds").at("min"), "bounds.min"), json_vec(j.at("bounds").at("max"), "bounds.max")};
        std::vector<Primitive> prims;
        const auto& arr = j.at("primitives");
        if (!arr.is_array()) throw ParseError("primitives must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) prims.push_back(primitive_from_json(arr[i], i));
        return World(bounds, std::move(prims), j.at("seed").get<std::uint64_t>(), kind);
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid world JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(std::string("invalid world JSON: ") + e.what());
    }
}

std::string encode_voxels(const VoxelGrid& grid) {
    ByteWriter w;
    w.bytes("RNVX");
    w.u32(kVoxelVersion);
    for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(grid.dims[a]));
    w.f32(static_cast<float>(grid.cell_size));
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(grid.origin[a]));
    std::string bits((grid.size() + 7) / 8, '\0');
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.occupied[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
    }
    w.bytes(bits);
    return w.str();
}

VoxelGrid decode_voxels(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.bytes(4) != "RNVX") throw ParseError("bad voxel magic at byte offset 0");
    const auto version = r.u32();
    if (version != kVoxelVersion) throw VersionError("voxel format version " + std::to_string(version) + " is not supported");
    VoxelGrid g;
    for (int a = 0; a < 3; ++a) {
        const auto d = r.u32();
        if (d == 0 || d > (1u << 16)) throw ParseError("voxel dims out of range at byte offset " + std::to_string(r.offset() - 4));
        g.dims[a] = static_cast<int>(d);
    }
    g.cell_size = r.f32();
    if (!(g.cell_size > 0.0)) throw ParseError("voxel cell size must be positive");
    for (int a = 0; a < 3; ++a) g.origin[a] = r.f32();
    const std::string bits = r.bytes((g.size() + 7) / 8);
    if (!r.done()) throw ParseError("trailing bytes after voxel payload at byte offset " + std::to_string(r.offset()));
    g.occupied.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) g.occupied[i] = (static_cast<unsigned char>(bits[i / 8]) >> (i % 8)) & 1u;
    return g;
}

void write_voxels(const VoxelGrid& grid, const std::filesystem::path& path) { write_file(path, encode_voxels(grid)); }

VoxelGrid read_voxels(const std::filesystem::path& path) { return decode_voxels(read_file(path)); }

void export_world(const World& world, const std::filesystem::path& path, const json& meta) {
    if (world.voxels()) {
        write_voxels(*world.voxels(), path);
        return;
    }
    write_file(path, world_to_json(world, meta).dump(2) + "\n");
}

World import_world(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    if (text.rfind("RNVX", 0) == 0) return World(decode_voxels(text));
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + line_and_column(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
    }
    return world_from_json(j);
}

}  // namespace rnav
