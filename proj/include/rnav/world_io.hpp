#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "rnav/world.hpp"

namespace rnav {

inline constexpr std::uint32_t kWorldJsonVersion = 1;
inline constexpr std::uint32_t kVoxelVersion = 1;

nlohmann::json world_to_json(const World& world, const nlohmann::json& meta = nullptr);
World world_from_json(const nlohmann::json& j);

/// Primitive worlds go to JSON, imported worlds to the RNVX voxel format.
/// `meta` is embedded verbatim in JSON output (tool version, effective config).
void export_world(const World& world, const std::filesystem::path& path, const nlohmann::json& meta = nullptr);
/// Sniffs the RNVX magic; anything else is parsed as world JSON.
World import_world(const std::filesystem::path& path);

/// RNVX layout, little-endian: "RNVX", u32 version, 3 x u32 dims, f32 cell size,
/// 3 x f32 origin, then ceil(n/8) bytes of occupancy bits (LSB first) in
/// row-major order with k fastest.
std::string encode_voxels(const VoxelGrid& grid);
VoxelGrid decode_voxels(const std::string& bytes);
void write_voxels(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid read_voxels(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Little-endian byte stream helpers shared by every binary format.
class ByteWriter {
public:
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f32(float v);
    void f64(double v);
    void bytes(const std::string& s) { out_ += s; }
    const std::string& str() const { return out_; }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& data) : data_(data) {}
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    float f32();
    double f64();
    std::string bytes(std::size_t n);
    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const;
    const std::string& data_;
    std::size_t pos_ = 0;
};

}  // namespace rnav
