#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ovseg {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

/// Column-oriented view of a PLY file: the vertex element's scalar properties
/// by name, plus triangulated faces when a face element is present.
struct PlyTable {
    std::size_t vertex_count = 0;
    std::vector<std::string> property_order;
    std::map<std::string, std::vector<double>> vertex;
    std::map<std::string, PlyType> types;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    bool has(const std::string& name) const { return vertex.count(name) != 0; }
    const std::vector<double>& column(const std::string& name) const;
};

/// Accepts ascii, binary_little_endian and binary_big_endian. Polygon faces are fan-triangulated.
PlyTable read_ply(const std::filesystem::path& path);

struct PlyColumn {
    std::string name;
    PlyType type;
    std::vector<double> values;
};

/// Writes a binary little-endian PLY. Output bytes depend only on the inputs.
void write_ply(const std::filesystem::path& path, const std::vector<PlyColumn>& columns,
               const std::vector<std::array<std::uint32_t, 3>>& triangles = {});

} // namespace ovseg
