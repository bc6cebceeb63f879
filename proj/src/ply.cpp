#include "ovseg/ply.hpp"

#include "ovseg/binary_io.hpp"
#include "ovseg/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <sstream>

namespace ovseg {

namespace {

std::optional<PlyType> parse_type(const std::string& s) {
    if (s == "char" || s == "int8") return PlyType::Int8;
    if (s == "uchar" || s == "uint8") return PlyType::UInt8;
    if (s == "short" || s == "int16") return PlyType::Int16;
    if (s == "ushort" || s == "uint16") return PlyType::UInt16;
    if (s == "int" || s == "int32") return PlyType::Int32;
    if (s == "uint" || s == "uint32") return PlyType::UInt32;
    if (s == "float" || s == "float32") return PlyType::Float32;
    if (s == "double" || s == "float64") return PlyType::Float64;
    return std::nullopt;
}

const char* type_name(PlyType t) {
    switch (t) {
    case PlyType::Int8: return "char";
    case PlyType::UInt8: return "uchar";
    case PlyType::Int16: return "short";
    case PlyType::UInt16: return "ushort";
    case PlyType::Int32: return "int";
    case PlyType::UInt32: return "uint";
    case PlyType::Float32: return "float";
    case PlyType::Float64: return "double";
    }
    return "double";
}

std::size_t type_size(PlyType t) {
    switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
    }
    return 8;
}

struct Property {
    std::string name;
    PlyType type;
    bool is_list = false;
    PlyType count_type = PlyType::UInt8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
};

enum class Format { Ascii, LittleEndian, BigEndian };

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& what) {
    throw Error(ErrorCode::MalformedManifest, path.string() + ": " + what);
}

class Cursor {
  public:
    Cursor(const std::vector<std::uint8_t>& data, std::size_t pos, Format fmt, const std::filesystem::path& path)
        : data_(data), pos_(pos), fmt_(fmt), path_(path) {}

    double read(PlyType t) {
        if (fmt_ == Format::Ascii) return read_ascii();
        auto n = type_size(t);
        if (pos_ + n > data_.size()) malformed(path_, "truncated binary body");
        std::uint8_t b[8];
        std::memcpy(b, data_.data() + pos_, n);
        pos_ += n;
        bool swap = (fmt_ == Format::BigEndian) != (std::endian::native == std::endian::big);
        if (swap) std::reverse(b, b + n);
        switch (t) {
        case PlyType::Int8: return static_cast<std::int8_t>(b[0]);
        case PlyType::UInt8: return b[0];
        case PlyType::Int16: { std::int16_t v; std::memcpy(&v, b, 2); return v; }
        case PlyType::UInt16: { std::uint16_t v; std::memcpy(&v, b, 2); return v; }
        case PlyType::Int32: { std::int32_t v; std::memcpy(&v, b, 4); return v; }
        case PlyType::UInt32: { std::uint32_t v; std::memcpy(&v, b, 4); return v; }
        case PlyType::Float32: { float v; std::memcpy(&v, b, 4); return v; }
        case PlyType::Float64: { double v; std::memcpy(&v, b, 8); return v; }
        }
        return 0.0;
    }

  private:
    double read_ascii() {
        while (pos_ < data_.size() && std::isspace(data_[pos_])) ++pos_;
        auto start = pos_;
        while (pos_ < data_.size() && !std::isspace(data_[pos_])) ++pos_;
        if (start == pos_) malformed(path_, "truncated ascii body");
        std::string tok(reinterpret_cast<const char*>(data_.data() + start), pos_ - start);
        try {
            return std::stod(tok);
        } catch (const std::exception&) {
            malformed(path_, "bad number '" + tok + "'");
        }
    }

    const std::vector<std::uint8_t>& data_;
    std::size_t pos_;
    Format fmt_;
    const std::filesystem::path& path_;
};

} // namespace

const std::vector<double>& PlyTable::column(const std::string& name) const {
    auto it = vertex.find(name);
    if (it == vertex.end()) throw Error(ErrorCode::MalformedManifest, "PLY lacks vertex property " + name);
    return it->second;
}

PlyTable read_ply(const std::filesystem::path& path) {
    auto data = read_file_bytes(path);
    // header is ascii up to and including the "end_header" line
    std::size_t pos = 0;
    auto next_line = [&]() -> std::optional<std::string> {
        if (pos >= data.size()) return std::nullopt;
        auto start = pos;
        while (pos < data.size() && data[pos] != '\n') ++pos;
        std::string line(reinterpret_cast<const char*>(data.data() + start), pos - start);
        if (pos < data.size()) ++pos;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    auto magic = next_line();
    if (!magic || *magic != "ply") malformed(path, "missing 'ply' magic");

    Format fmt = Format::Ascii;
    std::vector<Element> elements;
    bool ended = false;
    while (auto line = next_line()) {
        std::istringstream ss(*line);
        std::string kw;
        ss >> kw;
        if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            std::string f;
            ss >> f;
            if (f == "ascii") fmt = Format::Ascii;
            else if (f == "binary_little_endian") fmt = Format::LittleEndian;
            else if (f == "binary_big_endian") fmt = Format::BigEndian;
            else malformed(path, "unknown format " + f);
        } else if (kw == "element") {
            Element e;
            ss >> e.name >> e.count;
            if (!ss) malformed(path, "bad element line");
            elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (elements.empty()) malformed(path, "property before element");
            std::string t;
            ss >> t;
            Property p;
            if (t == "list") {
                std::string ct, it;
                ss >> ct >> it >> p.name;
                auto c = parse_type(ct);
                auto i = parse_type(it);
                if (!c || !i) malformed(path, "bad list types");
                p.is_list = true;
                p.count_type = *c;
                p.type = *i;
            } else {
                auto ty = parse_type(t);
                if (!ty) malformed(path, "unknown property type " + t);
                p.type = *ty;
                ss >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (kw == "end_header") {
            ended = true;
            break;
        } else {
            malformed(path, "unexpected header keyword " + kw);
        }
    }
    if (!ended) malformed(path, "missing end_header");

    PlyTable table;
    Cursor cur(data, pos, fmt, path);
    for (const auto& e : elements) {
        const bool is_vertex = e.name == "vertex";
        const bool is_face = e.name == "face";
        if (is_vertex) {
            table.vertex_count = e.count;
            for (const auto& p : e.props) {
                if (p.is_list) continue;
                table.property_order.push_back(p.name);
                table.vertex[p.name].reserve(e.count);
                table.types[p.name] = p.type;
            }
        }
        for (std::size_t i = 0; i < e.count; ++i) {
            for (const auto& p : e.props) {
                if (p.is_list) {
                    auto n = static_cast<std::size_t>(cur.read(p.count_type));
                    std::vector<std::uint32_t> idx(n);
                    for (auto& v : idx) v = static_cast<std::uint32_t>(cur.read(p.type));
                    if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
                        for (std::size_t k = 1; k + 1 < n; ++k) table.triangles.push_back({idx[0], idx[k], idx[k + 1]});
                    }
                } else {
                    double v = cur.read(p.type);
                    if (is_vertex) table.vertex[p.name].push_back(v);
                }
            }
        }
    }
    return table;
}

void write_ply(const std::filesystem::path& path, const std::vector<PlyColumn>& columns,
               const std::vector<std::array<std::uint32_t, 3>>& triangles) {
    std::size_t n = columns.empty() ? 0 : columns.front().values.size();
    for (const auto& c : columns)
        if (c.values.size() != n) throw Error(ErrorCode::InvalidArgument, "PLY column length mismatch: " + c.name);

    std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(n) + "\n";
    for (const auto& c : columns) header += std::string("property ") + type_name(c.type) + " " + c.name + "\n";
    if (!triangles.empty())
        header += "element face " + std::to_string(triangles.size()) + "\nproperty list uchar uint vertex_indices\n";
    header += "end_header\n";

    BinaryWriter w;
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& c : columns) {
            double v = c.values[i];
            switch (c.type) {
            case PlyType::Int8: w.put(static_cast<std::int8_t>(v)); break;
            case PlyType::UInt8: w.put(static_cast<std::uint8_t>(v)); break;
            case PlyType::Int16: w.put(static_cast<std::int16_t>(v)); break;
            case PlyType::UInt16: w.put(static_cast<std::uint16_t>(v)); break;
            case PlyType::Int32: w.put(static_cast<std::int32_t>(v)); break;
            case PlyType::UInt32: w.put(static_cast<std::uint32_t>(v)); break;
            case PlyType::Float32: w.put(static_cast<float>(v)); break;
            case PlyType::Float64: w.put(v); break;
            }
        }
    }
    for (const auto& t : triangles) {
        w.put<std::uint8_t>(3);
        for (auto v : t) w.put<std::uint32_t>(v);
    }
    out.insert(out.end(), w.bytes().begin(), w.bytes().end());
    write_file_bytes(path, out);
}

} // namespace ovseg
