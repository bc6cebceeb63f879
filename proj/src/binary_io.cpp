#include "ovseg/binary_io.hpp"

#include <fstream>

namespace ovseg {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    in.seekg(0, std::ios::end);
    auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> data(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size)))
        throw Error(ErrorCode::IoFailure, "short read: " + path.string());
    return data;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "rename failed: " + path.string());
}

void BinaryWriter::save(const std::filesystem::path& path) const { write_file_bytes(path, buf_); }

BinaryReader BinaryReader::from_file(const std::filesystem::path& path) {
    return BinaryReader(read_file_bytes(path));
}

void BinaryReader::expect_header(CacheKind kind) {
    need(4);
    if (std::memcmp(data_.data() + pos_, "OVSG", 4) != 0) fail("bad magic");
    pos_ += 4;
    auto version = get<std::uint32_t>();
    if (version != kCacheFormatVersion)
        throw Error(ErrorCode::VersionMismatch, "cache version " + std::to_string(version) +
                                                    ", expected " + std::to_string(kCacheFormatVersion));
    auto k = get<std::uint32_t>();
    if (k != static_cast<std::uint32_t>(kind)) fail("unexpected payload kind " + std::to_string(k));
}

} // namespace ovseg
