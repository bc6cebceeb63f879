#pragma once

#include "ovseg/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace ovseg {

inline constexpr std::uint32_t kCacheFormatVersion = 1;

/// Payload kinds stored after the "OVSG" magic and version tag.
enum class CacheKind : std::uint32_t {
    Scene = 1,
    Graph = 2,
    Visibility = 3,
    Features = 4,
    MergeCheckpoint = 5,
    MergedState = 6,
};

/// Little-endian byte sink.
class BinaryWriter {
  public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        U bits;
        std::memcpy(&bits, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_array(std::span<const T> values) {
        put<std::uint64_t>(values.size());
        if constexpr (std::endian::native == std::endian::little) {
            auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
            buf_.insert(buf_.end(), p, p + values.size_bytes());
        } else {
            for (auto v : values) put(v);
        }
    }

    void put_string(std::string_view s) {
        put<std::uint64_t>(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    void put_header(CacheKind kind) {
        buf_.insert(buf_.end(), {'O', 'V', 'S', 'G'});
        put<std::uint32_t>(kCacheFormatVersion);
        put<std::uint32_t>(static_cast<std::uint32_t>(kind));
    }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }

    /// Writes through a temporary file and renames, so readers never see a torn file.
    void save(const std::filesystem::path& path) const;

  private:
    std::vector<std::uint8_t> buf_;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

    static BinaryReader from_file(const std::filesystem::path& path);

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        need(sizeof(T));
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, &bits, sizeof(T));
        return value;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    std::vector<T> get_array() {
        auto n = get<std::uint64_t>();
        if (n > (data_.size() - pos_) / sizeof(T)) fail("array length out of range");
        std::vector<T> out(n);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(out.data(), data_.data() + pos_, n * sizeof(T));
            pos_ += n * sizeof(T);
        } else {
            for (auto& v : out) v = get<T>();
        }
        return out;
    }

    std::string get_string() {
        auto n = get<std::uint64_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    /// Validates magic, version tag and payload kind.
    void expect_header(CacheKind kind);

    bool at_end() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const {
        if (n > data_.size() - pos_) fail("unexpected end of data");
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::CorruptCache, what);
    }

    std::vector<std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace ovseg
