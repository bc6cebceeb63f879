#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace ovseg {

/// Incremental SHA-256 used for content-addressed cache keys.
class ContentHasher {
  public:
    ContentHasher();
    ~ContentHasher();
    ContentHasher(ContentHasher&&) noexcept;
    ContentHasher& operator=(ContentHasher&&) noexcept;

    ContentHasher& bytes(std::span<const std::uint8_t> data);
    ContentHasher& text(std::string_view s);
    ContentHasher& u64(std::uint64_t v);
    ContentHasher& f64(double v);
    ContentHasher& file(const std::filesystem::path& path);

    std::array<std::uint8_t, 32> digest();
    std::string hex_digest();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view data);

/// Stage-local seed: the first eight digest bytes of (master seed, stage name).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

/// splitmix64 finalizer; mixes several integers into one well-spread seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

} // namespace ovseg
