#include "ovseg/hash.hpp"

#include "ovseg/error.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace ovseg {

struct ContentHasher::Impl {
    EVP_MD_CTX* ctx = nullptr;
    ~Impl() { EVP_MD_CTX_free(ctx); }
};

ContentHasher::ContentHasher() : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr);
}

ContentHasher::~ContentHasher() = default;
ContentHasher::ContentHasher(ContentHasher&&) noexcept = default;
ContentHasher& ContentHasher::operator=(ContentHasher&&) noexcept = default;

ContentHasher& ContentHasher::bytes(std::span<const std::uint8_t> data) {
    EVP_DigestUpdate(impl_->ctx, data.data(), data.size());
    return *this;
}

ContentHasher& ContentHasher::text(std::string_view s) {
    // length prefix keeps ("ab","c") and ("a","bc") apart
    u64(s.size());
    EVP_DigestUpdate(impl_->ctx, s.data(), s.size());
    return *this;
}

ContentHasher& ContentHasher::u64(std::uint64_t v) {
    std::uint8_t buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
    EVP_DigestUpdate(impl_->ctx, buf, 8);
    return *this;
}

ContentHasher& ContentHasher::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

ContentHasher& ContentHasher::file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    std::vector<char> buf(1 << 16);
    std::uint64_t total = 0;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        auto n = in.gcount();
        if (n > 0) {
            EVP_DigestUpdate(impl_->ctx, buf.data(), static_cast<std::size_t>(n));
            total += static_cast<std::uint64_t>(n);
        }
    }
    return u64(total);
}

std::array<std::uint8_t, 32> ContentHasher::digest() {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(impl_->ctx, out.data(), &len);
    EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr);
    return out;
}

std::string ContentHasher::hex_digest() {
    static constexpr char digits[] = "0123456789abcdef";
    auto d = digest();
    std::string s;
    s.reserve(64);
    for (auto b : d) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

std::string sha256_hex(std::string_view data) {
    ContentHasher h;
    h.bytes({reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
    return h.hex_digest();
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
    ContentHasher h;
    h.u64(master).text(stage);
    auto d = h.digest();
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(d[i]) << (8 * i);
    return seed;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b * 0xbf58476d1ce4e5b9ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace ovseg
