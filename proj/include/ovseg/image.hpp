#pragma once

#include "ovseg/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ovseg {

/// Row-major 8-bit RGB image.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // width * height * 3

    RgbImage() = default;
    RgbImage(int w, int h, Rgb fill = {0, 0, 0});

    Rgb at(int x, int y) const {
        auto i = 3 * (static_cast<std::size_t>(y) * width + x);
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        auto i = 3 * (static_cast<std::size_t>(y) * width + x);
        data[i] = c[0];
        data[i + 1] = c[1];
        data[i + 2] = c[2];
    }
    bool empty() const { return width == 0 || height == 0; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Per-pixel camera-frame depth (z along the optical axis), meters; 0 = invalid.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    DepthImage() = default;
    DepthImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f) {}

    float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

/// Binary mask, one byte per pixel (0 or 1).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool on) { data[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }
    std::size_t count() const;

    friend bool operator==(const Mask&, const Mask&) = default;
};

std::vector<std::uint8_t> encode_png(const RgbImage& img);
RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes);

/// Masks travel as single-channel PNGs with values 0/255; any nonzero decodes as set.
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);
Mask decode_mask_png(std::span<const std::uint8_t> bytes);

RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& img);

/// 16-bit single-channel PNG in millimeters, 0 = invalid.
DepthImage read_depth_png(const std::filesystem::path& path);
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

} // namespace ovseg
