#include "ovseg/image.hpp"

#include "ovseg/binary_io.hpp"
#include "ovseg/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace ovseg {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
    data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < data.size(); i += 3) {
        data[i] = fill[0];
        data[i + 1] = fill[1];
        data[i + 2] = fill[2];
    }
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

namespace {

std::vector<std::uint8_t> imencode_png(const cv::Mat& mat) {
    std::vector<std::uint8_t> out;
    // fixed compression level keeps the bytes reproducible
    if (!cv::imencode(".png", mat, out, {cv::IMWRITE_PNG_COMPRESSION, 6}))
        throw Error(ErrorCode::IoFailure, "PNG encoding failed");
    return out;
}

cv::Mat decode_mat(std::span<const std::uint8_t> bytes, int flags) {
    if (bytes.empty()) throw Error(ErrorCode::IoFailure, "empty PNG buffer");
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img = cv::imdecode(buf, flags);
    if (img.empty()) throw Error(ErrorCode::IoFailure, "undecodable image");
    return img;
}

} // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    cv::Mat bgr(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            auto c = img.at(x, y);
            bgr.at<cv::Vec3b>(y, x) = {c[2], c[1], c[0]};
        }
    return imencode_png(bgr);
}

RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes) {
    cv::Mat img = decode_mat(bytes, cv::IMREAD_COLOR);
    RgbImage out(img.cols, img.rows);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) {
            auto c = img.at<cv::Vec3b>(y, x);
            out.set(x, y, {c[2], c[1], c[0]});
        }
    return out;
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) {
    cv::Mat m(mask.height, mask.width, CV_8UC1);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask.at(x, y) ? 255 : 0;
    return imencode_png(m);
}

Mask decode_mask_png(std::span<const std::uint8_t> bytes) {
    cv::Mat img = decode_mat(bytes, cv::IMREAD_GRAYSCALE);
    Mask out(img.cols, img.rows);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) out.set(x, y, img.at<std::uint8_t>(y, x) != 0);
    return out;
}

RgbImage read_rgb_png(const std::filesystem::path& path) { return decode_rgb_png(read_file_bytes(path)); }

void write_rgb_png(const std::filesystem::path& path, const RgbImage& img) {
    write_file_bytes(path, encode_png(img));
}

DepthImage read_depth_png(const std::filesystem::path& path) {
    cv::Mat img = decode_mat(read_file_bytes(path), cv::IMREAD_UNCHANGED);
    if (img.type() != CV_16UC1)
        throw Error(ErrorCode::MalformedManifest, "depth image is not 16-bit single channel: " + path.string());
    DepthImage out(img.cols, img.rows);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) out.at(x, y) = static_cast<float>(img.at<std::uint16_t>(y, x)) / 1000.0f;
    return out;
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& depth) {
    cv::Mat m(depth.height, depth.width, CV_16UC1);
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            double mm = std::floor(static_cast<double>(depth.at(x, y)) * 1000.0 + 0.5);
            m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
        }
    write_file_bytes(path, imencode_png(m));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw Error(ErrorCode::InvalidArgument, "base64 length not a multiple of 4");
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) throw Error(ErrorCode::InvalidArgument, "invalid base64");
    // EVP_DecodeBlock keeps the padding bytes as zeros
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

} // namespace ovseg
