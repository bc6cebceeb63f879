#include "ovseg/synthetic_provider.hpp"

#include "ovseg/error.hpp"
#include "ovseg/hash.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <string>

namespace ovseg {

namespace {

const std::map<std::string, int>& color_words() {
    static const std::map<std::string, int> words = {
        {"red", 0},     {"orange", 1},    {"yellow", 2}, {"lime", 3},   {"green", 4},   {"teal", 5},
        {"cyan", 6},    {"azure", 7},     {"blue", 8},   {"purple", 9}, {"violet", 9},  {"magenta", 10},
        {"pink", 11},   {"black", 12},    {"gray", 13},  {"grey", 13},  {"silver", 14}, {"white", 15},
    };
    return words;
}

} // namespace

SyntheticProvider::SyntheticProvider(std::size_t dim, int color_tolerance) : dim_(dim), tolerance_(color_tolerance) {
    if (dim < 8) throw Error(ErrorCode::InvalidArgument, "synthetic provider needs dim >= 8");
}

int SyntheticProvider::color_bin(Rgb c) {
    if (c[0] == 255 && c[1] == 255 && c[2] == 255) return -1;
    const double r = c[0] / 255.0, g = c[1] / 255.0, b = c[2] / 255.0;
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double v = mx;
    const double s = mx > 0 ? (mx - mn) / mx : 0.0;
    if (s >= 0.25 && v >= 0.2) {
        double h;
        const double d = mx - mn;
        if (mx == r) h = 60.0 * std::fmod((g - b) / d, 6.0);
        else if (mx == g) h = 60.0 * ((b - r) / d + 2.0);
        else h = 60.0 * ((r - g) / d + 4.0);
        if (h < 0) h += 360.0;
        return static_cast<int>(std::floor((h + 15.0) / 30.0)) % 12;
    }
    if (v < 0.25) return 12;
    if (v < 0.55) return 13;
    if (v < 0.85) return 14;
    return 15;
}

FeatureVector SyntheticProvider::embed_image(const RgbImage& image) {
    std::vector<double> hist(dim_, 0.0);
    bool any = false;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            int bin = color_bin(image.at(x, y));
            if (bin < 0) continue;
            hist[static_cast<std::size_t>(bin) % dim_] += 1.0;
            any = true;
        }
    if (!any) hist[15 % dim_] = 1.0; // blank crop embeds as white
    return FeatureVector(std::move(hist));
}

FeatureVector SyntheticProvider::embed_text(std::string_view text) {
    std::vector<double> v(dim_, 0.0);
    bool any = false;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        if (auto it = color_words().find(word); it != color_words().end()) {
            v[static_cast<std::size_t>(it->second) % dim_] += 1.0;
            any = true;
        }
        word.clear();
    };
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        else flush();
    }
    flush();
    if (any) return FeatureVector(std::move(v));

    std::mt19937_64 rng(derive_seed(0x5eed, text));
    for (auto& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    return FeatureVector(std::move(v));
}

Mask SyntheticProvider::segment(const RgbImage& image, std::span<const Pixel> prompts) {
    Mask mask(image.width, image.height);
    std::vector<std::pair<int, int>> stack;
    for (const auto& p : prompts) {
        if (!(p.u >= 0 && p.v >= 0 && p.u < image.width && p.v < image.height))
            throw Error(ErrorCode::InvalidArgument, "prompt outside the image");
        // nearest pixel center, clamped like the depth lookup
        int sx = std::min(static_cast<int>(std::floor(p.u + 0.5)), image.width - 1);
        int sy = std::min(static_cast<int>(std::floor(p.v + 0.5)), image.height - 1);
        const Rgb seed = image.at(sx, sy);
        auto close = [&](int x, int y) {
            auto c = image.at(x, y);
            for (std::size_t k = 0; k < 3; ++k)
                if (std::abs(int(c[k]) - int(seed[k])) > tolerance_) return false;
            return true;
        };
        // per-prompt visited set so overlapping fills from different seeds stay independent
        Mask filled(image.width, image.height);
        stack.assign(1, {sx, sy});
        filled.set(sx, sy, true);
        while (!stack.empty()) {
            auto [x, y] = stack.back();
            stack.pop_back();
            mask.set(x, y, true);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || ny[k] < 0 || nx[k] >= image.width || ny[k] >= image.height) continue;
                if (filled.at(nx[k], ny[k]) || !close(nx[k], ny[k])) continue;
                filled.set(nx[k], ny[k], true);
                stack.emplace_back(nx[k], ny[k]);
            }
        }
    }
    return mask;
}

ProviderInfo SyntheticProvider::info() {
    return {dim_, "synthetic-" + std::to_string(dim_), "synthetic-histogram", "synthetic-color-words", 0};
}

} // namespace ovseg
