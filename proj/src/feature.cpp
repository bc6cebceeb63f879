#include "ovseg/feature.hpp"

#include "ovseg/error.hpp"
#include "ovseg/hash.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace ovseg {

FeatureVector::FeatureVector(std::vector<double> values) : values_(std::move(values)) {
    double n2 = 0.0;
    for (double v : values_) n2 += v * v;
    const double n = std::sqrt(n2);
    if (!(n > 0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "feature vector has zero or non-finite norm");
    for (double& v : values_) v /= n;
}

FeatureVector FeatureVector::from_unit(std::vector<double> values) {
    double n2 = 0.0;
    for (double v : values) n2 += v * v;
    if (!(std::abs(std::sqrt(n2) - 1.0) <= 1e-6)) throw Error(ErrorCode::CorruptCache, "stored feature is not unit-norm");
    FeatureVector f;
    f.values_ = std::move(values);
    return f;
}

void FeatureConfig::validate() const {
    if (prompts_per_view < 1) throw Error(ErrorCode::InvalidConfig, "prompts_per_view must be >= 1");
    if (!(crop_padding >= 0)) throw Error(ErrorCode::InvalidConfig, "crop_padding must be >= 0");
    if (min_mask_pixels < 1) throw Error(ErrorCode::InvalidConfig, "min_mask_pixels must be >= 1");
    if (max_in_flight < 1) throw Error(ErrorCode::InvalidConfig, "max_in_flight must be >= 1");
}

namespace {

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        auto r = rng();
        if (r >= threshold) return r % n;
    }
}

} // namespace

std::vector<Pixel> sample_prompts(std::span<const VisiblePoint> visible, int m, std::uint64_t seed) {
    if (visible.empty()) throw Error(ErrorCode::NoVisiblePoints, "no visible points to sample prompts from");
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "prompt count must be >= 1");
    const auto take = std::min(static_cast<std::size_t>(m), visible.size());
    std::vector<std::size_t> idx(visible.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::vector<Pixel> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        auto j = i + uniform_below(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(visible[idx[i]].pixel);
    }
    return out;
}

PixelRect crop_rect(const Mask& mask, double padding, int min_mask_pixels) {
    int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
    std::size_t count = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                ++count;
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    if (count == 0 || count < static_cast<std::size_t>(min_mask_pixels))
        throw Error(ErrorCode::EmptyMask, "mask has " + std::to_string(count) + " pixels");
    const double w = x1 - x0 + 1, h = y1 - y0 + 1;
    const int pad = static_cast<int>(std::floor(padding * std::sqrt(w * w + h * h) + 0.5));
    x0 = std::max(0, x0 - pad);
    y0 = std::max(0, y0 - pad);
    x1 = std::min(mask.width - 1, x1 + pad);
    y1 = std::min(mask.height - 1, y1 + pad);
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

RgbImage masked_crop(const RgbImage& image, const Mask& mask, double padding, int min_mask_pixels) {
    if (mask.width != image.width || mask.height != image.height)
        throw Error(ErrorCode::DimensionMismatch, "mask and image sizes differ");
    auto r = crop_rect(mask, padding, min_mask_pixels);
    RgbImage out(r.width, r.height, {255, 255, 255});
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            if (mask.at(r.x + x, r.y + y)) out.set(x, y, image.at(r.x + x, r.y + y));
    return out;
}

FeatureVector mean_feature(std::span<const FeatureVector> vectors) {
    if (vectors.empty()) throw Error(ErrorCode::InvalidArgument, "mean of no features");
    std::vector<double> sum(vectors.front().dim(), 0.0);
    for (const auto& f : vectors) {
        if (f.dim() != sum.size()) throw Error(ErrorCode::DimMismatch, "features of different dimension");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f[i];
    }
    for (double& v : sum) v /= static_cast<double>(vectors.size());
    return FeatureVector(std::move(sum));
}

std::optional<FeatureVector> extract_superpoint_feature(SuperpointId sp, const VisibilityTable& table,
                                                        std::span<const CameraView> views, FeatureProvider& provider,
                                                        const FeatureConfig& cfg, const ExtractionOptions& opts,
                                                        std::vector<CropSpec>* crops) {
    std::vector<FeatureVector> embeddings;
    for (auto vi : top_k_views(table, sp, opts.top_k, opts.min_visible)) {
        const auto& view = views[vi];
        const auto visible = table.points(sp, vi);
        if (visible.empty()) continue;
        auto prompts = sample_prompts(visible, cfg.prompts_per_view, mix_seed(mix_seed(cfg.seed, sp), vi));
        Mask mask = provider.segment(view.rgb, prompts);
        if (mask.width != view.rgb.width || mask.height != view.rgb.height)
            throw Error(ErrorCode::ProviderProtocol, "segmenter returned a mask of the wrong size");
        RgbImage crop;
        PixelRect rect;
        try {
            rect = crop_rect(mask, cfg.crop_padding, cfg.min_mask_pixels);
            crop = masked_crop(view.rgb, mask, cfg.crop_padding, cfg.min_mask_pixels);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::EmptyMask) continue;
            throw;
        }
        embeddings.push_back(provider.embed_image(crop));
        if (crops) {
            Mask sub(rect.width, rect.height);
            for (int y = 0; y < rect.height; ++y)
                for (int x = 0; x < rect.width; ++x) sub.set(x, y, mask.at(rect.x + x, rect.y + y));
            crops->push_back({view.view_id, rect, std::move(sub), std::move(prompts)});
        }
    }
    if (embeddings.empty()) return std::nullopt;
    return mean_feature(embeddings);
}

FeatureMap extract_features(std::span<const SuperpointId> sps, const VisibilityTable& table,
                            std::span<const CameraView> views, FeatureProvider& provider, const FeatureConfig& cfg,
                            const ExtractionOptions& opts) {
    cfg.validate();
    if (views.empty()) throw Error(ErrorCode::NoViews, "feature extraction needs at least one view");
    int workers = cfg.max_in_flight;
    if (auto limit = provider.info().max_in_flight; limit > 0) workers = std::min(workers, limit);
    workers = std::max(1, std::min<int>(workers, static_cast<int>(sps.size())));

    std::vector<std::optional<FeatureVector>> results(sps.size());
    std::vector<std::exception_ptr> errors(sps.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (;;) {
            auto i = next.fetch_add(1);
            if (i >= sps.size() || failed.load()) return;
            try {
                results[i] = extract_superpoint_feature(sps[i], table, views, provider, cfg, opts);
            } catch (...) {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    FeatureMap out;
    for (std::size_t i = 0; i < sps.size(); ++i)
        if (results[i]) out.emplace(sps[i], std::move(*results[i]));
    return out;
}

void write_features(BinaryWriter& w, const FeatureMap& features) {
    w.put<std::uint64_t>(features.size());
    w.put<std::uint64_t>(features.empty() ? 0 : features.begin()->second.dim());
    for (const auto& [id, f] : features) {
        w.put<std::uint32_t>(id);
        for (double v : f.values()) w.put(v);
    }
}

FeatureMap read_features(BinaryReader& r) {
    auto n = r.get<std::uint64_t>();
    auto dim = r.get<std::uint64_t>();
    FeatureMap out;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto id = r.get<std::uint32_t>();
        std::vector<double> v(dim);
        for (auto& x : v) x = r.get<double>();
        out.emplace(id, FeatureVector::from_unit(std::move(v)));
    }
    return out;
}

} // namespace ovseg
