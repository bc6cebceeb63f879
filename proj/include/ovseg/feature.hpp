#pragma once

#include "ovseg/binary_io.hpp"
#include "ovseg/image.hpp"
#include "ovseg/scene_io.hpp"
#include "ovseg/superpoint.hpp"
#include "ovseg/visibility.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ovseg {

/// Unit-norm embedding. Construction normalizes; a zero vector cannot be stored.
class FeatureVector {
  public:
    FeatureVector() = default;
    explicit FeatureVector(std::vector<double> values);

    /// Adopts values that are already unit-norm (within 1e-6) without rescaling,
    /// so cached features round-trip bit-exactly.
    static FeatureVector from_unit(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

  private:
    std::vector<double> values_;
};

/// Features keyed by superpoint id; superpoints without a feature are absent.
using FeatureMap = std::map<SuperpointId, FeatureVector>;

struct ProviderInfo {
    std::size_t dim = 0;
    std::string name;
    std::string image_model;
    std::string text_model;
    /// Largest number of concurrent requests the provider accepts; 0 = no limit.
    int max_in_flight = 0;
};

/// Vision-language model plus promptable segmenter behind one interface.
/// Implementations must be safe to call concurrently unless they report
/// max_in_flight == 1.
class FeatureProvider {
  public:
    virtual ~FeatureProvider() = default;

    virtual FeatureVector embed_image(const RgbImage& image) = 0;
    virtual FeatureVector embed_text(std::string_view text) = 0;
    /// Returns a mask with the image's dimensions.
    virtual Mask segment(const RgbImage& image, std::span<const Pixel> prompts) = 0;
    virtual ProviderInfo info() = 0;
};

struct PixelRect {
    int x = 0, y = 0, width = 0, height = 0;

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct CropSpec {
    std::string view_id;
    PixelRect bbox;
    Mask mask; // bbox-sized
    std::vector<Pixel> prompts_used;
};

struct FeatureConfig {
    int prompts_per_view = 5;
    double crop_padding = 0.1;
    std::uint64_t seed = 0;
    int min_mask_pixels = 16;
    int max_in_flight = 4;

    void validate() const;
};

/// min(m, |visible|) pixels drawn uniformly without replacement.
std::vector<Pixel> sample_prompts(std::span<const VisiblePoint> visible, int m, std::uint64_t seed);

/// Tight mask bounding box grown by padding * diagonal on each side, clamped to the image.
/// Throws EmptyMask when the mask has fewer than min_mask_pixels pixels.
PixelRect crop_rect(const Mask& mask, double padding, int min_mask_pixels = 1);

/// The image cut to crop_rect with every pixel outside the mask set to white.
RgbImage masked_crop(const RgbImage& image, const Mask& mask, double padding, int min_mask_pixels = 1);

struct ExtractionOptions {
    int top_k = 5;
    int min_visible = 24;
};

/// Segment, whiten, crop and embed the superpoint in each of its top-k views,
/// then average the crop embeddings. nullopt if no view yields a usable crop.
std::optional<FeatureVector> extract_superpoint_feature(SuperpointId sp, const VisibilityTable& table,
                                                        std::span<const CameraView> views, FeatureProvider& provider,
                                                        const FeatureConfig& cfg, const ExtractionOptions& opts,
                                                        std::vector<CropSpec>* crops = nullptr);

/// Runs extract_superpoint_feature for `sps` with at most
/// min(cfg.max_in_flight, provider max_in_flight) jobs in flight.
FeatureMap extract_features(std::span<const SuperpointId> sps, const VisibilityTable& table,
                            std::span<const CameraView> views, FeatureProvider& provider, const FeatureConfig& cfg,
                            const ExtractionOptions& opts);

/// L2-normalized arithmetic mean.
FeatureVector mean_feature(std::span<const FeatureVector> vectors);

void write_features(BinaryWriter& w, const FeatureMap& features);
FeatureMap read_features(BinaryReader& r);

} // namespace ovseg
