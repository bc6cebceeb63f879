#pragma once

#include "ovseg/feature.hpp"

namespace ovseg {

/// Deterministic, model-free provider.
///
/// Images embed as a coarse color histogram: 12 hue bins (30 degrees each,
/// bin 0 centered on red) for saturated pixels and 4 brightness bins for
/// achromatic ones, folded into `dim` slots. Pure white pixels are the
/// whitening fill and are not counted. Text embeds color words into the same
/// bins ("red box" -> red bin); prompts without a color word map to a
/// pseudo-random unit vector seeded by the text. Segmentation flood-fills
/// 4-connected pixels close in color to each prompt pixel and unions the fills.
class SyntheticProvider final : public FeatureProvider {
  public:
    static constexpr std::size_t kBins = 16;

    explicit SyntheticProvider(std::size_t dim = 64, int color_tolerance = 16);

    FeatureVector embed_image(const RgbImage& image) override;
    FeatureVector embed_text(std::string_view text) override;
    Mask segment(const RgbImage& image, std::span<const Pixel> prompts) override;
    ProviderInfo info() override;

    /// Histogram bin of a color, or -1 for the pure-white fill color.
    static int color_bin(Rgb c);

  private:
    std::size_t dim_;
    int tolerance_;
};

} // namespace ovseg
