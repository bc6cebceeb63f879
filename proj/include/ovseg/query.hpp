#pragma once

#include "ovseg/feature.hpp"
#include "ovseg/scene_io.hpp"
#include "ovseg/superpoint.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ovseg {

/// Score given to points whose superpoint has no feature.
inline constexpr float kNoFeatureScore = -1.0f;

struct ScoreWindow {
    double lo = 0.0;
    double hi = 0.0;
};

struct QueryResult {
    std::string prompt;
    std::map<SuperpointId, double> sp_scores;
    std::vector<float> point_scores;
    ScoreWindow normalization; // 2nd..98th percentile of sp_scores
};

struct InstanceMask {
    std::uint32_t instance_id = 0;
    std::vector<PointIndex> point_indices; // ascending
    double score = 0.0;                    // mean point score
};

enum class ThresholdMode { Absolute, Percentile };

struct ClusterConfig {
    ThresholdMode mode = ThresholdMode::Percentile;
    double value = 97.0; // theta for Absolute, p in (0, 100) for Percentile
    double epsilon = 0.05;
    int min_cluster_size = 50;

    void validate() const;
};

/// Nearest-rank percentile (p in [0, 100]) of an unsorted sample.
double nearest_rank_percentile(std::vector<double> values, double p);

QueryResult score_query(std::string_view prompt, const FeatureMap& features, FeatureProvider& provider,
                        const SuperpointGraph& graph);

/// Points at or above the threshold, ascending.
std::vector<PointIndex> threshold_points(const QueryResult& result, const ClusterConfig& cfg);

/// Density clustering of the selected points: a point is core if at least
/// min_cluster_size selected points (itself included) lie within epsilon;
/// core points within epsilon of each other share a cluster; every other point
/// within epsilon of a core point joins the cluster of its nearest core point
/// (ties to the lower index); clusters smaller than min_cluster_size are
/// dropped. Instances are sorted by size descending, then smallest index.
std::vector<InstanceMask> cluster_instances(std::span<const PointIndex> points, const PointCloud& cloud,
                                            const ClusterConfig& cfg, std::span<const float> point_scores = {});

/// Blue (low) to yellow (high) over [lo, hi], clamped. Equal bounds map to the midpoint.
Rgb heatmap_color(double score, const ScoreWindow& window);

/// PLY with x, y, z, heatmap colors and the raw score.
void export_heatmap(const QueryResult& result, const PointCloud& cloud, const std::filesystem::path& path);

inline constexpr Rgb kNoiseColor{128, 128, 128};
Rgb instance_color(std::uint32_t instance_id);

/// PLY with x, y, z, a categorical color per instance (gray for noise) and an
/// `instance` property (-1 for noise).
void export_instances(const std::vector<InstanceMask>& instances, const PointCloud& cloud,
                      const std::filesystem::path& path);

nlohmann::json result_to_json(const QueryResult& result, const std::vector<InstanceMask>& instances);

} // namespace ovseg
