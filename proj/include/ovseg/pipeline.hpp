#pragma once

#include "ovseg/feature.hpp"
#include "ovseg/merge.hpp"
#include "ovseg/query.hpp"
#include "ovseg/scene_io.hpp"
#include "ovseg/superpoint.hpp"
#include "ovseg/visibility.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ovseg {

/// Everything a run depends on. Serialized with every field present so a
/// config file alone reproduces a run.
struct PipelineConfig {
    std::filesystem::path manifest;
    double voxel_size = kDefaultVoxelSize;
    int normal_k = 16;
    OversegConfig overseg;
    OcclusionConfig occlusion;
    ExtractionOptions views;
    FeatureConfig features;
    MergeConfig merge;
    ClusterConfig cluster;
    std::string merge_provider_url = "synthetic";
    std::string query_provider_url = "synthetic";
    std::filesystem::path cache_dir = "cache";
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; relative paths resolve against base_dir.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static PipelineConfig load(const std::filesystem::path& path);
};

/// "synthetic" or "synthetic:<dim>" give the in-process provider, anything
/// else is treated as the base URL of a provider service.
std::unique_ptr<FeatureProvider> make_provider(const std::string& url);

struct StageStatus {
    std::string name;
    std::string key;
    bool cached = false;
};

struct StageKeys {
    std::string load, downsample, superpoints, visibility, features;
};

/// Cache keys of every stage, derived from config values and input file
/// contents only (never from stage outputs).
StageKeys compute_stage_keys(const PipelineConfig& cfg);

struct PreparedScene {
    SceneBundle scene; // downsampled cloud with normals, views
    SuperpointGraph graph;
    VisibilityTable visibility;
    std::vector<StageStatus> stages;
};

struct FeatureArtifacts {
    SuperpointGraph graph; // after merging
    FeatureMap merge_features;
    FeatureMap query_features;
    std::string merge_provider;
    std::string query_provider;
    MergeReport report;
    std::vector<MergeDecision> decisions;
};

std::filesystem::path stage_path(const PipelineConfig& cfg, const std::string& stage, const std::string& key);

/// Loads, downsamples, fills normals, oversegments and builds visibility,
/// reusing every stage whose key already has a cache file.
PreparedScene cmd_prepare(const PipelineConfig& cfg, std::ostream* log = nullptr);

/// Loads the prepared stages from cache; throws MissingStage if any is absent.
PreparedScene load_prepared(const PipelineConfig& cfg);

struct FeatureRunHooks {
    /// Called after the merge loop state is checkpointed (round 0 = initial extraction).
    std::function<void(int round)> on_checkpoint;
};

/// Initial extraction and merge loop with the merge provider (checkpointed per
/// round, resumable), then a full re-extraction with the query provider.
FeatureArtifacts cmd_features(const PipelineConfig& cfg, FeatureProvider& merge_provider,
                              FeatureProvider& query_provider, std::ostream* log = nullptr,
                              const FeatureRunHooks& hooks = {});

/// Throws MissingStage if cmd_features has not completed for this config.
FeatureArtifacts load_features(const PipelineConfig& cfg, const PointCloud& cloud);

struct QueryOptions {
    std::string prompt;
    std::optional<double> threshold; // absolute score; overrides cfg.cluster's threshold
    bool cluster = true;
    std::optional<std::filesystem::path> heatmap_path;
    std::optional<std::filesystem::path> instances_path;
    std::optional<std::filesystem::path> json_path;
};

struct QueryOutput {
    QueryResult result;
    std::vector<InstanceMask> instances;
};

QueryOutput cmd_query(const PipelineConfig& cfg, FeatureProvider& query_provider, const QueryOptions& opts,
                      std::ostream& out);

void cmd_stats(const PipelineConfig& cfg, std::ostream& out);

} // namespace ovseg
