#pragma once

#include "ovseg/feature.hpp"
#include "ovseg/superpoint.hpp"
#include "ovseg/visibility.hpp"

#include <json.hpp>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ovseg {

struct MergeConfig {
    double tau = 0.95;
    int rounds = 8;
    bool reextract_each_round = true;

    void validate() const;
};

struct MergeRoundStats {
    std::size_t n_superpoints_before = 0;
    std::size_t n_merges = 0;
    std::size_t n_superpoints_after = 0;
    double mean_edge_similarity = 0.0;

    friend bool operator==(const MergeRoundStats&, const MergeRoundStats&) = default;
};

using MergeReport = std::vector<MergeRoundStats>;

/// One executed merge: the edge scanned and the representative similarity that allowed it.
struct MergeDecision {
    SuperpointId a = 0;
    SuperpointId b = 0;
    double similarity = 0.0;
};

struct MergeRoundResult {
    SuperpointGraph graph;
    FeatureMap features;
    std::vector<SuperpointId> old_to_new;
    /// New ids of superpoints formed from more than one constituent.
    std::vector<SuperpointId> changed;
    std::vector<MergeDecision> decisions;
    MergeRoundStats stats;
};

/// Dot product of two unit vectors; throws DimMismatch on differing dimensions.
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

/// Greedy merge over the edges sorted by similarity (descending, ties by lower
/// id pair). An edge merges iff its endpoints' current representatives are still
/// at least tau apart in cosine, where a representative is the member-count
/// weighted mean of its constituents' features, renormalized. Superpoints
/// without a feature never merge.
MergeRoundResult merge_round(const SuperpointGraph& graph, const PointCloud& cloud, const FeatureMap& features,
                             double tau);

struct MergeLoopState {
    SuperpointGraph graph;
    FeatureMap features;
    MergeReport report;
    std::vector<MergeDecision> decisions;
    int rounds_done = 0;
    bool finished = false;
};

struct MergeLoopHooks {
    /// Visibility rows for the given (new) superpoints of the given graph.
    std::function<VisibilityTable(const SuperpointGraph&, std::span<const SuperpointId>)> recompute_visibility;
    /// Called after every completed round, e.g. to checkpoint.
    std::function<void(const MergeLoopState&)> on_round_complete;
};

/// Alternates merge_round with re-extraction of the changed superpoints'
/// features. Resumes from `state.rounds_done`; stops after cfg.rounds rounds or
/// the first round without merges.
MergeLoopState run_merge_loop(MergeLoopState state, const PointCloud& cloud, std::span<const CameraView> views,
                              FeatureProvider& provider, const MergeLoopHooks& hooks, const MergeConfig& cfg,
                              const FeatureConfig& feature_cfg, const ExtractionOptions& opts);

/// Re-extracts every superpoint's feature with (typically) a different provider.
FeatureMap final_feature_pass(const SuperpointGraph& graph, const VisibilityTable& table,
                              std::span<const CameraView> views, FeatureProvider& provider,
                              const FeatureConfig& feature_cfg, const ExtractionOptions& opts);

nlohmann::json to_json(const MergeRoundStats& s);
/// One JSON object per line, one line per round.
std::string report_to_json_lines(const MergeReport& report);

} // namespace ovseg
