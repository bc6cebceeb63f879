#pragma once

#include "ovseg/pipeline.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace ovseg {

/// GET /api/scene payload, all little-endian:
///   "OVSC" | u32 header_len | JSON header (space-padded to a multiple of 4)
///   | i32[3 * n] voxel-grid positions | u8[3 * n] colors | pad to 4 | u32[n] superpoint ids
/// Positions are round((p - origin) / voxel_size); the header carries
/// point_count, superpoint_count, voxel_size, origin and the block layout.
std::vector<std::uint8_t> encode_scene_payload(const PointCloud& cloud, const SuperpointGraph& graph,
                                               double voxel_size);

/// Read-only HTTP front end over cached pipeline artifacts:
///   GET  /api/scene, GET /api/meta,
///   POST /api/query {"prompt"} -> {"prompt", "sp_scores", "normalization"}
///   POST /api/instances {"prompt", "threshold"?, "epsilon"?, "min_cluster_size"?} -> {"prompt", "instances"}
/// plus static files from `static_dir` when given. Only embed_text reaches the
/// provider; its unavailability maps to 503.
class SceneServer {
  public:
    SceneServer(PipelineConfig cfg, PreparedScene prepared, FeatureArtifacts features, FeatureProvider& provider,
                std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~SceneServer();

    int start(const std::string& host = "127.0.0.1", int port = 0);
    void run(const std::string& host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ovseg
