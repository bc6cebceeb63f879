#pragma once

#include "ovseg/binary_io.hpp"
#include "ovseg/image.hpp"
#include "ovseg/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ovseg {

inline constexpr double kDefaultVoxelSize = 0.005;

struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Rgb> colors;
    std::vector<Vec3> normals;
    /// 1 if the normal is a unit vector we trust, 0 if it still needs estimating.
    std::vector<std::uint8_t> normal_valid;

    std::size_t size() const { return positions.size(); }
    bool all_normals_valid() const;
    /// Checks lengths, finiteness and normal norms; throws MalformedManifest.
    void validate() const;
    void resize(std::size_t n);

    friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    /// Nearest cloud point for every vertex; filled by attach_mesh.
    std::vector<PointIndex> vertex_to_point;

    friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

struct CameraView {
    std::string view_id;
    Intrinsics intrinsics;
    Mat4 cam_to_world = Mat4::Identity();
    RgbImage rgb;
    DepthImage depth;

    friend bool operator==(const CameraView&, const CameraView&) = default;
};

struct SceneBundle {
    PointCloud cloud;
    std::optional<TriangleMesh> mesh;
    std::vector<CameraView> views;
    double voxel_size = kDefaultVoxelSize;

    friend bool operator==(const SceneBundle&, const SceneBundle&) = default;
};

/// Reads the JSON manifest and everything it references. Views come back sorted by id.
SceneBundle load_scene(const std::filesystem::path& manifest_path, double voxel_size = kDefaultVoxelSize);

/// Throws InvalidPose / DimensionMismatch / MalformedManifest on violated view invariants.
void validate_view(const CameraView& view);

/// At most one output point per occupied voxel, in ascending voxel-key order.
/// Voxels whose member normals cancel get a PCA normal from the surrounding
/// 3x3x3 voxels; if that neighborhood is rank-deficient the normal is flagged invalid.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

struct NormalReport {
    std::size_t rank_deficient = 0;
};

/// PCA normals from the k nearest neighbors (the point included). Collinear or
/// coincident neighborhoods get +z and are flagged invalid.
PointCloud estimate_normals(const PointCloud& cloud, int k, NormalReport* report = nullptr);

/// Like estimate_normals but only replaces normals currently flagged invalid.
PointCloud fill_missing_normals(const PointCloud& cloud, int k, NormalReport* report = nullptr);

/// Fills mesh.vertex_to_point; throws MalformedManifest if a vertex lies
/// farther than 2 voxels from every cloud point.
void attach_mesh(TriangleMesh& mesh, const PointCloud& cloud, double voxel_size);

PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);
/// PLY (face element) or Wavefront OBJ.
TriangleMesh read_mesh(const std::filesystem::path& path);

void save_scene_cache(const SceneBundle& bundle, const std::filesystem::path& path);
SceneBundle load_scene_cache(const std::filesystem::path& path);

// Building blocks shared by the other cache payloads.
void write_cloud(BinaryWriter& w, const PointCloud& cloud);
PointCloud read_cloud(BinaryReader& r);
void write_views(BinaryWriter& w, const std::vector<CameraView>& views);
std::vector<CameraView> read_views(BinaryReader& r);

} // namespace ovseg
